//! Dense least squares: Householder QR followed by a one-sided Jacobi SVD of
//! the triangular factor, giving the minimum-norm solution for
//! rank-deficient systems.

use crate::scalar::Scalar;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> ColMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ColMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(n, p);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.as_ref().iter().enumerate() {
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[j * self.rows + i] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    fn two_cols_mut(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        debug_assert!(a < b);
        let n = self.rows;
        let (lo, hi) = self.data.split_at_mut(b * n);
        (&mut lo[a * n..(a + 1) * n], &mut hi[..n])
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// In-place Householder QR of `a` (rows >= cols), applying the same
/// reflections to `b`. On return the upper triangle of `a` holds `R`.
fn householder_qr<T: Scalar>(a: &mut ColMatrix<T>, b: &mut [T]) {
    let (m, n) = (a.rows, a.cols);
    let mut v = vec![T::zero(); m];
    for k in 0..n.min(m) {
        let norm = a.col(k)[k..]
            .iter()
            .fold(T::zero(), |s, &x| s + x * x)
            .sqrt();
        if norm == T::zero() {
            continue;
        }
        let x0 = a.get(k, k);
        let alpha = if x0 >= T::zero() { -norm } else { norm };
        v[k..].copy_from_slice(&a.col(k)[k..]);
        v[k] = v[k] - alpha;
        let vnorm2 = v[k..].iter().fold(T::zero(), |s, &x| s + x * x);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::of(2.0);
        for j in k..n {
            let col = a.col_mut(j);
            let f = two * dot(&v[k..], &col[k..]) / vnorm2;
            for (c, &vi) in col[k..].iter_mut().zip(&v[k..]) {
                *c = *c - f * vi;
            }
        }
        let f = two * dot(&v[k..], &b[k..]) / vnorm2;
        for (c, &vi) in b[k..].iter_mut().zip(&v[k..]) {
            *c = *c - f * vi;
        }
        for i in k + 1..m {
            a.set(i, k, T::zero());
        }
    }
}

/// Thin SVD by one-sided Jacobi rotations: returns `(U, sigma, V)` with
/// `a = U diag(sigma) V^T`, for `a.rows >= a.cols`.
pub fn jacobi_svd<T: Scalar>(a: &ColMatrix<T>) -> (ColMatrix<T>, Vec<T>, ColMatrix<T>) {
    let n = a.cols;
    let mut u = a.clone();
    let mut v = ColMatrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, T::one());
    }
    let eps = T::epsilon();
    let tol = eps * T::of_usize(a.rows.max(1)).sqrt();
    // Columns below this squared norm are numerically zero and left alone.
    let frob2 = (0..n).fold(T::zero(), |acc, j| acc + dot(a.col(j), a.col(j)));
    let negligible = eps * eps * frob2;
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (ci, cj) = u.two_cols_mut(i, j);
                let alpha = dot(ci, ci);
                let beta = dot(cj, cj);
                let gamma = dot(ci, cj);
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
                let (vi, vj) = v.two_cols_mut(i, j);
                for (x, y) in vi.iter_mut().zip(vj.iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = Vec::with_capacity(n);
    for j in 0..n {
        let col = u.col_mut(j);
        let s = dot(col, col).sqrt();
        if s > T::zero() {
            for x in col.iter_mut() {
                *x = *x / s;
            }
        }
        sigma.push(s);
    }
    (u, sigma, v)
}

fn rank_cutoff<T: Scalar>(sigma: &[T], m: usize, n: usize) -> T {
    let smax = sigma.iter().fold(T::zero(), |a, &b| a.max(b));
    smax * T::of_usize(m.max(n)) * T::epsilon()
}

/// Minimum-norm solution of `min ||a x - b||`.
pub fn lstsq_min_norm<T: Scalar>(a: &ColMatrix<T>, b: &[T]) -> Vec<T> {
    let (m, n) = (a.rows, a.cols);
    if n == 0 {
        return Vec::new();
    }
    if m >= n {
        let mut r = a.clone();
        let mut c = b.to_vec();
        householder_qr(&mut r, &mut c);
        let mut square = ColMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                square.set(i, j, r.get(i, j));
            }
        }
        let (u, sigma, v) = jacobi_svd(&square);
        let cut = rank_cutoff(&sigma, m, n);
        let mut x = vec![T::zero(); n];
        for (k, &s) in sigma.iter().enumerate() {
            if s <= cut {
                continue;
            }
            let coef = dot(u.col(k), &c[..n]) / s;
            for (xi, &vi) in x.iter_mut().zip(v.col(k)) {
                *xi = *xi + coef * vi;
            }
        }
        x
    } else {
        // a^T = U S V^T, so a = V S U^T and pinv(a) = U S^+ V^T
        let at = a.transpose();
        let (u, sigma, v) = jacobi_svd(&at);
        let cut = rank_cutoff(&sigma, m, n);
        let mut x = vec![T::zero(); n];
        for (k, &s) in sigma.iter().enumerate() {
            if s <= cut {
                continue;
            }
            let coef = dot(v.col(k), b) / s;
            for (xi, &ui) in x.iter_mut().zip(u.col(k)) {
                *xi = *xi + coef * ui;
            }
        }
        x
    }
}
