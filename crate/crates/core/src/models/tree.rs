//! Least-squares regression trees grown by exhaustive split search.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature. Among splits with equal reduction in squared error the lowest
//! feature index wins, then the lowest threshold.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Node<T> {
    Leaf {
        value: T,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Binary tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> RegressionTree<T> {
    /// Samples with `x[feature] <= threshold` go left.
    pub fn predict_one(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Training matrix in column layout with each column's sample order sorted
/// by value, computed once and reused for every tree.
#[derive(Debug, Clone)]
pub struct PresortedColumns<T> {
    pub columns: Vec<Vec<T>>,
    pub sorted: Vec<Vec<u32>>,
    pub n_samples: usize,
}

impl<T: Scalar> PresortedColumns<T> {
    pub fn new<R: AsRef<[T]>>(x: &[R]) -> Self {
        let n = x.len();
        let p = x.first().map_or(0, |r| r.as_ref().len());
        let columns: Vec<Vec<T>> = (0..p)
            .map(|j| x.iter().map(|r| r.as_ref()[j]).collect())
            .collect();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .partial_cmp(&col[b as usize])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        PresortedColumns {
            columns,
            sorted,
            n_samples: n,
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

/// Best split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<T> {
    pub feature: usize,
    pub threshold: T,
    /// Reduction in sum of squared error.
    pub gain: T,
}

/// Mean computed around the first element so identical values average exactly.
pub(crate) fn shifted_mean<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    let mut first = None;
    let mut acc = T::zero();
    let mut n = 0usize;
    for v in values {
        let f = *first.get_or_insert(v);
        acc = acc + (v - f);
        n += 1;
    }
    match first {
        Some(f) => f + acc / T::of_usize(n),
        None => T::zero(),
    }
}

/// Exhaustive search over all features and midpoint thresholds for the
/// samples flagged in `member`, which must number `count`.
pub fn best_split<T: Scalar>(
    data: &PresortedColumns<T>,
    target: &[T],
    member: &[bool],
    count: usize,
    min_leaf: usize,
) -> Option<SplitChoice<T>> {
    let samples: Vec<usize> = (0..data.n_samples).filter(|&i| member[i]).collect();
    debug_assert_eq!(samples.len(), count);
    let orders: Vec<Vec<u32>> = data
        .sorted
        .iter()
        .map(|o| o.iter().copied().filter(|&i| member[i as usize]).collect())
        .collect();
    search(data, target, &samples, &orders, min_leaf)
}

/// `samples` lists the node's rows in ascending order; `orders[f]` lists the
/// same rows sorted by feature `f`.
fn search<T: Scalar>(
    data: &PresortedColumns<T>,
    target: &[T],
    samples: &[usize],
    orders: &[Vec<u32>],
    min_leaf: usize,
) -> Option<SplitChoice<T>> {
    let min_leaf = min_leaf.max(1);
    let count = samples.len();
    if count < 2 * min_leaf {
        return None;
    }
    let mut total = T::zero();
    let mut sumsq = T::zero();
    for &i in samples {
        total = total + target[i];
        sumsq = sumsq + target[i] * target[i];
    }
    let n = T::of_usize(count);
    let parent = total * total / n;
    let tol = T::epsilon() * T::of(64.0) * (sumsq + parent.abs());
    let mut best: Option<SplitChoice<T>> = None;
    for (f, order) in orders.iter().enumerate() {
        let col = &data.columns[f];
        let (lo, hi) = (col[order[0] as usize], col[order[count - 1] as usize]);
        if !(lo < hi) {
            continue;
        }
        let mut left_sum = T::zero();
        for k in 0..count - 1 {
            let (i, next) = (order[k] as usize, order[k + 1] as usize);
            left_sum = left_sum + target[i];
            let n_left = k + 1;
            let n_right = count - n_left;
            if n_left < min_leaf {
                continue;
            }
            if n_right < min_leaf {
                break;
            }
            let (v, v_next) = (col[i], col[next]);
            if !(v < v_next) {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / T::of_usize(n_left)
                + right_sum * right_sum / T::of_usize(n_right)
                - parent;
            let better = match &best {
                None => true,
                Some(b) => gain > b.gain + tol,
            };
            if better {
                let mut threshold = (v + v_next) / T::of(2.0);
                if !(threshold < v_next) {
                    threshold = v;
                }
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Grows a tree on `target` over the whole training set.
pub fn fit_tree<T: Scalar>(
    data: &PresortedColumns<T>,
    target: &[T],
    params: TreeParams,
) -> RegressionTree<T> {
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..data.n_samples).collect();
    let mut goes_left = vec![false; data.n_samples];
    grow(
        data,
        target,
        &all,
        data.sorted.clone(),
        0,
        params,
        &mut nodes,
        &mut goes_left,
    );
    RegressionTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow<T: Scalar>(
    data: &PresortedColumns<T>,
    target: &[T],
    samples: &[usize],
    orders: Vec<Vec<u32>>,
    depth: usize,
    params: TreeParams,
    nodes: &mut Vec<Node<T>>,
    goes_left: &mut [bool],
) -> usize {
    let id = nodes.len();
    let mean = shifted_mean(samples.iter().map(|&i| target[i]));
    nodes.push(Node::Leaf { value: mean });
    if depth >= params.max_depth || samples.is_empty() {
        return id;
    }
    let pure = samples.iter().all(|&i| target[i] == target[samples[0]]);
    if pure {
        return id;
    }
    let Some(split) = search(data, target, samples, &orders, params.min_samples_leaf) else {
        return id;
    };
    let col = &data.columns[split.feature];
    for &i in samples {
        goes_left[i] = col[i] <= split.threshold;
    }
    let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| goes_left[i]);
    let (mut left_orders, mut right_orders) = (
        Vec::with_capacity(orders.len()),
        Vec::with_capacity(orders.len()),
    );
    for order in orders {
        let (l, r): (Vec<u32>, Vec<u32>) = order.into_iter().partition(|&i| goes_left[i as usize]);
        left_orders.push(l);
        right_orders.push(r);
    }
    let l = grow(
        data,
        target,
        &left,
        left_orders,
        depth + 1,
        params,
        nodes,
        goes_left,
    );
    let r = grow(
        data,
        target,
        &right,
        right_orders,
        depth + 1,
        params,
        nodes,
        goes_left,
    );
    nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: l,
        right: r,
    };
    id
}
