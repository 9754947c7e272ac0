//! Georeferenced uniform grids and the disc-based zonal statistics used to
//! turn them into per-location features.
//!
//! A cell belongs to the disc of radius `r` around `(x, y)` when its center
//! lies within Euclidean distance `r` (inclusive). Cells are always visited in
//! row-major order, north row first, so sums are reproducible bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Radius used for land-cover fractions and satellite averaging, in meters.
pub const NEIGHBOURHOOD_RADIUS: f64 = 500.0;
pub const DEM_NEAR_RADIUS: f64 = 100.0;
pub const DEM_FAR_RADIUS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid<T> {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: T,
    pub yllcorner: T,
    pub cellsize: T,
    pub nodata: T,
    cells: Vec<T>,
}

impl<T: Scalar> RasterGrid<T> {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xllcorner: T,
        yllcorner: T,
        cellsize: T,
        nodata: T,
        cells: Vec<T>,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::Domain(
                "grid must have at least one row and column".into(),
            ));
        }
        if !(cellsize > T::zero()) {
            return Err(Error::Domain(format!(
                "cellsize must be > 0, got {cellsize}"
            )));
        }
        if cells.len() != ncols * nrows {
            return Err(Error::DimensionMismatch {
                expected: ncols * nrows,
                found: cells.len(),
            });
        }
        Ok(RasterGrid {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata,
            cells,
        })
    }

    /// Grid filled by evaluating `f(x, y)` at every cell center.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        xllcorner: T,
        yllcorner: T,
        cellsize: T,
        nodata: T,
        mut f: impl FnMut(T, T) -> T,
    ) -> Result<Self> {
        let mut cells = Vec::with_capacity(ncols * nrows);
        for row in 0..nrows {
            for col in 0..ncols {
                let (x, y) = center_of(xllcorner, yllcorner, cellsize, nrows, row, col);
                cells.push(f(x, y));
            }
        }
        Self::new(ncols, nrows, xllcorner, yllcorner, cellsize, nodata, cells)
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    /// Cell value, or `None` for nodata.
    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        let v = self.cells[row * self.ncols + col];
        (!(v == self.nodata || v.is_nan())).then_some(v)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (T, T) {
        center_of(
            self.xllcorner,
            self.yllcorner,
            self.cellsize,
            self.nrows,
            row,
            col,
        )
    }

    /// `(xmin, ymin, xmax, ymax)`
    pub fn extent(&self) -> (T, T, T, T) {
        (
            self.xllcorner,
            self.yllcorner,
            self.xllcorner + T::of_usize(self.ncols) * self.cellsize,
            self.yllcorner + T::of_usize(self.nrows) * self.cellsize,
        )
    }

    /// Cell containing `(x, y)`; points on the outer east/north edge map to
    /// the last column/row.
    pub fn locate(&self, x: T, y: T) -> Option<(usize, usize)> {
        let (xmin, ymin, xmax, ymax) = self.extent();
        if !(x >= xmin && x <= xmax && y >= ymin && y <= ymax) {
            return None;
        }
        let col = ((x - xmin) / self.cellsize)
            .floor()
            .to_usize()?
            .min(self.ncols - 1);
        let row = ((ymax - y) / self.cellsize)
            .floor()
            .to_usize()?
            .min(self.nrows - 1);
        Some((row, col))
    }

    /// Row-major `(row, col)` pairs whose centers lie within `radius` of `(x, y)`,
    /// nodata cells included.
    pub fn disc_cells(&self, x: T, y: T, radius: T) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let Some((rows, cols)) = self.disc_window(x, y, radius) else {
            return out;
        };
        let r2 = radius * radius;
        for row in rows.0..=rows.1 {
            for col in cols.0..=cols.1 {
                let (cx, cy) = self.cell_center(row, col);
                let dx = cx - x;
                let dy = cy - y;
                if dx * dx + dy * dy <= r2 {
                    out.push((row, col));
                }
            }
        }
        out
    }

    // Conservative row/column bounds of the disc; one cell of slack on each side.
    fn disc_window(&self, x: T, y: T, radius: T) -> Option<((usize, usize), (usize, usize))> {
        let cs = self.cellsize.as_f64();
        let (x, y, r) = (x.as_f64(), y.as_f64(), radius.as_f64());
        if !(x.is_finite() && y.is_finite() && r.is_finite()) {
            return None;
        }
        let xll = self.xllcorner.as_f64();
        let yll = self.yllcorner.as_f64();
        let nrows = self.nrows as f64;
        let col_lo = ((x - r - xll) / cs - 0.5).floor() - 1.0;
        let col_hi = ((x + r - xll) / cs - 0.5).ceil() + 1.0;
        let row_lo = (nrows - 0.5 - (y + r - yll) / cs).floor() - 1.0;
        let row_hi = (nrows - 0.5 - (y - r - yll) / cs).ceil() + 1.0;
        let clamp = |lo: f64, hi: f64, n: usize| -> Option<(usize, usize)> {
            let lo = lo.max(0.0);
            let hi = hi.min(n as f64 - 1.0);
            (lo <= hi).then_some((lo as usize, hi as usize))
        };
        Some((
            clamp(row_lo, row_hi, self.nrows)?,
            clamp(col_lo, col_hi, self.ncols)?,
        ))
    }
}

fn center_of<T: Scalar>(xll: T, yll: T, cs: T, nrows: usize, row: usize, col: usize) -> (T, T) {
    let half = T::of(0.5);
    let x = xll + (T::of_usize(col) + half) * cs;
    let y = yll + (T::of_usize(nrows - row) - half) * cs;
    (x, y)
}

/// Parses an ESRI ASCII grid (`.asc`).
pub fn parse_grid<T: Scalar>(text: &str) -> Result<RasterGrid<T>> {
    let mut header: BTreeMap<String, (f64, u64)> = BTreeMap::new();
    let mut values: Vec<T> = Vec::new();
    let mut in_body = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let first = line.split_whitespace().next().unwrap_or_default();
        if !in_body
            && first
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic())
        {
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            let value = parts.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("header `{key}` has no value"),
            })?;
            let value: f64 = value.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("header `{key}` value `{value}` is not numeric"),
            })?;
            header.insert(key, (value, line_no));
            continue;
        }
        in_body = true;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cell value `{tok}` is not numeric"),
            })?;
            values.push(T::of(v));
        }
    }
    let get = |key: &str| -> Result<(f64, u64)> {
        header.get(key).copied().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing header `{key}`"),
        })
    };
    let as_count = |key: &str| -> Result<usize> {
        let (v, line) = get(key)?;
        if v.fract() != 0.0 || v < 1.0 {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` must be a positive integer"),
            });
        }
        Ok(v as usize)
    };
    let ncols = as_count("ncols")?;
    let nrows = as_count("nrows")?;
    let cellsize = get("cellsize")?.0;
    let (xll, yll) = match (header.get("xllcorner"), header.get("xllcenter")) {
        (Some(x), _) => (x.0, get("yllcorner")?.0),
        (None, Some(x)) => (x.0 - cellsize / 2.0, get("yllcenter")?.0 - cellsize / 2.0),
        (None, None) => get("xllcorner").map(|_| (0.0, 0.0))?,
    };
    let nodata = header.get("nodata_value").map(|v| v.0).unwrap_or(-9999.0);
    if values.len() != ncols * nrows {
        return Err(Error::DimensionMismatch {
            expected: ncols * nrows,
            found: values.len(),
        });
    }
    RasterGrid::new(
        ncols,
        nrows,
        T::of(xll),
        T::of(yll),
        T::of(cellsize),
        T::of(nodata),
        values,
    )
}

pub fn load_grid<T: Scalar>(path: impl AsRef<Path>) -> Result<RasterGrid<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid(&text)
}

pub fn write_grid<T: Scalar>(grid: &RasterGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&format!("ncols {}\n", grid.ncols));
    out.push_str(&format!("nrows {}\n", grid.nrows));
    out.push_str(&format!("xllcorner {}\n", grid.xllcorner));
    out.push_str(&format!("yllcorner {}\n", grid.yllcorner));
    out.push_str(&format!("cellsize {}\n", grid.cellsize));
    out.push_str(&format!("NODATA_value {}\n", grid.nodata));
    for row in grid.cells.chunks(grid.ncols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Mean of the non-nodata cells in the disc, `None` when there are none.
pub fn radius_mean<T: Scalar>(grid: &RasterGrid<T>, x: T, y: T, radius: T) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0usize;
    for (row, col) in grid.disc_cells(x, y, radius) {
        if let Some(v) = grid.get(row, col) {
            sum = sum + v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / T::of_usize(n))
}

/// The ten land-use categories raw classes are grouped into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandCover {
    Urban,
    Road,
    Railways,
    Port,
    Airports,
    Extraction,
    NoUse,
    Green,
    OpenSpaces,
    Water,
}

impl LandCover {
    pub const ALL: [LandCover; 10] = [
        LandCover::Urban,
        LandCover::Road,
        LandCover::Railways,
        LandCover::Port,
        LandCover::Airports,
        LandCover::Extraction,
        LandCover::NoUse,
        LandCover::Green,
        LandCover::OpenSpaces,
        LandCover::Water,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LandCover::Urban => "urban",
            LandCover::Road => "road",
            LandCover::Railways => "railways",
            LandCover::Port => "port",
            LandCover::Airports => "airports",
            LandCover::Extraction => "extraction",
            LandCover::NoUse => "no_use",
            LandCover::Green => "green",
            LandCover::OpenSpaces => "open_spaces",
            LandCover::Water => "water",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LandCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LandCover {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LandCover::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Domain(format!("unknown land-cover category `{s}`")))
    }
}

/// Raw land-cover class code to category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandCoverMap {
    classes: BTreeMap<i64, LandCover>,
}

impl LandCoverMap {
    pub fn new(classes: impl IntoIterator<Item = (i64, LandCover)>) -> Self {
        LandCoverMap {
            classes: classes.into_iter().collect(),
        }
    }

    pub fn category(&self, raw: i64) -> Option<LandCover> {
        self.classes.get(&raw).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, LandCover)> + '_ {
        self.classes.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Deserialize)]
struct ClassMapRow {
    raw_class: i64,
    category: String,
}

/// Reads `classmap.csv` (`raw_class,category`).
pub fn load_classmap(path: impl AsRef<Path>) -> Result<LandCoverMap> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(&name, e))?;
    let mut classes = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<ClassMapRow>().enumerate() {
        let row = rec.map_err(|e| csv_error(&name, e))?;
        let cat = row
            .category
            .parse()
            .map_err(|e: Error| Error::schema(&name, i as u64 + 2, 2, e.to_string()))?;
        classes.insert(row.raw_class, cat);
    }
    Ok(LandCoverMap { classes })
}

pub fn write_classmap(map: &LandCoverMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w =
        csv::Writer::from_path(path).map_err(|e| csv_error(&path.display().to_string(), e))?;
    let name = path.display().to_string();
    w.write_record(["raw_class", "category"])
        .map_err(|e| csv_error(&name, e))?;
    for (raw, cat) in map.entries() {
        w.write_record([raw.to_string(), cat.to_string()])
            .map_err(|e| csv_error(&name, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(file: &str, e: csv::Error) -> Error {
    let (line, column) = e.position().map(|p| (p.line(), 0)).unwrap_or((0, 0));
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(file, io),
        csv::ErrorKind::Deserialize { pos, err } => Error::schema(
            file,
            pos.map(|p| p.line()).unwrap_or(line),
            err.field().map(|f| f + 1).unwrap_or(column),
            err.to_string(),
        ),
        other => Error::schema(file, line, column, format!("{other:?}")),
    }
}

/// Share of in-disc cells per category, indexed by [`LandCover::index`].
///
/// Nodata cells are ignored; an empty disc yields all zeros.
pub fn class_fractions<T: Scalar>(
    grid: &RasterGrid<T>,
    map: &LandCoverMap,
    x: T,
    y: T,
    radius: T,
) -> Result<[T; 10]> {
    let mut counts = [0usize; 10];
    let mut total = 0usize;
    for (row, col) in grid.disc_cells(x, y, radius) {
        let Some(v) = grid.get(row, col) else {
            continue;
        };
        let raw = v.round().to_i64().ok_or_else(|| {
            Error::Domain(format!("land-cover value {v} is not an integer class"))
        })?;
        let cat = map.category(raw).ok_or(Error::UnknownClass(raw))?;
        counts[cat.index()] += 1;
        total += 1;
    }
    let mut out = [T::zero(); 10];
    if total > 0 {
        let n = T::of_usize(total);
        for (o, c) in out.iter_mut().zip(counts) {
            *o = T::of_usize(c) / n;
        }
    }
    Ok(out)
}

/// Altitude at the point and averaged over 100 m and 1 km discs.
pub fn dem_profile<T: Scalar>(
    dem: &RasterGrid<T>,
    x: T,
    y: T,
) -> Result<(Option<T>, Option<T>, Option<T>)> {
    let (row, col) = dem.locate(x, y).ok_or(Error::OutOfExtent {
        x: x.as_f64(),
        y: y.as_f64(),
    })?;
    Ok((
        dem.get(row, col),
        radius_mean(dem, x, y, T::of(DEM_NEAR_RADIUS)),
        radius_mean(dem, x, y, T::of(DEM_FAR_RADIUS)),
    ))
}

/// Static terrain descriptors of one location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoProfile<T> {
    pub alt_point: Option<T>,
    pub alt_100m: Option<T>,
    pub alt_1km: Option<T>,
    pub landcover_fractions: [T; 10],
}

impl<T: Scalar> TopoProfile<T> {
    /// 13 feature values: three altitudes then the ten land-cover fractions.
    ///
    /// A missing altitude falls back to the next wider scale; `None` when all
    /// three are missing.
    pub fn feature_values(&self) -> Option<[T; 13]> {
        let far = self.alt_1km?;
        let near = self.alt_100m.unwrap_or(far);
        let point = self.alt_point.unwrap_or(near);
        let mut out = [T::zero(); 13];
        out[0] = point;
        out[1] = near;
        out[2] = far;
        out[3..].copy_from_slice(&self.landcover_fractions);
        Some(out)
    }
}

pub fn topo_profile<T: Scalar>(
    dem: &RasterGrid<T>,
    landcover: &RasterGrid<T>,
    map: &LandCoverMap,
    x: T,
    y: T,
) -> Result<TopoProfile<T>> {
    let (alt_point, alt_100m, alt_1km) = dem_profile(dem, x, y)?;
    let landcover_fractions = class_fractions(landcover, map, x, y, T::of(NEIGHBOURHOOD_RADIUS))?;
    Ok(TopoProfile {
        alt_point,
        alt_100m,
        alt_1km,
        landcover_fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ncols: usize, nrows: usize, cs: f64, cells: Vec<f64>) -> RasterGrid<f64> {
        RasterGrid::new(ncols, nrows, 0.0, 0.0, cs, -9999.0, cells).unwrap()
    }

    #[test]
    fn parses_two_by_two() {
        let g: RasterGrid<f64> = parse_grid(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 2\n3 4\n",
        )
        .unwrap();
        assert_eq!(g.cells(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.get(0, 0), Some(1.0));
    }

    #[test]
    fn cell_count_mismatch() {
        let r = parse_grid::<f64>(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 2 3\n",
        );
        assert!(matches!(
            r,
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn bad_token_reports_line() {
        let r = parse_grid::<f64>(
            "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 x\n",
        );
        assert!(matches!(r, Err(Error::Parse { line: 7, .. })));
    }

    #[test]
    fn nodata_is_missing() {
        let g: RasterGrid<f64> = parse_grid(
            "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -1\n-1 5\n",
        )
        .unwrap();
        assert_eq!(g.get(0, 0), None);
        assert_eq!(g.get(0, 1), Some(5.0));
    }

    #[test]
    fn north_row_first() {
        let g = grid(1, 2, 10.0, vec![7.0, 3.0]);
        assert_eq!(g.cell_center(0, 0), (5.0, 15.0));
        assert_eq!(g.locate(5.0, 18.0), Some((0, 0)));
        assert_eq!(g.locate(5.0, 2.0), Some((1, 0)));
    }

    #[test]
    fn uniform_mean() {
        let g = grid(5, 5, 100.0, vec![4.5; 25]);
        assert_eq!(radius_mean(&g, 250.0, 250.0, 120.0), Some(4.5));
        assert_eq!(radius_mean(&g, 0.0, 0.0, 1000.0), Some(4.5));
    }

    #[test]
    fn nine_cell_disc() {
        let mut cells = vec![0.0; 25];
        cells[12] = 9.0;
        let g = grid(5, 5, 100.0, cells);
        // center cell (2,2) at (250,250); diagonals at ~141.4 m
        assert_eq!(g.disc_cells(250.0, 250.0, 150.0).len(), 9);
        assert_eq!(radius_mean(&g, 250.0, 250.0, 150.0), Some(1.0));
    }

    #[test]
    fn far_point_is_missing() {
        let g = grid(2, 2, 10.0, vec![1.0; 4]);
        assert_eq!(radius_mean(&g, 1000.0, 1000.0, 5.0), None);
    }

    #[test]
    fn fractions() {
        let map = LandCoverMap::new([
            (1, LandCover::Urban),
            (2, LandCover::Green),
            (3, LandCover::Water),
        ]);
        let g = grid(2, 2, 10.0, vec![1.0; 4]);
        let f = class_fractions(&g, &map, 10.0, 10.0, 50.0).unwrap();
        assert_eq!(f[LandCover::Urban.index()], 1.0);
        assert_eq!(f.iter().sum::<f64>(), 1.0);

        let g = grid(2, 2, 10.0, vec![2.0, 2.0, 3.0, 2.0]);
        let f = class_fractions(&g, &map, 10.0, 10.0, 50.0).unwrap();
        assert_eq!(f[LandCover::Green.index()], 0.75);
        assert_eq!(f[LandCover::Water.index()], 0.25);

        let g = grid(2, 2, 10.0, vec![2.0, 99.0, 3.0, 2.0]);
        assert!(matches!(
            class_fractions(&g, &map, 10.0, 10.0, 50.0),
            Err(Error::UnknownClass(99))
        ));

        let f = class_fractions(&g, &map, 1e6, 1e6, 5.0).unwrap();
        assert_eq!(f, [0.0; 10]);
    }

    #[test]
    fn constant_dem() {
        let g = grid(30, 30, 50.0, vec![120.0; 900]);
        let p = dem_profile(&g, 700.0, 760.0).unwrap();
        assert_eq!(p, (Some(120.0), Some(120.0), Some(120.0)));
    }

    #[test]
    fn dem_point_in_nodata() {
        let mut cells = vec![80.0; 100];
        cells[5 * 10 + 5] = -9999.0;
        let g = grid(10, 10, 50.0, cells);
        let (x, y) = g.cell_center(5, 5);
        let p = dem_profile(&g, x, y).unwrap();
        assert_eq!(p.0, None);
        assert_eq!(p.1, Some(80.0));
        assert_eq!(p.2, Some(80.0));
    }

    #[test]
    fn dem_out_of_extent() {
        let g = grid(2, 2, 10.0, vec![1.0; 4]);
        assert!(matches!(
            dem_profile(&g, -1.0, 5.0),
            Err(Error::OutOfExtent { .. })
        ));
        assert!(dem_profile(&g, 20.0, 20.0).is_ok());
    }

    #[test]
    fn f32_grid() {
        let g = RasterGrid::<f32>::new(3, 3, 0.0, 0.0, 1.0, -1.0, vec![2.0; 9]).unwrap();
        assert_eq!(radius_mean(&g, 1.5f32, 1.5, 1.0), Some(2.0));
    }

    #[test]
    fn topo_fallbacks() {
        let p = TopoProfile {
            alt_point: None,
            alt_100m: Some(3.0),
            alt_1km: Some(5.0),
            landcover_fractions: [0.1; 10],
        };
        let v = p.feature_values().unwrap();
        assert_eq!(&v[..3], &[3.0, 3.0, 5.0]);
        let p = TopoProfile { alt_1km: None, ..p };
        assert!(p.feature_values().is_none());
    }
}
