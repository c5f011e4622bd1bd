//! 2.5D elevation maps: container, inpainting, filtering, and per-cell
//! steppability classification.
//!
//! Maps are immutable after construction; every operation returns a new map
//! or layer. Missing data is marked with `f64::NAN` in the height layer.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

/// Layer name for the binary steppability classification.
pub const LAYER_STEPPABILITY: &str = "steppability";
/// Layer name for the smoothed torso height reference.
pub const LAYER_TORSO_REFERENCE: &str = "torso_reference";

/// Classification thresholds: standard deviation in normal direction and
/// minimum z-component of the surface normal.
pub const STEPPABILITY_SIGMA_MAX: f64 = 0.02;
pub const STEPPABILITY_NZ_MIN: f64 = 0.82;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("empty map: all cells are missing")]
    EmptyMap,
    #[error("median kernel must be odd, got {0}")]
    EvenKernel(usize),
    #[error("map parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// 2.5D height grid with optional named scalar layers sharing the geometry.
///
/// `heights[row * cols + col]` holds the terrain height in meters; the world
/// position of cell `(row, col)` center is
/// `(origin.0 + col * resolution, origin.1 + row * resolution)`.
#[derive(Clone, Debug)]
pub struct ElevationMap {
    pub resolution: f64,
    /// World (x, y) of the center of cell (0, 0).
    pub origin: (f64, f64),
    pub rows: usize,
    pub cols: usize,
    heights: Vec<f64>,
    layers: BTreeMap<String, Vec<f64>>,
}

impl ElevationMap {
    pub fn new(resolution: f64, origin: (f64, f64), rows: usize, cols: usize) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            resolution,
            origin,
            rows,
            cols,
            heights: vec![f64::NAN; rows * cols],
            layers: BTreeMap::new(),
        }
    }

    pub fn from_heights(
        resolution: f64,
        origin: (f64, f64),
        rows: usize,
        cols: usize,
        heights: Vec<f64>,
    ) -> Self {
        assert_eq!(heights.len(), rows * cols);
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            resolution,
            origin,
            rows,
            cols,
            heights,
            layers: BTreeMap::new(),
        }
    }

    /// Build a map by evaluating `f(x_world, y_world)` at every cell center.
    pub fn from_fn(
        resolution: f64,
        origin: (f64, f64),
        rows: usize,
        cols: usize,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut m = Self::new(resolution, origin, rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let (x, y) = m.cell_center(r, c);
                m.heights[r * cols + c] = f(x, y);
            }
        }
        m
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    #[inline]
    pub fn height(&self, row: usize, col: usize) -> f64 {
        self.heights[self.idx(row, col)]
    }

    #[inline]
    pub fn set_height(&mut self, row: usize, col: usize, h: f64) {
        let i = self.idx(row, col);
        self.heights[i] = h;
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    #[inline]
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.height(row, col).is_nan()
    }

    /// World (x, y) of a cell center.
    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + col as f64 * self.resolution,
            self.origin.1 + row as f64 * self.resolution,
        )
    }

    /// Cell containing the world point, or `None` outside the map.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin.0) / self.resolution).round();
        let r = ((y - self.origin.1) / self.resolution).round();
        if r < 0.0 || c < 0.0 || r >= self.rows as f64 || c >= self.cols as f64 {
            None
        } else {
            Some((r as usize, c as usize))
        }
    }

    pub fn layer(&self, name: &str) -> Option<&[f64]> {
        self.layers.get(name).map(|v| v.as_slice())
    }

    pub fn set_layer(&mut self, name: &str, data: Vec<f64>) {
        assert_eq!(data.len(), self.rows * self.cols);
        self.layers.insert(name.to_string(), data);
    }

    pub fn layer_names(&self) -> impl Iterator<Item = &str> {
        self.layers.keys().map(|s| s.as_str())
    }

    /// Bilinear interpolation of the height layer at a world point; clamps to
    /// the map border outside the extent.
    pub fn interpolate_height(&self, x: f64, y: f64) -> f64 {
        interpolate(self, &self.heights, x, y)
    }

    /// Bilinear interpolation of a named layer at a world point (clamped).
    pub fn interpolate_layer(&self, name: &str, x: f64, y: f64) -> Option<f64> {
        self.layers.get(name).map(|l| interpolate(self, l, x, y))
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().copied().filter(|h| !h.is_nan()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_height(&self) -> f64 {
        self.heights
            .iter()
            .copied()
            .filter(|h| !h.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Bilinear interpolation of an arbitrary scalar field sharing the map
/// geometry, clamped at the borders.
pub fn interpolate_field(map: &ElevationMap, data: &[f64], x: f64, y: f64) -> f64 {
    interpolate(map, data, x, y)
}

fn interpolate(map: &ElevationMap, data: &[f64], x: f64, y: f64) -> f64 {
    let fx = ((x - map.origin.0) / map.resolution).clamp(0.0, (map.cols - 1) as f64);
    let fy = ((y - map.origin.1) / map.resolution).clamp(0.0, (map.rows - 1) as f64);
    let c0 = fx.floor() as usize;
    let r0 = fy.floor() as usize;
    let c1 = (c0 + 1).min(map.cols - 1);
    let r1 = (r0 + 1).min(map.rows - 1);
    let tx = fx - c0 as f64;
    let ty = fy - r0 as f64;
    let v00 = data[r0 * map.cols + c0];
    let v01 = data[r0 * map.cols + c1];
    let v10 = data[r1 * map.cols + c0];
    let v11 = data[r1 * map.cols + c1];
    (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11)
}

/// First and second moments of a set of cell positions.
///
/// `covariance = S - mean mean^T` with `S` the (1/N-scaled) second moment;
/// the surface normal is the eigenvector of the smallest eigenvalue, flipped
/// to point upward.
#[derive(Clone, Debug)]
pub struct CellStats {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub normal: Vector3<f64>,
    pub sigma_n: f64,
    pub count: usize,
}

/// Fill missing cells of each 4-connected missing region with the minimum
/// height among valid cells bordering that region. Valid cells are unchanged.
///
/// Regions touching the map edge are filled from the border cells that do
/// exist on the remaining sides.
pub fn inpaint(map: &ElevationMap) -> Result<ElevationMap, MapError> {
    if map.heights.iter().all(|h| h.is_nan()) {
        return Err(MapError::EmptyMap);
    }
    let mut out = map.clone();
    let (rows, cols) = (map.rows, map.cols);
    let mut visited = vec![false; rows * cols];
    for start in 0..rows * cols {
        if !map.heights[start].is_nan() || visited[start] {
            continue;
        }
        // flood fill one missing region, collecting the bordering valid minimum
        let mut region = Vec::new();
        let mut stack = vec![start];
        visited[start] = true;
        let mut border_min = f64::INFINITY;
        while let Some(i) = stack.pop() {
            region.push(i);
            let (r, c) = (i / cols, i % cols);
            for (nr, nc) in neighbors4(r, c, rows, cols) {
                let j = nr * cols + nc;
                if map.heights[j].is_nan() {
                    if !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                } else {
                    border_min = border_min.min(map.heights[j]);
                }
            }
        }
        // A fully missing map was rejected above, but a missing region can
        // still span the whole map minus other missing regions; guard anyway.
        if border_min.is_finite() {
            for i in region {
                out.heights[i] = border_min;
            }
        }
    }
    // Disconnected missing regions bordered only by other missing regions
    // cannot occur with 4-connected flood fill (they would be one region),
    // so the result has no NaN left.
    debug_assert!(out.heights.iter().all(|h| !h.is_nan()));
    Ok(out)
}

pub(crate) fn neighbors4(
    r: usize,
    c: usize,
    rows: usize,
    cols: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let mut v = [(0usize, 0usize); 4];
    let mut n = 0;
    if r > 0 {
        v[n] = (r - 1, c);
        n += 1;
    }
    if r + 1 < rows {
        v[n] = (r + 1, c);
        n += 1;
    }
    if c > 0 {
        v[n] = (r, c - 1);
        n += 1;
    }
    if c + 1 < cols {
        v[n] = (r, c + 1);
        n += 1;
    }
    v.into_iter().take(n)
}

/// Median filter with a `kernel x kernel` window truncated at map edges.
///
/// The kernel must be odd. With an even number of samples (edge windows),
/// the median is the average of the two middle values.
pub fn median_filter(map: &ElevationMap, kernel: usize) -> Result<ElevationMap, MapError> {
    if kernel % 2 == 0 {
        return Err(MapError::EvenKernel(kernel));
    }
    let half = kernel / 2;
    let mut out = map.clone();
    let mut window = Vec::with_capacity(kernel * kernel);
    for r in 0..map.rows {
        for c in 0..map.cols {
            window.clear();
            let r0 = r.saturating_sub(half);
            let r1 = (r + half).min(map.rows - 1);
            let c0 = c.saturating_sub(half);
            let c1 = (c + half).min(map.cols - 1);
            for rr in r0..=r1 {
                for cc in c0..=c1 {
                    window.push(map.height(rr, cc));
                }
            }
            window.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = window.len();
            let med = if n % 2 == 1 {
                window[n / 2]
            } else {
                0.5 * (window[n / 2 - 1] + window[n / 2])
            };
            out.set_height(r, c, med);
        }
    }
    Ok(out)
}

/// Moments and surface normal over the `(2 radius + 1)^2` neighborhood of a
/// cell, truncated at map edges.
pub fn local_plane_stats(map: &ElevationMap, cell: (usize, usize), radius: usize) -> CellStats {
    let (r, c) = cell;
    let r0 = r.saturating_sub(radius);
    let r1 = (r + radius).min(map.rows - 1);
    let c0 = c.saturating_sub(radius);
    let c1 = (c + radius).min(map.cols - 1);
    let cells = ((r0..=r1).flat_map(|rr| (c0..=c1).map(move |cc| (rr, cc)))).collect::<Vec<_>>();
    cell_set_stats(map, &cells)
}

/// Moments and surface normal over an arbitrary set of cells.
///
/// Coordinates are shifted by the first cell before accumulating moments so
/// the one-pass covariance stays accurate far from the world origin.
pub fn cell_set_stats(map: &ElevationMap, cells: &[(usize, usize)]) -> CellStats {
    assert!(!cells.is_empty());
    let (sr, sc) = cells[0];
    let (sx, sy) = map.cell_center(sr, sc);
    let shift = Vector3::new(sx, sy, map.height(sr, sc));
    let n = cells.len() as f64;
    let mut mean = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for &(r, c) in cells {
        let (x, y) = map.cell_center(r, c);
        let p = Vector3::new(x, y, map.height(r, c)) - shift;
        mean += p;
        second += p * p.transpose();
    }
    mean /= n;
    second /= n;
    let covariance = second - mean * mean.transpose();
    let eig = SymmetricEigen::new(covariance);
    let mut min_i = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
            min_i = i;
        }
    }
    let mut normal = eig.eigenvectors.column(min_i).into_owned();
    // orient upward; tie-break on the first nonzero component
    if normal.z < 0.0 {
        normal = -normal;
    } else if normal.z == 0.0 {
        let lead = if normal.x != 0.0 { normal.x } else { normal.y };
        if lead < 0.0 {
            normal = -normal;
        }
    }
    let sigma_n = eig.eigenvalues[min_i].max(0.0).sqrt();
    CellStats {
        mean: mean + shift,
        covariance,
        normal,
        sigma_n,
        count: cells.len(),
    }
}

/// Binary steppability classification over the 3x3 neighborhood of each cell.
///
/// A cell is steppable when the standard deviation in normal direction is at
/// most 2 cm and the surface normal z-component is at least 0.82 (35 deg
/// inclination). The result is returned as a new map with a `steppability`
/// layer attached.
pub fn classify_steppability(map: &ElevationMap) -> ElevationMap {
    let mut layer = vec![0.0; map.rows * map.cols];
    for r in 0..map.rows {
        for c in 0..map.cols {
            let stats = local_plane_stats(map, (r, c), 1);
            let ok = stats.sigma_n <= STEPPABILITY_SIGMA_MAX
                && stats.normal.z >= STEPPABILITY_NZ_MIN;
            layer[r * map.cols + c] = if ok { 1.0 } else { 0.0 };
        }
    }
    let mut out = map.clone();
    out.set_layer(LAYER_STEPPABILITY, layer);
    out
}

// --- text format -----------------------------------------------------------
//
// Line 1: `emap 1`
// Line 2: `resolution <float>`
// Line 3: `origin <x> <y>`
// Line 4: `size <rows> <cols>`
// Then `rows` lines of `cols` space-separated heights; `nan` marks missing.
// The writer emits 9 significant digits.

pub fn write_map<W: Write>(map: &ElevationMap, w: &mut W) -> Result<(), MapError> {
    writeln!(w, "emap 1")?;
    writeln!(w, "resolution {}", fmt_sig9(map.resolution))?;
    writeln!(w, "origin {} {}", fmt_sig9(map.origin.0), fmt_sig9(map.origin.1))?;
    writeln!(w, "size {} {}", map.rows, map.cols)?;
    let mut line = String::new();
    for r in 0..map.rows {
        line.clear();
        for c in 0..map.cols {
            if c > 0 {
                line.push(' ');
            }
            let h = map.height(r, c);
            if h.is_nan() {
                line.push_str("nan");
            } else {
                line.push_str(&fmt_sig9(h));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Format with 9 significant digits.
fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn read_map<R: BufRead>(r: &mut R) -> Result<ElevationMap, MapError> {
    let mut lines = r.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String), MapError> {
        lines
            .next()
            .ok_or_else(|| MapError::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {expect}"),
            })
            .and_then(|(i, l)| Ok((i + 1, l?)))
    };
    let (ln, magic) = next("header")?;
    if magic.trim() != "emap 1" {
        return Err(MapError::Parse {
            line: ln,
            message: format!("bad magic {magic:?}, expected \"emap 1\""),
        });
    }
    let (ln, res_line) = next("resolution")?;
    let resolution = parse_fields(&res_line, "resolution", 1, ln)?[0];
    let (ln, origin_line) = next("origin")?;
    let origin = parse_fields(&origin_line, "origin", 2, ln)?;
    let (ln, size_line) = next("size")?;
    let size = parse_fields(&size_line, "size", 2, ln)?;
    let (rows, cols) = (size[0] as usize, size[1] as usize);
    let mut heights = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (ln, row_line) = next("height row")?;
        let mut count = 0;
        for tok in row_line.split_whitespace() {
            let v = if tok == "nan" {
                f64::NAN
            } else {
                tok.parse::<f64>().map_err(|e| MapError::Parse {
                    line: ln,
                    message: format!("bad height {tok:?}: {e}"),
                })?
            };
            heights.push(v);
            count += 1;
        }
        if count != cols {
            return Err(MapError::Parse {
                line: ln,
                message: format!("expected {cols} heights, got {count}"),
            });
        }
    }
    Ok(ElevationMap::from_heights(
        resolution,
        (origin[0], origin[1]),
        rows,
        cols,
        heights,
    ))
}

fn parse_fields(line: &str, key: &str, n: usize, ln: usize) -> Result<Vec<f64>, MapError> {
    let mut it = line.split_whitespace();
    let head = it.next().unwrap_or("");
    if head != key {
        return Err(MapError::Parse {
            line: ln,
            message: format!("expected {key:?}, got {head:?}"),
        });
    }
    let vals: Result<Vec<f64>, _> = it.map(|t| t.parse::<f64>()).collect();
    let vals = vals.map_err(|e| MapError::Parse {
        line: ln,
        message: format!("bad number: {e}"),
    })?;
    if vals.len() != n {
        return Err(MapError::Parse {
            line: ln,
            message: format!("expected {n} values for {key}, got {}", vals.len()),
        });
    }
    Ok(vals)
}

pub fn write_map_to_path(map: &ElevationMap, path: &std::path::Path) -> Result<(), MapError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_map(map, &mut f)
}

pub fn read_map_from_path(path: &std::path::Path) -> Result<ElevationMap, MapError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_map(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat(rows: usize, cols: usize, z: f64) -> ElevationMap {
        ElevationMap::from_heights(0.04, (0.0, 0.0), rows, cols, vec![z; rows * cols])
    }

    #[test]
    fn inpaint_fills_center_with_border_minimum() {
        let mut m = flat(3, 3, 0.0);
        let hs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let mut k = 0;
        for r in 0..3 {
            for c in 0..3 {
                m.set_height(r, c, hs[k]);
                k += 1;
            }
        }
        m.set_height(1, 1, f64::NAN);
        let out = inpaint(&m).unwrap();
        // border of the center region under 4-connectivity: cells (0,1),(1,0),(1,2),(2,1)
        assert_relative_eq!(out.height(1, 1), 0.2);
        assert_relative_eq!(out.height(0, 0), 0.1);
    }

    #[test]
    fn inpaint_is_identity_without_missing_cells() {
        let m = flat(4, 4, 0.3);
        let out = inpaint(&m).unwrap();
        assert_eq!(out.heights(), m.heights());
    }

    #[test]
    fn inpaint_l_shaped_region_takes_region_minimum() {
        // 5x5 map, heights 0.5 everywhere except specific border values next
        // to an L-shaped missing region.
        let mut m = flat(5, 5, 0.5);
        for &(r, c) in &[(1usize, 1usize), (2, 1), (3, 1), (3, 2), (3, 3)] {
            m.set_height(r, c, f64::NAN);
        }
        m.set_height(0, 1, 0.3);
        m.set_height(4, 3, 0.7);
        let out = inpaint(&m).unwrap();
        for &(r, c) in &[(1usize, 1usize), (2, 1), (3, 1), (3, 2), (3, 3)] {
            assert_relative_eq!(out.height(r, c), 0.3);
        }
    }

    #[test]
    fn inpaint_region_touching_edge_uses_available_border() {
        let mut m = flat(3, 3, 0.4);
        m.set_height(0, 0, f64::NAN);
        m.set_height(0, 1, f64::NAN);
        let out = inpaint(&m).unwrap();
        assert_relative_eq!(out.height(0, 0), 0.4);
        assert_relative_eq!(out.height(0, 1), 0.4);
    }

    #[test]
    fn inpaint_rejects_all_missing_map() {
        let m = ElevationMap::new(0.04, (0.0, 0.0), 2, 2);
        assert!(matches!(inpaint(&m), Err(MapError::EmptyMap)));
    }

    #[test]
    fn inpaint_is_idempotent() {
        let mut m = flat(6, 6, 0.2);
        for &(r, c) in &[(1usize, 1usize), (1, 2), (4, 4), (0, 5)] {
            m.set_height(r, c, f64::NAN);
        }
        m.set_height(2, 2, 0.05);
        let once = inpaint(&m).unwrap();
        let twice = inpaint(&once).unwrap();
        assert_eq!(once.heights(), twice.heights());
    }

    #[test]
    fn median_filter_keeps_constant_map() {
        let m = flat(5, 5, 0.2);
        let out = median_filter(&m, 3).unwrap();
        for h in out.heights() {
            assert_relative_eq!(*h, 0.2);
        }
    }

    #[test]
    fn median_filter_kernel_one_is_identity() {
        let mut m = flat(4, 4, 0.0);
        m.set_height(2, 2, 0.9);
        let out = median_filter(&m, 1).unwrap();
        assert_eq!(out.heights(), m.heights());
    }

    #[test]
    fn median_filter_removes_single_spike() {
        let mut m = flat(3, 3, 0.0);
        m.set_height(1, 1, 1.0);
        let out = median_filter(&m, 3).unwrap();
        // sorted 9 values {0 x8, 1}; the 5th is 0
        assert_relative_eq!(out.height(1, 1), 0.0);
    }

    #[test]
    fn median_filter_rejects_even_kernel() {
        let m = flat(3, 3, 0.0);
        assert!(matches!(median_filter(&m, 2), Err(MapError::EvenKernel(2))));
    }

    #[test]
    fn plane_stats_flat_patch() {
        let m = flat(5, 5, 0.5);
        let s = local_plane_stats(&m, (2, 2), 1);
        assert_eq!(s.count, 9);
        assert!(s.sigma_n.abs() < 1e-12);
        assert_relative_eq!(s.normal.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn plane_stats_inclined_plane_normal() {
        // z = x tan(35 deg): n_z = cos(35 deg)
        let ang = 35f64.to_radians();
        let m = ElevationMap::from_fn(0.04, (0.0, 0.0), 7, 7, |x, _| x * ang.tan());
        let s = local_plane_stats(&m, (3, 3), 1);
        assert_relative_eq!(s.normal.z, ang.cos(), epsilon = 1e-9);
        assert!(s.sigma_n < 1e-9);
    }

    #[test]
    fn plane_stats_match_eigendecomposition_oracle() {
        // one raised cell among 9 flat ones; oracle: dense two-pass covariance
        // + explicit characteristic polynomial eigenvalues.
        let mut m = flat(3, 3, 0.0);
        m.set_height(1, 1, 0.06);
        let s = local_plane_stats(&m, (1, 1), 1);

        // two-pass covariance oracle
        let mut pts = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                let (x, y) = m.cell_center(r, c);
                pts.push(Vector3::new(x, y, m.height(r, c)));
            }
        }
        let mean: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / 9.0;
        let mut cov = Matrix3::zeros();
        for p in &pts {
            let d = p - mean;
            cov += d * d.transpose();
        }
        cov /= 9.0;
        assert_relative_eq!((s.covariance - cov).norm(), 0.0, epsilon = 1e-14);

        // smallest eigenvalue via the symmetric eigen solve of the oracle matrix
        let eig = SymmetricEigen::new(cov);
        let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(s.sigma_n, min_ev.max(0.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn covariance_matches_two_pass_oracle_far_from_origin() {
        let m = ElevationMap::from_fn(0.04, (321.0, -154.0), 5, 5, |x, y| {
            0.3 * (3.0 * x).sin() + 0.1 * y
        });
        let s = local_plane_stats(&m, (2, 2), 2);
        let mut pts = Vec::new();
        for r in 0..5 {
            for c in 0..5 {
                let (x, y) = m.cell_center(r, c);
                pts.push(Vector3::new(x, y, m.height(r, c)));
            }
        }
        let mean: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / 25.0;
        let mut cov = Matrix3::zeros();
        for p in &pts {
            let d = p - mean;
            cov += d * d.transpose();
        }
        cov /= 25.0;
        let scale = cov.norm();
        assert!((s.covariance - cov).norm() <= 1e-12 * scale);
    }

    #[test]
    fn steppability_flat_and_slopes() {
        let flat_map = classify_steppability(&flat(6, 6, 0.1));
        assert!(flat_map
            .layer(LAYER_STEPPABILITY)
            .unwrap()
            .iter()
            .all(|&v| v == 1.0));

        let steep = ElevationMap::from_fn(0.04, (0.0, 0.0), 8, 8, |x, _| x); // 45 deg
        let steep = classify_steppability(&steep);
        let l = steep.layer(LAYER_STEPPABILITY).unwrap();
        for r in 1..7 {
            for c in 1..7 {
                assert_eq!(l[r * 8 + c], 0.0, "interior 45 deg cell must be 0");
            }
        }

        let ang = 30f64.to_radians();
        let gentle = ElevationMap::from_fn(0.04, (0.0, 0.0), 8, 8, |x, _| x * ang.tan());
        let gentle = classify_steppability(&gentle);
        let l = gentle.layer(LAYER_STEPPABILITY).unwrap();
        for r in 1..7 {
            for c in 1..7 {
                assert_eq!(l[r * 8 + c], 1.0, "interior 30 deg cell must be 1");
            }
        }
    }

    #[test]
    fn steppability_depends_only_on_local_neighborhood() {
        let mut m = flat(7, 7, 0.0);
        m.set_height(1, 1, 0.4);
        let a = classify_steppability(&m);
        // editing a far-away cell must not change classification at (5,5)
        let mut m2 = m.clone();
        m2.set_height(1, 2, 0.8);
        let b = classify_steppability(&m2);
        let (la, lb) = (a.layer(LAYER_STEPPABILITY).unwrap(), b.layer(LAYER_STEPPABILITY).unwrap());
        assert_eq!(la[5 * 7 + 5], lb[5 * 7 + 5]);
        assert_eq!(la[4 * 7 + 4], lb[4 * 7 + 4]);
    }

    #[test]
    fn map_text_round_trip() {
        let mut m = ElevationMap::from_fn(0.04, (1.5, -2.25), 4, 5, |x, y| (x * y).sin() * 0.2);
        m.set_height(2, 3, f64::NAN);
        let mut buf = Vec::new();
        write_map(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("emap 1\n"));
        let back = read_map(&mut std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.rows, 4);
        assert_eq!(back.cols, 5);
        assert!(back.is_missing(2, 3));
        for r in 0..4 {
            for c in 0..5 {
                if (r, c) != (2, 3) {
                    assert_relative_eq!(back.height(r, c), m.height(r, c), epsilon = 1e-8);
                }
            }
        }
    }
}
