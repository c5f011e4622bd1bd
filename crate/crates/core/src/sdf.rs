//! Signed distance fields over 2.5D elevation maps.
//!
//! Everything at or below the (preprocessed) terrain height counts as
//! obstacle. Distances use the squared metric between a cell center and the
//! *border* of another cell, `d(x, x') = (|x - x'| - r/2)^2` for `x != x'`
//! and `0` otherwise, so the zero level sits between occupied and free cells
//! and the field has no jump across obstacle borders. The vertical direction
//! is resolved in closed form from the height layer; the horizontal
//! directions use per-axis lower-envelope transforms of shifted parabolas.
//! The negative part is the distance to free space computed with the same
//! metric on the complement occupancy; exactly one of the two terms is
//! nonzero per voxel.

use rayon::prelude::*;
use thiserror::Error;

use crate::map::ElevationMap;

/// Vertical margin added to non-steppable cells before building the field.
pub const OBSTACLE_VERTICAL_MARGIN: f64 = 0.02;
/// Margin below the lowest terrain point included in the voxel range.
pub const SDF_BOTTOM_MARGIN: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SdfError {
    #[error("bounding box does not overlap the map extent")]
    BoxOutsideMap,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("sdf parse error: {0}")]
    Parse(String),
}

/// Axis-aligned world-space box.
#[derive(Clone, Copy, Debug)]
pub struct WorldBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl WorldBox {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            min: [
                self.min[0] - margin,
                self.min[1] - margin,
                self.min[2] - margin,
            ],
            max: [
                self.max[0] + margin,
                self.max[1] + margin,
                self.max[2] + margin,
            ],
        }
    }
}

/// Elevation layer prepared for distance computation.
///
/// Non-steppable cells are raised by the vertical margin and dilated by one
/// cell, compensating the tendency of mapped edges to be underestimated.
#[derive(Clone, Debug)]
pub struct ObstacleGrid {
    pub resolution: f64,
    pub origin: (f64, f64),
    pub rows: usize,
    pub cols: usize,
    pub heights: Vec<f64>,
    pub steppability: Vec<f64>,
}

/// Raise non-steppable cells by 2 cm, then dilate the raised heights into
/// each cell's 8-neighborhood (non-steppable sources only).
pub fn preprocess_obstacles(map: &ElevationMap, steppability: &[f64]) -> ObstacleGrid {
    let (rows, cols) = (map.rows, map.cols);
    assert_eq!(steppability.len(), rows * cols);
    let mut raised = map.heights().to_vec();
    for i in 0..rows * cols {
        if steppability[i] == 0.0 {
            raised[i] += OBSTACLE_VERTICAL_MARGIN;
        }
    }
    let mut heights = raised.clone();
    for r in 0..rows {
        for c in 0..cols {
            let mut h = raised[r * cols + c];
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    let j = nr as usize * cols + nc as usize;
                    if steppability[j] == 0.0 {
                        h = h.max(raised[j]);
                    }
                }
            }
            heights[r * cols + c] = h;
        }
    }
    ObstacleGrid {
        resolution: map.resolution,
        origin: map.origin,
        rows,
        cols,
        heights,
        steppability: steppability.to_vec(),
    }
}

/// Dense voxel field storing distance value and gradient per voxel.
///
/// Layout is x-fastest: `idx = ix + nx * (iy + ny * iz)`; x follows map
/// columns, y follows map rows.
#[derive(Clone, Debug)]
pub struct SignedDistanceField {
    /// World position of voxel (0, 0, 0) center.
    pub origin: [f64; 3],
    pub resolution: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 3]>,
}

/// Interpolated field sample.
#[derive(Clone, Copy, Debug)]
pub struct SdfSample {
    pub value: f64,
    pub gradient: [f64; 3],
    /// Set when the query point was clamped to the grid.
    pub out_of_bounds: bool,
}

pub fn build_sdf(grid: &ObstacleGrid, bbox: &WorldBox) -> Result<SignedDistanceField, SdfError> {
    let res = grid.resolution;
    // clip the horizontal box to the map and snap to cell centers
    let to_col = |x: f64| ((x - grid.origin.0) / res).round() as i64;
    let to_row = |y: f64| ((y - grid.origin.1) / res).round() as i64;
    let c0 = to_col(bbox.min[0]).max(0);
    let c1 = to_col(bbox.max[0]).min(grid.cols as i64 - 1);
    let r0 = to_row(bbox.min[1]).max(0);
    let r1 = to_row(bbox.max[1]).min(grid.rows as i64 - 1);
    if c0 > c1 || r0 > r1 {
        return Err(SdfError::BoxOutsideMap);
    }
    let (c0, c1, r0, r1) = (c0 as usize, c1 as usize, r0 as usize, r1 as usize);
    let min_h = grid
        .heights
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let z_lo = bbox.min[2].min(min_h - SDF_BOTTOM_MARGIN);
    let z_hi = bbox.max[2].max(z_lo);
    let nz = ((z_hi - z_lo) / res).floor() as usize + 1;
    let nx = c1 - c0 + 1;
    let ny = r1 - r0 + 1;

    let layer_len = nx * ny;
    let mut values = vec![0.0; layer_len * nz];
    values
        .par_chunks_mut(layer_len)
        .enumerate()
        .for_each(|(iz, layer)| {
            let z = z_lo + iz as f64 * res;
            let d_obs = layer_distance(grid, z, (r0, c0), (ny, nx), false);
            let d_free = layer_distance(grid, z, (r0, c0), (ny, nx), true);
            for i in 0..layer_len {
                layer[i] = d_obs[i].sqrt() - d_free[i].sqrt();
            }
        });

    let mut gradients = vec![[0.0; 3]; layer_len * nz];
    let idx = |ix: usize, iy: usize, iz: usize| ix + nx * (iy + ny * iz);
    let central = |lo: f64, hi: f64, span: f64| if span > 0.0 { (hi - lo) / span } else { 0.0 };
    gradients
        .par_chunks_mut(layer_len)
        .enumerate()
        .for_each(|(iz, gl)| {
            for iy in 0..ny {
                for ix in 0..nx {
                    let (xm, xp) = (ix.saturating_sub(1), (ix + 1).min(nx - 1));
                    let (ym, yp) = (iy.saturating_sub(1), (iy + 1).min(ny - 1));
                    let (zm, zp) = (iz.saturating_sub(1), (iz + 1).min(nz - 1));
                    gl[ix + nx * iy] = [
                        central(values[idx(xm, iy, iz)], values[idx(xp, iy, iz)], (xp - xm) as f64 * res),
                        central(values[idx(ix, ym, iz)], values[idx(ix, yp, iz)], (yp - ym) as f64 * res),
                        central(values[idx(ix, iy, zm)], values[idx(ix, iy, zp)], (zp - zm) as f64 * res),
                    ];
                }
            }
        });

    Ok(SignedDistanceField {
        origin: [
            grid.origin.0 + c0 as f64 * res,
            grid.origin.1 + r0 as f64 * res,
            z_lo,
        ],
        resolution: res,
        dims: [nx, ny, nz],
        values,
        gradients,
    })
}

/// Squared distances of one z-layer to the obstacle set (or to free space on
/// the complement), over the query window `(rows0, cols0) + (ny, nx)`.
fn layer_distance(
    grid: &ObstacleGrid,
    z: f64,
    start: (usize, usize),
    window: (usize, usize),
    complement: bool,
) -> Vec<f64> {
    let res = grid.resolution;
    let (r0, c0) = start;
    let (ny, nx) = window;
    let (rows, cols) = (grid.rows, grid.cols);
    // 1D vertical transform per column, in closed form from the height层
    let fz = |i: usize| -> f64 {
        let h = grid.heights[i];
        if complement {
            // distance to free space: zero at or above the surface
            if z <= h {
                (z - h) * (z - h)
            } else {
                0.0
            }
        } else if z >= h {
            (z - h) * (z - h)
        } else {
            0.0
        }
    };
    // pass 1: along x (columns) for every map row, evaluated at query columns
    let mut g = vec![0.0; rows * nx];
    let mut f_row = vec![0.0; cols];
    let mut out_row = vec![0.0; nx];
    let query_cols: Vec<f64> = (0..nx).map(|i| (c0 + i) as f64 * res).collect();
    for r in 0..rows {
        for c in 0..cols {
            f_row[c] = fz(r * cols + c);
        }
        bordered_transform_1d(&f_row, res, c0, &query_cols, &mut out_row);
        g[r * nx..(r + 1) * nx].copy_from_slice(&out_row);
    }
    // pass 2: along y (rows) for every query column, evaluated at query rows
    let mut out = vec![0.0; ny * nx];
    let mut f_col = vec![0.0; rows];
    let mut out_col = vec![0.0; ny];
    let query_rows: Vec<f64> = (0..ny).map(|i| (r0 + i) as f64 * res).collect();
    for qx in 0..nx {
        for r in 0..rows {
            f_col[r] = g[r * nx + qx];
        }
        bordered_transform_1d(&f_col, res, r0, &query_rows, &mut out_col);
        for qy in 0..ny {
            out[qy * nx + qx] = out_col[qy];
        }
    }
    out
}

/// 1D transform `T[f](u) = min_i [ d(u, u_i) + f_i ]` with the half-cell
/// border metric, exact at grid points.
///
/// Split into the identity term plus two ordinary parabola envelopes with
/// centers shifted by +-r/2; candidates picked up on the wrong side of an
/// envelope are dominated by the matching true candidate, so the pointwise
/// minimum of the three terms is exact.
fn bordered_transform_1d(
    f: &[f64],
    res: f64,
    query_offset: usize,
    query_pos: &[f64],
    out: &mut [f64],
) {
    let n = f.len();
    debug_assert_eq!(query_pos.len(), out.len());
    let mut env = ParabolaEnvelope::with_capacity(n);
    // centers shifted right: covers sources left of the query
    env.build(f, |i| i as f64 * res + 0.5 * res);
    env.eval(query_pos, out);
    let mut tmp = vec![0.0; out.len()];
    env.build(f, |i| i as f64 * res - 0.5 * res);
    env.eval(query_pos, &mut tmp);
    for (q, o) in out.iter_mut().enumerate() {
        *o = o.min(tmp[q]).min(f[query_offset + q]);
    }
}

/// Lower envelope of parabolas `(u - c_i)^2 + f_i` with increasing centers.
struct ParabolaEnvelope {
    centers: Vec<f64>,
    offsets: Vec<f64>,
    hull: Vec<usize>,
    breaks: Vec<f64>,
}

impl ParabolaEnvelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            centers: Vec::with_capacity(n),
            offsets: Vec::with_capacity(n),
            hull: Vec::with_capacity(n),
            breaks: Vec::with_capacity(n + 1),
        }
    }

    fn build(&mut self, f: &[f64], center: impl Fn(usize) -> f64) {
        self.centers.clear();
        self.offsets.clear();
        self.hull.clear();
        self.breaks.clear();
        for (i, &fi) in f.iter().enumerate() {
            self.centers.push(center(i));
            self.offsets.push(fi);
        }
        let intersect = |a: usize, b: usize, centers: &[f64], offsets: &[f64]| -> f64 {
            ((offsets[b] + centers[b] * centers[b]) - (offsets[a] + centers[a] * centers[a]))
                / (2.0 * (centers[b] - centers[a]))
        };
        self.hull.push(0);
        self.breaks.push(f64::NEG_INFINITY);
        self.breaks.push(f64::INFINITY);
        for i in 1..f.len() {
            loop {
                let last = *self.hull.last().unwrap();
                let s = intersect(last, i, &self.centers, &self.offsets);
                if self.hull.len() > 1 && s <= self.breaks[self.hull.len() - 1] {
                    self.hull.pop();
                    self.breaks.pop();
                } else {
                    self.hull.push(i);
                    *self.breaks.last_mut().unwrap() = s;
                    self.breaks.push(f64::INFINITY);
                    break;
                }
            }
        }
    }

    /// Evaluate at increasing query positions.
    fn eval(&self, queries: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for (qi, &u) in queries.iter().enumerate() {
            while self.breaks[k + 1] < u {
                k += 1;
            }
            let i = self.hull[k];
            let d = u - self.centers[i];
            out[qi] = d * d + self.offsets[i];
        }
    }
}

impl SignedDistanceField {
    /// Trilinear interpolation of value and stored gradient.
    pub fn query(&self, p: [f64; 3]) -> SdfSample {
        let mut oob = false;
        let mut t = [0.0f64; 3];
        let mut i0 = [0usize; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin[a]) / self.resolution;
            let max = (self.dims[a] - 1) as f64;
            let fc = if f < 0.0 || f > max {
                oob = true;
                f.clamp(0.0, max)
            } else {
                f
            };
            let fl = fc.floor().min(max - 1.0).max(0.0);
            i0[a] = fl as usize;
            t[a] = (fc - fl).clamp(0.0, 1.0);
        }
        if self.dims.iter().any(|&d| d < 2) {
            // degenerate axes: fall back to nearest-voxel lookup
            let ix = i0[0].min(self.dims[0] - 1);
            let iy = i0[1].min(self.dims[1] - 1);
            let iz = i0[2].min(self.dims[2] - 1);
            let i = self.index(ix, iy, iz);
            return SdfSample {
                value: self.values[i],
                gradient: self.gradients[i],
                out_of_bounds: oob,
            };
        }
        let mut value = 0.0;
        let mut gradient = [0.0; 3];
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 1 { t[0] } else { 1.0 - t[0] })
                        * (if dy == 1 { t[1] } else { 1.0 - t[1] })
                        * (if dz == 1 { t[2] } else { 1.0 - t[2] });
                    let i = self.index(i0[0] + dx, i0[1] + dy, i0[2] + dz);
                    value += w * self.values[i];
                    for a in 0..3 {
                        gradient[a] += w * self.gradients[i][a];
                    }
                }
            }
        }
        SdfSample {
            value,
            gradient,
            out_of_bounds: oob,
        }
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [
            self.origin[0] + ix as f64 * self.resolution,
            self.origin[1] + iy as f64 * self.resolution,
            self.origin[2] + iz as f64 * self.resolution,
        ]
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    // --- binary dump ---------------------------------------------------------
    //
    // Header: nx, ny, nz as little-endian u64, then origin (3 x f64 LE) and
    // resolution (f64 LE). Payload: values then gradients (gx, gy, gz per
    // voxel), both in x-fastest voxel order.

    pub fn write_binary<W: std::io::Write>(&self, w: &mut W) -> Result<(), SdfError> {
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for o in self.origin {
            w.write_all(&o.to_le_bytes())?;
        }
        w.write_all(&self.resolution.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        for g in &self.gradients {
            for c in g {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(r: &mut R) -> Result<Self, SdfError> {
        let mut u64buf = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64, SdfError> {
            r.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let nx = read_u64(r)? as usize;
        let ny = read_u64(r)? as usize;
        let nz = read_u64(r)? as usize;
        let mut f64buf = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> Result<f64, SdfError> {
            r.read_exact(&mut f64buf)?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let origin = [read_f64(r)?, read_f64(r)?, read_f64(r)?];
        let resolution = read_f64(r)?;
        let n = nx
            .checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| SdfError::Parse("voxel count overflow".into()))?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(read_f64(r)?);
        }
        let mut gradients = Vec::with_capacity(n);
        for _ in 0..n {
            gradients.push([read_f64(r)?, read_f64(r)?, read_f64(r)?]);
        }
        Ok(Self {
            origin,
            resolution,
            dims: [nx, ny, nz],
            values,
            gradients,
        })
    }
}
