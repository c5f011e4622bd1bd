//! Planar decomposition of steppable terrain.

use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::map::{cell_set_stats, CellStats, ElevationMap, LAYER_STEPPABILITY};
use crate::segmentation::contour::{extract_boundary, polygon_area, Contour};
use crate::segmentation::torso_layer::torso_reference_layer;

/// Region-level planarity thresholds: sigma bound, normal z bound, minimum
/// cell count.
pub const PLANARITY_SIGMA_MAX: f64 = 0.025;
pub const PLANARITY_NZ_MIN: f64 = 0.87;
pub const PLANARITY_MIN_CELLS: usize = 4;

/// Consensus (RANSAC) refinement parameters for non-planar regions.
#[derive(Clone, Debug)]
pub struct ConsensusParams {
    /// Inlier distance threshold to the sampled plane [m].
    pub inlier_distance: f64,
    /// Sampling iterations per extraction round.
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        Self {
            inlier_distance: 0.02,
            max_iterations: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SegmentationParams {
    pub consensus: ConsensusParams,
    /// Boundary safety margin [m]; holes grow by the same amount.
    pub inset_margin: f64,
    /// Minimum eroded area (cells) below which the margin is skipped.
    pub inset_min_cells: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            consensus: ConsensusParams::default(),
            inset_margin: 0.05,
            inset_min_cells: 4,
        }
    }
}

/// Planar region with a polygonal boundary expressed in the plane frame.
#[derive(Clone, Debug)]
pub struct SegmentedPlane {
    /// Unit upward normal in world coordinates.
    pub normal: Vector3<f64>,
    /// Point on the plane (region mean) in world coordinates.
    pub support_point: Vector3<f64>,
    /// World-to-plane rotation; rows are the plane axes, third row = normal.
    pub plane_frame: Matrix3<f64>,
    /// Counter-clockwise outer polygon, plane-local meters.
    pub boundary: Vec<[f64; 2]>,
    /// Clockwise hole polygons, plane-local meters.
    pub holes: Vec<Vec<[f64; 2]>>,
    /// Member cells (row, col); unaffected by boundary insetting.
    pub cell_ids: Vec<(usize, usize)>,
    pub inset_applied: bool,
}

impl SegmentedPlane {
    /// Plane height at a world (x, y), following the plane along world z.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let n = &self.normal;
        let d = n.dot(&self.support_point);
        (d - n.x * x - n.y * y) / n.z
    }

    /// World point on the plane above/below the (x, y) location.
    pub fn project_along_z(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new(x, y, self.height_at(x, y))
    }

    /// Express a world point in plane-local 2D coordinates.
    pub fn to_plane_2d(&self, p: &Vector3<f64>) -> [f64; 2] {
        let d = self.plane_frame * (p - self.support_point);
        [d.x, d.y]
    }

    /// Map plane-local 2D coordinates back to a world point on the plane.
    pub fn to_world(&self, uv: [f64; 2]) -> Vector3<f64> {
        self.support_point
            + self.plane_frame.transpose() * Vector3::new(uv[0], uv[1], 0.0)
    }

    /// Boundary and holes as a [`Contour`] view for geometric queries.
    pub fn region(&self) -> Contour {
        Contour {
            outer: self.boundary.clone(),
            holes: self.holes.clone(),
        }
    }
}

/// Segmentation output: planes, the refreshed binary layer, and the smoothed
/// torso reference layer.
#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub planes: Vec<SegmentedPlane>,
    pub refined_steppability: Vec<f64>,
    pub torso_reference: Vec<f64>,
}

/// Maximal 4-connected sets of steppable cells, labelled in row-major order
/// of their first cell.
pub fn connected_components(layer: &[f64], rows: usize, cols: usize) -> Vec<Vec<(usize, usize)>> {
    let mut visited = vec![false; rows * cols];
    let mut regions = Vec::new();
    for start in 0..rows * cols {
        if visited[start] || layer[start] == 0.0 {
            continue;
        }
        let mut region = Vec::new();
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            region.push((r, c));
            for (nr, nc) in crate::map::neighbors4(r, c, rows, cols) {
                let j = nr * cols + nc;
                if !visited[j] && layer[j] != 0.0 {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        region.sort_unstable();
        regions.push(region);
    }
    regions
}

/// Region-level plane acceptance: moments over all member cells, accepted
/// when sigma_n <= 0.025, n_z >= 0.87, and the region has at least 4 cells.
pub fn planarity_check(region: &[(usize, usize)], map: &ElevationMap) -> (bool, CellStats) {
    let stats = cell_set_stats(map, region);
    let ok = stats.count >= PLANARITY_MIN_CELLS
        && stats.sigma_n <= PLANARITY_SIGMA_MAX
        && stats.normal.z >= PLANARITY_NZ_MIN;
    (ok, stats)
}

/// Extract planes from a region that failed the planarity check.
///
/// Samples 3 non-collinear cells, fits the exact plane, and collects inliers
/// within the distance threshold. The largest inlier set of a sampling round
/// is reduced to its largest 4-connected component and accepted when the
/// planarity criteria hold on it; accepted cells are removed and sampling
/// repeats on the remainder. Deterministic for a fixed seed.
pub fn consensus_refine(
    region: &[(usize, usize)],
    map: &ElevationMap,
    params: &ConsensusParams,
) -> Vec<(CellStats, Vec<(usize, usize)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut working: Vec<(usize, usize)> = region.to_vec();
    let mut planes = Vec::new();
    'extraction: loop {
        if working.len() < PLANARITY_MIN_CELLS {
            break;
        }
        let pts: Vec<Vector3<f64>> = working
            .iter()
            .map(|&(r, c)| {
                let (x, y) = map.cell_center(r, c);
                Vector3::new(x, y, map.height(r, c))
            })
            .collect();
        let mut best_inliers: Vec<usize> = Vec::new();
        for _ in 0..params.max_iterations {
            let pick = sample(&mut rng, working.len(), 3);
            let (a, b, c) = (pts[pick.index(0)], pts[pick.index(1)], pts[pick.index(2)]);
            let mut n = (b - a).cross(&(c - a));
            let norm = n.norm();
            if norm < 1e-12 {
                continue; // collinear sample
            }
            n /= norm;
            if n.z < 0.0 {
                n = -n;
            }
            let inliers: Vec<usize> = (0..pts.len())
                .filter(|&i| (n.dot(&(pts[i] - a))).abs() <= params.inlier_distance)
                .collect();
            if inliers.len() > best_inliers.len() {
                best_inliers = inliers;
            }
        }
        if best_inliers.len() < PLANARITY_MIN_CELLS {
            break;
        }
        // keep the largest 4-connected component of the inlier set so the
        // boundary extraction always sees one region
        let inlier_cells: Vec<(usize, usize)> =
            best_inliers.iter().map(|&i| working[i]).collect();
        let component = largest_component(&inlier_cells, map.rows, map.cols);
        let (ok, stats) = planarity_check(&component, map);
        if !ok {
            break 'extraction;
        }
        working.retain(|c| !component.contains(c));
        planes.push((stats, component));
    }
    planes
}

fn largest_component(cells: &[(usize, usize)], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut layer = vec![0.0; rows * cols];
    for &(r, c) in cells {
        layer[r * cols + c] = 1.0;
    }
    connected_components(&layer, rows, cols)
        .into_iter()
        .max_by_key(|r| r.len())
        .unwrap_or_default()
}

/// Build a [`SegmentedPlane`] from its statistics and member cells: trace the
/// grid contour, lift it along world z onto the plane, and express the
/// polygon in plane-local coordinates.
pub fn build_plane(
    stats: &CellStats,
    cells: Vec<(usize, usize)>,
    map: &ElevationMap,
) -> SegmentedPlane {
    let normal = stats.normal;
    let support_point = stats.mean;
    let plane_frame = frame_from_normal(&normal);
    let contour = extract_boundary(&cells, map.rows, map.cols);
    let lift = |poly: &[[f64; 2]]| -> Vec<[f64; 2]> {
        poly.iter()
            .map(|v| {
                let x = map.origin.0 + v[0] * map.resolution;
                let y = map.origin.1 + v[1] * map.resolution;
                let d = normal.dot(&support_point);
                let z = (d - normal.x * x - normal.y * y) / normal.z;
                let p = Vector3::new(x, y, z);
                let local = plane_frame * (p - support_point);
                [local.x, local.y]
            })
            .collect()
    };
    SegmentedPlane {
        normal,
        support_point,
        plane_frame,
        boundary: lift(&contour.outer),
        holes: contour.holes.iter().map(|h| lift(h)).collect(),
        cell_ids: cells,
        inset_applied: false,
    }
}

/// Orthonormal world-to-plane rotation with the third row equal to `normal`.
pub fn frame_from_normal(normal: &Vector3<f64>) -> Matrix3<f64> {
    let ez = normal.normalize();
    // project the world x-axis into the plane; fall back to y when parallel
    let seed = if ez.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let ex = (seed - ez * seed.dot(&ez)).normalize();
    let ey = ez.cross(&ex);
    Matrix3::from_rows(&[ex.transpose(), ey.transpose(), ez.transpose()])
}

/// Shrink the boundary inwards (and holes outwards) by `margin`.
///
/// The member-cell mask is eroded by `ceil(margin / resolution)` cells with a
/// 3x3 structuring element and the contour re-traced. When the eroded area is
/// smaller than `min_cells` the original boundary is kept and
/// `inset_applied` stays false.
pub fn inset_boundary(
    plane: &SegmentedPlane,
    margin: f64,
    map: &ElevationMap,
    min_cells: usize,
) -> SegmentedPlane {
    if margin <= 0.0 {
        return plane.clone();
    }
    let steps = (margin / map.resolution).ceil() as usize;
    let (rows, cols) = (map.rows, map.cols);
    let mut mask = vec![false; rows * cols];
    for &(r, c) in &plane.cell_ids {
        mask[r * cols + c] = true;
    }
    for _ in 0..steps {
        let mut next = mask.clone();
        for r in 0..rows {
            for c in 0..cols {
                if !mask[r * cols + c] {
                    continue;
                }
                let mut keep = true;
                'scan: for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                            keep = false;
                            break 'scan;
                        }
                        if !mask[nr as usize * cols + nc as usize] {
                            keep = false;
                            break 'scan;
                        }
                    }
                }
                next[r * cols + c] = keep;
            }
        }
        mask = next;
    }
    let eroded: Vec<(usize, usize)> = (0..rows * cols)
        .filter(|&i| mask[i])
        .map(|i| (i / cols, i % cols))
        .collect();
    let eroded = largest_component(&eroded, rows, cols);
    if eroded.len() < min_cells.max(1) {
        return plane.clone();
    }
    let contour = extract_boundary(&eroded, rows, cols);
    let lift = |poly: &[[f64; 2]]| -> Vec<[f64; 2]> {
        poly.iter()
            .map(|v| {
                let x = map.origin.0 + v[0] * map.resolution;
                let y = map.origin.1 + v[1] * map.resolution;
                let p = plane.project_along_z(x, y);
                plane.to_plane_2d(&p)
            })
            .collect()
    };
    SegmentedPlane {
        boundary: lift(&contour.outer),
        holes: contour.holes.iter().map(|h| lift(h)).collect(),
        inset_applied: true,
        ..plane.clone()
    }
}

/// Full segmentation pass over a classified map.
///
/// Requires the `steppability` layer. Every steppable cell ends up in exactly
/// one plane or has its steppability reset to zero.
pub fn segment(map: &ElevationMap, params: &SegmentationParams) -> SegmentationResult {
    let stepp = map
        .layer(LAYER_STEPPABILITY)
        .expect("segment requires a classified map")
        .to_vec();
    let regions = connected_components(&stepp, map.rows, map.cols);
    let mut planes = Vec::new();
    for (region_idx, region) in regions.iter().enumerate() {
        let (ok, stats) = planarity_check(region, map);
        if ok {
            planes.push(build_plane(&stats, region.clone(), map));
        } else {
            let consensus = ConsensusParams {
                // region-local seed: parallel or reordered region processing
                // cannot change the outcome
                seed: params.consensus.seed.wrapping_add(region_idx as u64),
                ..params.consensus.clone()
            };
            for (stats, cells) in consensus_refine(region, map, &consensus) {
                planes.push(build_plane(&stats, cells, map));
            }
        }
    }
    let planes: Vec<SegmentedPlane> = planes
        .into_iter()
        .map(|p| inset_boundary(&p, params.inset_margin, map, params.inset_min_cells))
        .collect();

    let mut refined = vec![0.0; map.rows * map.cols];
    for p in &planes {
        for &(r, c) in &p.cell_ids {
            refined[r * map.cols + c] = 1.0;
        }
    }
    let torso_reference = torso_reference_layer(map, &refined);
    SegmentationResult {
        planes,
        refined_steppability: refined,
        torso_reference,
    }
}

// --- dump format -------------------------------------------------------------
//
// Line-oriented text, one record per plane:
//   segmentation 1
//   planes <n>
//   plane <id>
//   normal <nx> <ny> <nz>
//   support <x> <y> <z>
//   boundary <k>            (k lines of "<u> <v>")
//   holes <m>
//   hole <k>                (k lines of "<u> <v>", repeated m times)

pub fn write_segmentation<W: std::io::Write>(
    result: &SegmentationResult,
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "segmentation 1")?;
    writeln!(w, "planes {}", result.planes.len())?;
    for (id, p) in result.planes.iter().enumerate() {
        writeln!(w, "plane {id}")?;
        writeln!(
            w,
            "normal {:.8e} {:.8e} {:.8e}",
            p.normal.x, p.normal.y, p.normal.z
        )?;
        writeln!(
            w,
            "support {:.8e} {:.8e} {:.8e}",
            p.support_point.x, p.support_point.y, p.support_point.z
        )?;
        writeln!(w, "boundary {}", p.boundary.len())?;
        for v in &p.boundary {
            writeln!(w, "{:.8e} {:.8e}", v[0], v[1])?;
        }
        writeln!(w, "holes {}", p.holes.len())?;
        for h in &p.holes {
            writeln!(w, "hole {}", h.len())?;
            for v in h {
                writeln!(w, "{:.8e} {:.8e}", v[0], v[1])?;
            }
        }
    }
    Ok(())
}
