//! Convex foothold regions: half-space approximations of a segmented plane
//! around a reference foothold.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::segmentation::{point_in_region, Contour, SegmentedPlane};

/// Inner-approximation polygon converted to half-spaces
/// `{p : A p + b >= 0}` with unit-norm rows spanned by polygon edges and the
/// plane normal.
#[derive(Clone, Debug)]
pub struct FootholdRegion {
    pub rows: Vec<([f64; 3], f64)>,
    pub plane_id: usize,
    pub frozen: bool,
    /// Plane-local polygon vertices (diagnostics and tests).
    pub vertices: Vec<[f64; 2]>,
}

impl FootholdRegion {
    /// Stacked constraint values `A p + b`.
    pub fn evaluate(&self, p: &Vector3<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(a, b)| a[0] * p.x + a[1] * p.y + a[2] * p.z + b)
            .collect()
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.evaluate(p).iter().all(|&v| v >= -tol)
    }
}

/// Grow an `m`-gon inside the plane region around the reference foothold.
///
/// Vertices start at the reference and advance outward along fixed
/// equally-spaced directions, round-robin, by `step` per move, until the
/// next move would leave the region (boundary minus holes) or break
/// convexity, or the iteration cap is reached.
pub fn convex_region_around(
    reference_world: &Vector3<f64>,
    plane: &SegmentedPlane,
    plane_id: usize,
    m: usize,
    step: f64,
    max_iterations_per_vertex: usize,
) -> FootholdRegion {
    let region: Contour = plane.region();
    let center = plane.to_plane_2d(&plane.project_along_z(reference_world.x, reference_world.y));
    let dirs: Vec<[f64; 2]> = (0..m)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    let mut verts: Vec<[f64; 2]> = vec![center; m];
    let mut budget: Vec<usize> = vec![max_iterations_per_vertex; m];
    let mut region_blocked = vec![false; m];
    // Synchronized rounds: every eligible vertex proposes one step outward,
    // then proposals that would leave a reflex corner are withdrawn. Moving
    // one vertex at a time would deadlock: a half-advanced ring is already
    // non-convex at the seam between moved and unmoved vertices.
    loop {
        let mut proposal: Vec<Option<[f64; 2]>> = vec![None; m];
        for k in 0..m {
            if region_blocked[k] || budget[k] == 0 {
                continue;
            }
            let trial = [
                verts[k][0] + step * dirs[k][0],
                verts[k][1] + step * dirs[k][1],
            ];
            if !point_in_region(trial, &region) {
                region_blocked[k] = true;
                continue;
            }
            proposal[k] = Some(trial);
        }
        if proposal.iter().all(|p| p.is_none()) {
            break;
        }
        // withdraw proposals until the candidate polygon is convex
        loop {
            let candidate: Vec<[f64; 2]> = (0..m)
                .map(|k| proposal[k].unwrap_or(verts[k]))
                .collect();
            match first_reflex_corner(&candidate) {
                None => break,
                Some(i) => {
                    // revert the corner vertex itself if it moved, else a
                    // moved neighbor
                    let candidates = [i, (i + m - 1) % m, (i + 1) % m];
                    let j = candidates
                        .into_iter()
                        .find(|&j| proposal[j].is_some())
                        .expect("a reflex corner involves at least one proposal");
                    proposal[j] = None;
                }
            }
        }
        let mut moved = false;
        for k in 0..m {
            if let Some(p) = proposal[k] {
                verts[k] = p;
                budget[k] -= 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    // half-spaces from the polygon edges, spanned with the plane normal
    let mut rows = Vec::with_capacity(m);
    for k in 0..m {
        let a2 = verts[k];
        let b2 = verts[(k + 1) % m];
        let d = [b2[0] - a2[0], b2[1] - a2[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len < 1e-9 {
            continue;
        }
        // inward normal of a CCW edge in plane coordinates
        let n2 = [-d[1] / len, d[0] / len];
        // world-space row: inward direction expressed through the plane axes
        let axes = plane.plane_frame.transpose();
        let n_world = axes.column(0) * n2[0] + axes.column(1) * n2[1];
        let vertex_world = plane.to_world(a2);
        let offset = -n_world.dot(&vertex_world);
        rows.push(([n_world.x, n_world.y, n_world.z], offset));
    }
    FootholdRegion {
        rows,
        plane_id,
        frozen: false,
        vertices: verts,
    }
}

/// Index of the first strictly reflex corner of a counter-clockwise polygon,
/// tolerating coincident (not yet expanded) vertices.
fn first_reflex_corner(poly: &[[f64; 2]]) -> Option<usize> {
    let m = poly.len();
    for i in 0..m {
        let a = poly[(i + m - 1) % m];
        let b = poly[i];
        let c = poly[(i + 1) % m];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross < -1e-12 {
            return Some(i);
        }
    }
    None
}

/// Cache of foothold regions across MPC iterations.
///
/// The region of a foot past the midpoint of its swing phase stays frozen to
/// avoid last-moment constraint jumps.
#[derive(Default)]
pub struct RegionCache {
    entries: HashMap<(usize, i64), FootholdRegion>,
}

impl RegionCache {
    /// key resolution: 1 ms of touchdown time
    fn key(leg: usize, touchdown_time: f64) -> (usize, i64) {
        (leg, (touchdown_time * 1000.0).round() as i64)
    }

    /// Fetch or compute the region for a touchdown; when `freeze` is set an
    /// existing entry is reused unchanged.
    pub fn obtain(
        &mut self,
        leg: usize,
        touchdown_time: f64,
        freeze: bool,
        compute: impl FnOnce() -> FootholdRegion,
    ) -> FootholdRegion {
        let key = Self::key(leg, touchdown_time);
        if freeze {
            if let Some(existing) = self.entries.get(&key) {
                let mut r = existing.clone();
                r.frozen = true;
                return r;
            }
        }
        let region = compute();
        self.entries.insert(key, region.clone());
        region
    }

    /// Drop entries whose touchdown time is in the past.
    pub fn prune(&mut self, now: f64) {
        let cutoff = (now * 1000.0).round() as i64;
        self.entries.retain(|&(_, t), _| t >= cutoff - 50);
    }

    /// Look up a cached region without recomputation.
    pub fn get(&self, leg: usize, touchdown_time: f64) -> Option<&FootholdRegion> {
        self.entries.get(&Self::key(leg, touchdown_time))
    }
}
