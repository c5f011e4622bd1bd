//! Cell-edge (crack-following) contour tracing for binary cell sets.
//!
//! Vertices lie on cell corners, so the traced polygon area equals the cell
//! count times the squared resolution. Outer contours come out
//! counter-clockwise, holes clockwise (in x = col, y = row coordinates).

use std::collections::HashMap;

/// Polygon with holes in grid coordinates (x = col, y = row); the unit is one
/// cell, and cell `(r, c)` covers `[c-0.5, c+0.5] x [r-0.5, r+0.5]`.
#[derive(Clone, Debug, Default)]
pub struct Contour {
    /// Counter-clockwise outer polygon.
    pub outer: Vec<[f64; 2]>,
    /// Clockwise hole polygons.
    pub holes: Vec<Vec<[f64; 2]>>,
}

/// Signed polygon area (shoelace); positive for counter-clockwise.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * acc
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when `p` lies inside the outer polygon and outside every hole.
pub fn point_in_region(p: [f64; 2], contour: &Contour) -> bool {
    if !point_in_polygon(p, &contour.outer) {
        return false;
    }
    !contour.holes.iter().any(|h| point_in_polygon(p, h))
}

/// Closest point of the closed region (outer minus holes) to `p`.
///
/// Returns `p` itself when inside; otherwise the nearest point on the region
/// border, found by projecting onto every edge segment.
pub fn closest_point_in_region(p: [f64; 2], contour: &Contour) -> [f64; 2] {
    if point_in_region(p, contour) {
        return p;
    }
    let mut best = contour.outer[0];
    let mut best_d2 = f64::INFINITY;
    let mut consider = |poly: &[[f64; 2]]| {
        let n = poly.len();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let q = project_to_segment(p, a, b);
            let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best = q;
            }
        }
    };
    consider(&contour.outer);
    for h in &contour.holes {
        consider(h);
    }
    best
}

fn project_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

/// Trace the boundary of a 4-connected cell set.
///
/// Directed boundary edges keep the interior on the left; at pinch corners
/// (two diagonal inside cells meeting two diagonal outside cells) the walk
/// takes the sharpest left turn, which hugs the current inside cell and keeps
/// every loop simple. The largest counter-clockwise loop is the outer
/// boundary; all clockwise loops are holes.
pub fn extract_boundary(cells: &[(usize, usize)], rows: usize, cols: usize) -> Contour {
    assert!(!cells.is_empty());
    let mut mask = vec![false; rows * cols];
    for &(r, c) in cells {
        mask[r * cols + c] = true;
    }
    let inside = |r: i64, c: i64| -> bool {
        r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols && mask[r as usize * cols + c as usize]
    };

    // Directed edges between corner lattice points; corner (i, j) sits at
    // grid position (row = i - 0.5, col = j - 0.5).
    #[derive(Clone, Copy)]
    struct Edge {
        from: (i64, i64),
        to: (i64, i64),
        used: bool,
    }
    let mut edges: Vec<Edge> = Vec::new();
    for &(r, c) in cells {
        let (r, c) = (r as i64, c as i64);
        // corners: bl = (r, c), br = (r, c+1), tr = (r+1, c+1), tl = (r+1, c)
        if !inside(r - 1, c) {
            edges.push(Edge { from: (r, c), to: (r, c + 1), used: false });
        }
        if !inside(r, c + 1) {
            edges.push(Edge { from: (r, c + 1), to: (r + 1, c + 1), used: false });
        }
        if !inside(r + 1, c) {
            edges.push(Edge { from: (r + 1, c + 1), to: (r + 1, c), used: false });
        }
        if !inside(r, c - 1) {
            edges.push(Edge { from: (r + 1, c), to: (r, c), used: false });
        }
    }
    let mut by_from: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        by_from.entry(e.from).or_default().push(i);
    }

    let mut loops: Vec<Vec<[f64; 2]>> = Vec::new();
    for start in 0..edges.len() {
        if edges[start].used {
            continue;
        }
        let mut corners: Vec<(i64, i64)> = Vec::new();
        let mut cur = start;
        loop {
            edges[cur].used = true;
            corners.push(edges[cur].from);
            let at = edges[cur].to;
            let din = (
                edges[cur].to.0 - edges[cur].from.0,
                edges[cur].to.1 - edges[cur].from.1,
            );
            let candidates = by_from.get(&at).map(|v| v.as_slice()).unwrap_or(&[]);
            let mut next: Option<usize> = None;
            let mut best_turn = i64::MAX;
            for &ci in candidates {
                // the start edge stays eligible so a loop through a pinch
                // corner can close at the correct opportunity
                if edges[ci].used && ci != start {
                    continue;
                }
                let dout = (
                    edges[ci].to.0 - edges[ci].from.0,
                    edges[ci].to.1 - edges[ci].from.1,
                );
                // the rightmost turn hugs the outside component, keeping the
                // outer loop and each hole loop simple at pinch corners;
                // cross(d_in, d_out) in (x=col, y=row), left positive
                let cross = din.1 * dout.0 - din.0 * dout.1;
                let straight = din.0 * dout.0 + din.1 * dout.1;
                let turn = 2 * cross + straight;
                if turn < best_turn {
                    best_turn = turn;
                    next = Some(ci);
                }
            }
            let next = next.expect("boundary edge chain must close");
            if next == start {
                break;
            }
            cur = next;
        }
        // merge collinear runs
        let mut poly: Vec<[f64; 2]> = Vec::new();
        let n = corners.len();
        for i in 0..n {
            let prev = corners[(i + n - 1) % n];
            let cur_c = corners[i];
            let nxt = corners[(i + 1) % n];
            let d1 = (cur_c.0 - prev.0, cur_c.1 - prev.1);
            let d2 = (nxt.0 - cur_c.0, nxt.1 - cur_c.1);
            if d1 != d2 {
                poly.push([cur_c.1 as f64 - 0.5, cur_c.0 as f64 - 0.5]);
            }
        }
        loops.push(poly);
    }

    let mut outer: Option<Vec<[f64; 2]>> = None;
    let mut outer_area = 0.0;
    let mut holes = Vec::new();
    for l in loops {
        let a = polygon_area(&l);
        if a > 0.0 {
            if a > outer_area {
                if let Some(prev) = outer.take() {
                    // disconnected input: keep the largest positive loop
                    debug_assert!(polygon_area(&prev) <= a);
                }
                outer_area = a;
                outer = Some(l);
            }
        } else {
            holes.push(l);
        }
    }
    Contour {
        outer: outer.expect("cell set must produce an outer contour"),
        holes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(r0: usize, r1: usize, c0: usize, c1: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for r in r0..r1 {
            for c in c0..c1 {
                v.push((r, c));
            }
        }
        v
    }

    #[test]
    fn solid_block_has_square_outer_and_no_holes() {
        let cells = block(0, 3, 0, 3);
        let ct = extract_boundary(&cells, 5, 5);
        assert_eq!(ct.outer.len(), 4);
        assert!(ct.holes.is_empty());
        assert!((polygon_area(&ct.outer) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn block_with_center_removed_has_one_hole() {
        let mut cells = block(0, 5, 0, 5);
        cells.retain(|&c| c != (2, 2));
        let ct = extract_boundary(&cells, 7, 7);
        assert_eq!(ct.holes.len(), 1);
        assert!((polygon_area(&ct.outer) - 25.0).abs() < 1e-12);
        assert!((polygon_area(&ct.holes[0]) + 1.0).abs() < 1e-12, "hole is CW unit square");
        let net = polygon_area(&ct.outer) + ct.holes.iter().map(|h| polygon_area(h)).sum::<f64>();
        assert!((net - 24.0).abs() < 1e-12);
    }

    #[test]
    fn l_shape_outer_has_six_corners() {
        let mut cells = block(0, 3, 0, 1);
        cells.extend(block(0, 1, 1, 3));
        let ct = extract_boundary(&cells, 5, 5);
        assert_eq!(ct.outer.len(), 6);
        assert!((polygon_area(&ct.outer) - 5.0).abs() < 1e-12);
        assert!(ct.holes.is_empty());
    }

    #[test]
    fn pinch_corner_splits_hole_from_notch() {
        // 3x3 block minus (1,1) (interior hole) and minus (2,2) (corner notch
        // that meets the hole diagonally).
        let mut cells = block(0, 3, 0, 3);
        cells.retain(|&c| c != (1, 1) && c != (2, 2));
        let ct = extract_boundary(&cells, 5, 5);
        assert_eq!(ct.holes.len(), 1, "the interior gap is the only hole");
        let net = polygon_area(&ct.outer) + ct.holes.iter().map(|h| polygon_area(h)).sum::<f64>();
        assert!((net - 7.0).abs() < 1e-12, "net area equals cell count, got {net}");
        // every loop must be simple: vertex count equals distinct vertices
        let mut seen = std::collections::HashSet::new();
        for v in &ct.outer {
            assert!(seen.insert((v[0].to_bits(), v[1].to_bits())), "outer self-touches");
        }
    }

    #[test]
    fn diagonal_hole_cells_become_two_holes() {
        let mut cells = block(0, 4, 0, 4);
        cells.retain(|&c| c != (1, 1) && c != (2, 2));
        let ct = extract_boundary(&cells, 6, 6);
        assert_eq!(ct.holes.len(), 2);
        let net = polygon_area(&ct.outer) + ct.holes.iter().map(|h| polygon_area(h)).sum::<f64>();
        assert!((net - 14.0).abs() < 1e-12);
    }

    #[test]
    fn membership_respects_holes() {
        let mut cells = block(0, 5, 0, 5);
        cells.retain(|&c| c != (2, 2));
        let ct = extract_boundary(&cells, 7, 7);
        assert!(point_in_region([0.0, 0.0], &ct));
        assert!(!point_in_region([2.0, 2.0], &ct), "hole center is outside the region");
        assert!(!point_in_region([6.0, 6.0], &ct));
    }

    #[test]
    fn closest_point_projects_onto_border() {
        let cells = block(0, 2, 0, 2); // covers [-0.5, 1.5]^2
        let ct = extract_boundary(&cells, 4, 4);
        let q = closest_point_in_region([3.0, 0.5], &ct);
        assert!((q[0] - 1.5).abs() < 1e-12);
        assert!((q[1] - 0.5).abs() < 1e-12);
        let inside = closest_point_in_region([0.2, 0.3], &ct);
        assert_eq!(inside, [0.2, 0.3]);
    }

    #[test]
    fn single_cell_is_unit_square() {
        let ct = extract_boundary(&[(2, 3)], 5, 5);
        assert_eq!(ct.outer.len(), 4);
        assert!((polygon_area(&ct.outer) - 1.0).abs() < 1e-12);
    }
}
