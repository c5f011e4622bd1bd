//! Smoothed torso height reference layer.
//!
//! Non-steppable cells are filled by diffusion from the steppable cells
//! (Gauss-Seidel relaxation of the Laplace equation with the steppable
//! heights as boundary data), then the whole layer is smoothed with a
//! Gaussian. Flat steppable ground maps to itself.

use crate::map::{neighbors4, ElevationMap};

const DIFFUSION_TOLERANCE: f64 = 1e-6;
const DIFFUSION_MAX_SWEEPS: usize = 20_000;
const GAUSSIAN_SIGMA_CELLS: f64 = 3.0;

/// Build the torso reference layer from the inpainted heights and the
/// refined steppability layer.
pub fn torso_reference_layer(map: &ElevationMap, steppability: &[f64]) -> Vec<f64> {
    let (rows, cols) = (map.rows, map.cols);
    assert_eq!(steppability.len(), rows * cols);
    let mut layer: Vec<f64> = map.heights().to_vec();
    let free: Vec<usize> = (0..rows * cols).filter(|&i| steppability[i] == 0.0).collect();
    if !free.is_empty() && free.len() < rows * cols {
        // seed free cells from the surrounding steppable average for faster
        // convergence; value is irrelevant for the fixed point
        for sweep in 0..DIFFUSION_MAX_SWEEPS {
            let mut max_change: f64 = 0.0;
            for &i in &free {
                let (r, c) = (i / cols, i % cols);
                let mut sum = 0.0;
                let mut n = 0.0;
                for (nr, nc) in neighbors4(r, c, rows, cols) {
                    sum += layer[nr * cols + nc];
                    n += 1.0;
                }
                let v = sum / n;
                max_change = max_change.max((v - layer[i]).abs());
                layer[i] = v;
            }
            if max_change <= DIFFUSION_TOLERANCE {
                let _ = sweep;
                break;
            }
        }
    }
    gaussian_smooth(&layer, rows, cols, GAUSSIAN_SIGMA_CELLS)
}

/// Separable Gaussian blur with per-cell kernel renormalization at the map
/// borders, so constant inputs are reproduced exactly.
fn gaussian_smooth(data: &[f64], rows: usize, cols: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (wi, k) in (-radius..=radius).enumerate() {
                let cc = c as i64 + k;
                if cc < 0 || cc >= cols as i64 {
                    continue;
                }
                acc += weights[wi] * data[r * cols + cc as usize];
                wsum += weights[wi];
            }
            tmp[r * cols + c] = acc / wsum;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (wi, k) in (-radius..=radius).enumerate() {
                let rr = r as i64 + k;
                if rr < 0 || rr >= rows as i64 {
                    continue;
                }
                acc += weights[wi] * tmp[rr as usize * cols + c];
                wsum += weights[wi];
            }
            out[r * cols + c] = acc / wsum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_steppable_ground_maps_to_itself() {
        let map = ElevationMap::from_heights(0.04, (0.0, 0.0), 10, 10, vec![0.2; 100]);
        let layer = torso_reference_layer(&map, &vec![1.0; 100]);
        for v in layer {
            assert!((v - 0.2).abs() < 1e-3);
        }
    }

    #[test]
    fn spike_is_replaced_by_smooth_interpolation() {
        let mut map = ElevationMap::from_heights(0.04, (0.0, 0.0), 11, 11, vec![0.2; 121]);
        map.set_height(5, 5, 0.7);
        let mut stepp = vec![1.0; 121];
        // the spike and its 8 neighbors are non-steppable
        for r in 4..=6 {
            for c in 4..=6 {
                stepp[r * 11 + c] = 0.0;
            }
        }
        let layer = torso_reference_layer(&map, &stepp);
        let spike = layer[5 * 11 + 5];
        assert!((0.2..0.7).contains(&spike), "spike value {spike}");
        // smoothness: neighbor differences bounded well below the spike height
        for r in 0..11 {
            for c in 0..10 {
                let d = (layer[r * 11 + c + 1] - layer[r * 11 + c]).abs();
                assert!(d < 0.5 * 0.04, "gradient bound violated: {d}");
            }
        }
    }

    #[test]
    fn terraces_produce_monotone_ramp() {
        let map = ElevationMap::from_fn(0.04, (0.0, 0.0), 8, 20, |x, _| {
            if x < 9.5 * 0.04 {
                0.0
            } else {
                0.3
            }
        });
        let mut stepp = vec![1.0; 8 * 20];
        // cliff band non-steppable
        for r in 0..8 {
            for c in 8..12 {
                stepp[r * 20 + c] = 0.0;
            }
        }
        let layer = torso_reference_layer(&map, &stepp);
        // along a mid scanline the profile must be monotone non-decreasing
        let r = 4;
        for c in 0..19 {
            assert!(
                layer[r * 20 + c + 1] >= layer[r * 20 + c] - 1e-9,
                "non-monotone at col {c}"
            );
        }
    }
}
