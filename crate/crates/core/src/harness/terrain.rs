//! Deterministic synthetic terrain generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::ElevationMap;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("unknown terrain generator {0:?}")]
    UnknownGenerator(String),
    #[error(transparent)]
    Map(#[from] crate::map::MapError),
}

fn default_extent() -> f64 {
    8.0
}
fn default_resolution() -> f64 {
    0.04
}
fn default_box_height() -> f64 {
    0.35
}
fn default_rise() -> f64 {
    0.185
}
fn default_run() -> f64 {
    0.24
}
fn default_steps() -> usize {
    3
}
fn default_stone() -> f64 {
    0.20
}
fn default_pitch() -> f64 {
    0.30
}
fn default_gap_width() -> f64 {
    0.20
}
fn default_feature_start() -> f64 {
    1.0
}
fn default_feature_length() -> f64 {
    1.2
}
fn default_noise() -> f64 {
    0.02
}

/// Terrain description in the scenario file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainSpec {
    Flat {
        #[serde(default)]
        z: f64,
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    Slope {
        angle_deg: f64,
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    /// Raised plateau across the y-axis, crossed along x.
    Box {
        #[serde(default = "default_box_height")]
        height: f64,
        #[serde(default = "default_feature_start")]
        start: f64,
        #[serde(default = "default_feature_length")]
        length: f64,
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    /// Deep trench across the y-axis.
    Gap {
        #[serde(default = "default_gap_width")]
        width: f64,
        #[serde(default = "default_feature_start")]
        start: f64,
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    Stairs {
        #[serde(default = "default_rise")]
        rise: f64,
        #[serde(default = "default_run")]
        run: f64,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_feature_start")]
        start: f64,
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    SteppingStones {
        #[serde(default = "default_pitch")]
        pitch: f64,
        #[serde(default = "default_stone")]
        stone: f64,
        #[serde(default = "default_feature_start")]
        start: f64,
        #[serde(default = "default_feature_length")]
        length: f64,
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    /// Mixed demo terrain with additive uniform and Gaussian noise.
    Demo {
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_noise")]
        uniform_noise: f64,
        #[serde(default = "default_noise")]
        gaussian_noise: f64,
    },
    File {
        path: String,
    },
}

impl Default for TerrainSpec {
    fn default() -> Self {
        Self::Flat {
            z: 0.0,
            extent: default_extent(),
            resolution: default_resolution(),
        }
    }
}

impl TerrainSpec {
    pub fn generate(&self) -> Result<ElevationMap, TerrainError> {
        Ok(match self {
            Self::Flat {
                z,
                extent,
                resolution,
            } => centered(*extent, *resolution, |_, _| *z),
            Self::Slope {
                angle_deg,
                extent,
                resolution,
            } => {
                let slope = angle_deg.to_radians().tan();
                centered(*extent, *resolution, |x, _| (x.max(0.0)) * slope)
            }
            Self::Box {
                height,
                start,
                length,
                extent,
                resolution,
            } => centered(*extent, *resolution, |x, _| {
                if x >= *start && x < start + length {
                    *height
                } else {
                    0.0
                }
            }),
            Self::Gap {
                width,
                start,
                extent,
                resolution,
            } => centered(*extent, *resolution, |x, _| {
                if x >= *start && x < start + width {
                    -1.0
                } else {
                    0.0
                }
            }),
            Self::Stairs {
                rise,
                run,
                steps,
                start,
                extent,
                resolution,
            } => centered(*extent, *resolution, |x, _| {
                if x < *start {
                    0.0
                } else {
                    let k = (((x - start) / run).floor() as i64 + 1).min(*steps as i64);
                    k as f64 * rise
                }
            }),
            Self::SteppingStones {
                pitch,
                stone,
                start,
                length,
                extent,
                resolution,
            } => centered(*extent, *resolution, |x, y| {
                if x < *start || x >= start + length {
                    return 0.0;
                }
                // stones centered on a square lattice
                let lx = (x - start).rem_euclid(*pitch);
                let ly = (y + 100.0 * pitch).rem_euclid(*pitch);
                let half = stone / 2.0;
                let cx = pitch / 2.0;
                if (lx - cx).abs() <= half && (ly - cx).abs() <= half {
                    0.0
                } else {
                    -0.5
                }
            }),
            Self::Demo {
                extent,
                resolution,
                seed,
                uniform_noise,
                gaussian_noise,
            } => demo_terrain(*extent, *resolution, *seed, *uniform_noise, *gaussian_noise),
            Self::File { path } => {
                crate::map::read_map_from_path(std::path::Path::new(path))?
            }
        })
    }
}

fn centered(extent: f64, resolution: f64, f: impl FnMut(f64, f64) -> f64) -> ElevationMap {
    let cells = (extent / resolution).round() as usize + 1;
    ElevationMap::from_fn(
        resolution,
        (-extent / 2.0, -extent / 2.0),
        cells,
        cells,
        f,
    )
}

/// Collection of slopes, steps, and platforms with additive uniform plus
/// Gaussian noise; a few cells are dropped to exercise inpainting.
fn demo_terrain(
    extent: f64,
    resolution: f64,
    seed: u64,
    uniform_noise: f64,
    gaussian_noise: f64,
) -> ElevationMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    let mut map = centered(extent, resolution, |x, y| {
        let mut z: f64 = 0.0;
        // central ramp
        if x > 0.5 && x < 2.0 {
            z += (x - 0.5) * 0.2;
        } else if x >= 2.0 {
            z += 0.3;
        }
        // stepped band in y
        if y > 1.0 {
            z += 0.15 * ((y - 1.0) / 0.5).floor().min(3.0);
        }
        // sunken square
        if x < -1.0 && x > -2.2 && y < -0.8 && y > -2.0 {
            z -= 0.25;
        }
        z
    });
    let (rows, cols) = (map.rows, map.cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = rng.random_range(-uniform_noise..=uniform_noise);
            let g: f64 = {
                // Box-Muller from two uniforms
                let a: f64 = rng.random_range(1e-12..1.0);
                let b: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                (-2.0 * a.ln()).sqrt() * b.cos() * gaussian_noise
            };
            let h = map.height(r, c) + u + g;
            map.set_height(r, c, h);
        }
    }
    // occlusions
    for _ in 0..(rows * cols / 200) {
        let r = rng.random_range(0..rows);
        let c = rng.random_range(0..cols);
        map.set_height(r, c, f64::NAN);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_is_flat() {
        let m = TerrainSpec::Flat {
            z: 0.0,
            extent: 2.0,
            resolution: 0.04,
        }
        .generate()
        .unwrap();
        assert!(m.heights().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn stairs_heights_form_bands() {
        let m = TerrainSpec::Stairs {
            rise: 0.185,
            run: 0.24,
            steps: 3,
            start: 0.5,
            extent: 4.0,
            resolution: 0.04,
        }
        .generate()
        .unwrap();
        let sample = |x: f64| m.interpolate_height(x, 0.0);
        assert_eq!(sample(0.0), 0.0);
        assert!((sample(0.62) - 0.185).abs() < 1e-12);
        assert!((sample(0.86) - 0.37).abs() < 1e-12);
        assert!((sample(1.10) - 0.555).abs() < 1e-12);
        // plateau after the last step
        assert!((sample(2.5) - 0.555).abs() < 1e-12);
    }

    #[test]
    fn box_plateau_height_is_exact() {
        let m = TerrainSpec::Box {
            height: 0.35,
            start: 1.0,
            length: 1.2,
            extent: 6.0,
            resolution: 0.04,
        }
        .generate()
        .unwrap();
        assert_eq!(m.interpolate_height(1.6, 0.0), 0.35);
        assert_eq!(m.interpolate_height(0.0, 0.0), 0.0);
        assert_eq!(m.interpolate_height(2.5, 0.0), 0.0);
    }

    #[test]
    fn demo_terrain_is_seed_deterministic() {
        let spec = TerrainSpec::Demo {
            extent: 2.0,
            resolution: 0.04,
            seed: 5,
            uniform_noise: 0.02,
            gaussian_noise: 0.02,
        };
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        for (x, y) in a.heights().iter().zip(b.heights()) {
            assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
        }
    }

    #[test]
    fn stepping_stones_have_floor_between() {
        let m = TerrainSpec::SteppingStones {
            pitch: 0.3,
            stone: 0.2,
            start: 0.5,
            length: 1.2,
            extent: 4.0,
            resolution: 0.04,
        }
        .generate()
        .unwrap();
        // stone centers sit at start + pitch/2 + k*pitch
        assert_eq!(m.interpolate_height(0.65, 0.15), 0.0);
        let mut saw_floor = false;
        for k in 0..30 {
            let x = 0.5 + k as f64 * 0.04;
            if m.interpolate_height(x, 0.0) < -0.4 {
                saw_floor = true;
            }
        }
        assert!(saw_floor, "trench floor must appear between stones");
    }
}
