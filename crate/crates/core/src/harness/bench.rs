//! Benchmarks and solver-mode comparisons.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::harness::scenario::Scenario;
use crate::harness::sim::{build_perception, run_on_perception, HarnessError, RunMetrics};
use crate::harness::terrain::TerrainSpec;
use crate::sdf::{build_sdf, preprocess_obstacles, WorldBox};
use crate::segmentation::SegmentationParams;
use crate::solver::SolveMode;

/// One row of the SDF construction benchmark.
#[derive(Clone, Debug)]
pub struct SdfBenchRow {
    pub voxels: usize,
    pub build_seconds: f64,
    /// Total time for 1000 interpolated value+gradient queries.
    pub query_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SdfBenchReport {
    pub rows: Vec<SdfBenchRow>,
    /// Log-log regression slope of build time over voxel count.
    pub slope: f64,
}

/// Build-time scaling over submaps of the demo terrain.
///
/// Targets are voxel counts; each row uses an `n x n x nz` grid cut from a
/// freshly generated terrain of matching extent.
pub fn benchmark_sdf(targets: &[usize]) -> Result<SdfBenchReport, HarnessError> {
    let mut rows = Vec::with_capacity(targets.len());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for &target in targets {
        // pick nz ~ n/3 capped, solve n^2 nz ~ target
        let mut n = (target as f64).powf(1.0 / 2.5).round() as usize;
        n = n.max(8);
        let nz = (target / (n * n)).max(2);
        let extent = (n - 1) as f64 * 0.04;
        let spec = TerrainSpec::Demo {
            extent,
            resolution: 0.04,
            seed: 7,
            uniform_noise: 0.02,
            gaussian_noise: 0.02,
        };
        let raw = spec.generate()?;
        let map = crate::map::median_filter(&crate::map::inpaint(&raw)?, 3)?;
        let map = crate::map::classify_steppability(&map);
        let stepp = map
            .layer(crate::map::LAYER_STEPPABILITY)
            .unwrap()
            .to_vec();
        let grid = preprocess_obstacles(&map, &stepp);
        let min_h = map.min_height();
        let z0 = min_h - 0.25;
        let z1 = z0 + (nz - 1) as f64 * 0.04;
        let bbox = WorldBox::new(
            [map.origin.0, map.origin.1, z0 + 0.25],
            [
                map.origin.0 + (map.cols - 1) as f64 * 0.04,
                map.origin.1 + (map.rows - 1) as f64 * 0.04,
                z1,
            ],
        );
        let t = Instant::now();
        let sdf = build_sdf(&grid, &bbox)?;
        let build_seconds = t.elapsed().as_secs_f64();
        // query batch
        let lo = sdf.origin;
        let hi = [
            sdf.origin[0] + (sdf.dims[0] - 1) as f64 * sdf.resolution,
            sdf.origin[1] + (sdf.dims[1] - 1) as f64 * sdf.resolution,
            sdf.origin[2] + (sdf.dims[2] - 1) as f64 * sdf.resolution,
        ];
        let points: Vec<[f64; 3]> = (0..1000)
            .map(|_| {
                [
                    rng.random_range(lo[0]..hi[0].max(lo[0] + 1e-9)),
                    rng.random_range(lo[1]..hi[1].max(lo[1] + 1e-9)),
                    rng.random_range(lo[2]..hi[2].max(lo[2] + 1e-9)),
                ]
            })
            .collect();
        let t = Instant::now();
        let mut acc = 0.0;
        for p in &points {
            let s = sdf.query(*p);
            acc += s.value + s.gradient[0];
        }
        let query_seconds = t.elapsed().as_secs_f64();
        std::hint::black_box(acc);
        rows.push(SdfBenchRow {
            voxels: sdf.voxel_count(),
            build_seconds,
            query_seconds,
        });
    }
    let slope = loglog_slope(
        &rows
            .iter()
            .map(|r| (r.voxels as f64, r.build_seconds))
            .collect::<Vec<_>>(),
    );
    Ok(SdfBenchReport { rows, slope })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Side-by-side closed-loop comparison of real-time iteration against the
/// converged baseline on the same scenario and terrain.
#[derive(Clone, Debug)]
pub struct CompareReport {
    pub rti: RunMetrics,
    pub baseline: RunMetrics,
}

impl CompareReport {
    pub fn cost_ratio(&self) -> f64 {
        self.rti.mean_cost / self.baseline.mean_cost
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<22} {:>14} {:>16}\n",
            "", "Baseline", "Multiple shooting"
        ));
        out.push_str(&format!(
            "{:<22} {:>14.4} {:>16.4}\n",
            "Cost", self.baseline.mean_cost, self.rti.mean_cost
        ));
        out.push_str(&format!(
            "{:<22} {:>14.3e} {:>16.3e}\n",
            "Dynamics Constr.",
            self.baseline.mean_dynamics_violation,
            self.rti.mean_dynamics_violation
        ));
        out.push_str(&format!(
            "{:<22} {:>14.3e} {:>16.3e}\n",
            "Equality Constr.",
            self.baseline.mean_equality_violation,
            self.rti.mean_equality_violation
        ));
        out.push_str(&format!("cost ratio (rti/baseline): {:.4}\n", self.cost_ratio()));
        out
    }
}

pub fn compare_modes(scenario: &Scenario) -> Result<CompareReport, HarnessError> {
    let raw = scenario.terrain.generate()?;
    let products = build_perception(&raw, &SegmentationParams::default(), 1.2)?;
    let rti = run_on_perception(scenario, SolveMode::RealTimeIteration, &products)?;
    let baseline = run_on_perception(scenario, SolveMode::Converged, &products)?;
    Ok(CompareReport {
        rti: rti.metrics,
        baseline: baseline.metrics,
    })
}
