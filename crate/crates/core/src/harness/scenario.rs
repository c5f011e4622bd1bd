//! Scenario files: robot model, gait, solver settings, commands, terrain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::terrain::TerrainSpec;
use crate::ocp::{BarrierParams, CostWeights};
use crate::reference::{CommandProfile, GaitPattern, GaitSchedule, ReferenceConfig};
use crate::robot::{LoopshapingFilter, QuadrupedModel};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown gait pattern {0:?}")]
    UnknownGait(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitSpec {
    pub pattern: String,
    pub start_time: f64,
    /// Optional overrides of the named template.
    pub cycle: Option<f64>,
    pub duty: Option<[f64; 4]>,
    pub offsets: Option<[f64; 4]>,
}

impl Default for GaitSpec {
    fn default() -> Self {
        Self {
            pattern: "trot".into(),
            start_time: 0.0,
            cycle: None,
            duty: None,
            offsets: None,
        }
    }
}

impl GaitSpec {
    pub fn schedule(&self) -> Result<GaitSchedule, ScenarioError> {
        let mut pattern = GaitPattern::by_name(&self.pattern)
            .ok_or_else(|| ScenarioError::UnknownGait(self.pattern.clone()))?;
        if let Some(c) = self.cycle {
            pattern.cycle = c;
        }
        if let Some(d) = self.duty {
            pattern.duty = d;
        }
        if let Some(o) = self.offsets {
            pattern.offsets = o;
        }
        Ok(GaitSchedule::new(pattern, self.start_time))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSpec {
    /// Prediction horizon [s].
    pub horizon: f64,
    /// Nominal node spacing [s].
    pub nominal_dt: f64,
    /// MPC update rate [Hz].
    pub mpc_rate: f64,
    /// Plant integration rate [Hz].
    pub plant_rate: f64,
    pub max_iterations: usize,
    pub convergence_tolerance: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            nominal_dt: 0.015,
            mpc_rate: 100.0,
            plant_rate: 400.0,
            max_iterations: 50,
            convergence_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub duration: f64,
    /// Constant disturbance wrench on the base `[moment, force]`.
    pub tau_dist: [f64; 6],
    pub seed: u64,
    /// Fall when the base drops below this height above the terrain [m].
    pub fall_height: f64,
    /// Fall when |roll| or |pitch| exceeds this angle [deg].
    pub fall_attitude_deg: f64,
    /// Initial base pose `(x, y, yaw)`.
    pub start: [f64; 3],
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            duration: 5.0,
            tau_dist: [0.0; 6],
            seed: 0,
            fall_height: 0.2,
            fall_attitude_deg: 60.0,
            start: [0.0, 0.0, 0.0],
        }
    }
}

/// Complete closed-loop scenario definition.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub terrain: TerrainSpec,
    pub model: QuadrupedModel,
    pub filter: LoopshapingFilter,
    pub weights: CostWeights,
    pub barriers: BarrierParams,
    pub gait: GaitSpec,
    pub solver: SolverSpec,
    pub reference: ReferenceConfig,
    pub commands: CommandProfile,
    pub run: RunSpec,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Flat-ground trot at the given speed; the workhorse test scenario.
    pub fn flat_trot(speed: f64, duration: f64) -> Self {
        Self {
            commands: CommandProfile::constant(speed, 0.0, 0.0),
            run: RunSpec {
                duration,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let s = Scenario::default();
        let text = s.to_toml_string();
        let back = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(back.solver.horizon, 1.0);
        assert_eq!(back.solver.nominal_dt, 0.015);
        assert_eq!(back.solver.mpc_rate, 100.0);
        assert_eq!(back.gait.pattern, "trot");
    }

    #[test]
    fn partial_files_use_defaults() {
        let s = Scenario::from_toml_str(
            r#"
            [terrain]
            kind = "stairs"
            rise = 0.185
            run = 0.24

            [gait]
            pattern = "static_walk"

            [commands]
            knots = [[0.0, 0.2, 0.0, 0.0]]
            "#,
        )
        .unwrap();
        assert_eq!(s.gait.pattern, "static_walk");
        assert_eq!(s.weights.base_position[2], 1500.0);
        match s.terrain {
            TerrainSpec::Stairs { rise, .. } => assert_eq!(rise, 0.185),
            other => panic!("wrong terrain {other:?}"),
        }
    }

    #[test]
    fn unknown_gait_is_an_error() {
        let spec = GaitSpec {
            pattern: "bound".into(),
            ..Default::default()
        };
        assert!(matches!(spec.schedule(), Err(ScenarioError::UnknownGait(_))));
    }
}
