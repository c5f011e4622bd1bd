//! Gait schedules: periodic per-leg contact patterns over absolute time.

use serde::{Deserialize, Serialize};

use crate::robot::NUM_LEGS;

/// Periodic gait template: per-leg phase offsets and duty factors over a
/// common cycle. Leg order is LF, RF, LH, RH.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaitPattern {
    pub name: String,
    /// Cycle duration [s].
    pub cycle: f64,
    /// Fraction of the cycle each leg is in contact.
    pub duty: [f64; NUM_LEGS],
    /// Phase offset of each leg's touchdown within the cycle.
    pub offsets: [f64; NUM_LEGS],
}

impl GaitPattern {
    /// Continuous stance (no swings).
    pub fn stance() -> Self {
        Self {
            name: "stance".into(),
            cycle: 1.0,
            duty: [1.0; 4],
            offsets: [0.0; 4],
        }
    }

    /// Diagonal pairs, 0.35 s stance / 0.35 s swing.
    pub fn trot() -> Self {
        Self {
            name: "trot".into(),
            cycle: 0.7,
            duty: [0.5; 4],
            offsets: [0.0, 0.5, 0.5, 0.0],
        }
    }

    /// Lateral pairs.
    pub fn pace() -> Self {
        Self {
            name: "pace".into(),
            cycle: 0.7,
            duty: [0.5; 4],
            offsets: [0.0, 0.5, 0.0, 0.5],
        }
    }

    /// One leg in swing at a time, high duty factor.
    pub fn static_walk() -> Self {
        Self {
            name: "static_walk".into(),
            cycle: 2.0,
            duty: [0.8; 4],
            offsets: [0.0, 0.5, 0.75, 0.25],
        }
    }

    pub fn dynamic_walk() -> Self {
        Self {
            name: "dynamic_walk".into(),
            cycle: 1.0,
            duty: [0.65; 4],
            offsets: [0.0, 0.5, 0.75, 0.25],
        }
    }

    pub fn gallop() -> Self {
        Self {
            name: "gallop".into(),
            cycle: 0.5,
            duty: [0.35; 4],
            offsets: [0.0, 0.1, 0.5, 0.6],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "stance" => Some(Self::stance()),
            "trot" => Some(Self::trot()),
            "pace" => Some(Self::pace()),
            "static_walk" => Some(Self::static_walk()),
            "dynamic_walk" => Some(Self::dynamic_walk()),
            "gallop" => Some(Self::gallop()),
            _ => None,
        }
    }
}

/// One contact or swing interval of a leg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseInterval {
    pub contact: bool,
    pub start: f64,
    pub end: f64,
}

/// Gait pattern anchored at an absolute start time.
#[derive(Clone, Debug)]
pub struct GaitSchedule {
    pub pattern: GaitPattern,
    pub start_time: f64,
}

impl GaitSchedule {
    pub fn new(pattern: GaitPattern, start_time: f64) -> Self {
        Self {
            pattern,
            start_time,
        }
    }

    fn leg_phase(&self, leg: usize, t: f64) -> f64 {
        let raw = (t - self.start_time) / self.pattern.cycle - self.pattern.offsets[leg];
        raw - raw.floor()
    }

    pub fn in_contact(&self, leg: usize, t: f64) -> bool {
        if self.pattern.duty[leg] >= 1.0 {
            return true;
        }
        self.leg_phase(leg, t) < self.pattern.duty[leg]
    }

    pub fn contacts_at(&self, t: f64) -> [bool; NUM_LEGS] {
        core::array::from_fn(|leg| self.in_contact(leg, t))
    }

    /// The phase interval containing `t` for one leg.
    pub fn phase_at(&self, leg: usize, t: f64) -> PhaseInterval {
        let duty = self.pattern.duty[leg];
        if duty >= 1.0 {
            return PhaseInterval {
                contact: true,
                start: f64::NEG_INFINITY,
                end: f64::INFINITY,
            };
        }
        let cycle = self.pattern.cycle;
        let phase = self.leg_phase(leg, t);
        // absolute time of this cycle's touchdown
        let touchdown = t - phase * cycle;
        if phase < duty {
            PhaseInterval {
                contact: true,
                start: touchdown,
                end: touchdown + duty * cycle,
            }
        } else {
            PhaseInterval {
                contact: false,
                start: touchdown + duty * cycle,
                end: touchdown + cycle,
            }
        }
    }

    /// Phase intervals of one leg clipped to `[t0, t1]`, in order.
    pub fn phases_in(&self, leg: usize, t0: f64, t1: f64) -> Vec<PhaseInterval> {
        let mut out = Vec::new();
        let mut t = t0;
        let eps = 1e-9;
        while t < t1 - eps {
            let ph = self.phase_at(leg, t);
            out.push(ph);
            if !ph.end.is_finite() {
                break;
            }
            t = ph.end + eps;
        }
        out
    }

    /// Sorted unique gait switch times strictly inside `(t0, t1)`.
    pub fn switch_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut times: Vec<f64> = Vec::new();
        for leg in 0..NUM_LEGS {
            if self.pattern.duty[leg] >= 1.0 {
                continue;
            }
            for ph in self.phases_in(leg, t0, t1) {
                for edge in [ph.start, ph.end] {
                    if edge > t0 + 1e-9 && edge < t1 - 1e-9 {
                        times.push(edge);
                    }
                }
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        times
    }
}
