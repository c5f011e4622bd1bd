//! Shooting node grids aligned with gait transitions.

/// Node times over one horizon. Every gait switch coincides with a node;
/// between anchors the spacing stays within [0.5, 1.5] of the nominal step.
#[derive(Clone, Debug)]
pub struct NodeGrid {
    pub times: Vec<f64>,
    pub nominal_dt: f64,
}

impl NodeGrid {
    /// Build the grid for `[t0, t0 + horizon]` with the given interior
    /// switch times (sorted, strictly inside the horizon).
    pub fn new(t0: f64, horizon: f64, nominal_dt: f64, switches: &[f64]) -> Self {
        let mut anchors = Vec::with_capacity(switches.len() + 2);
        anchors.push(t0);
        for &s in switches {
            if s > t0 + 1e-9 && s < t0 + horizon - 1e-9 {
                anchors.push(s);
            }
        }
        anchors.push(t0 + horizon);
        let mut times = Vec::new();
        for w in anchors.windows(2) {
            let gap = w[1] - w[0];
            let k = ((gap / nominal_dt).round() as usize).max(1);
            for i in 0..k {
                times.push(w[0] + gap * i as f64 / k as f64);
            }
        }
        times.push(t0 + horizon);
        Self { times, nominal_dt }
    }

    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the interval containing `t`.
    pub fn interval_of(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|a| a.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.intervals() - 1),
            Err(i) => i.saturating_sub(1).min(self.intervals() - 1),
        }
    }
}
