use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StateVector;

/// Which recorded series to read out of a [`Trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    N,
    Np,
    M,
    Total,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::N, Quantity::Np, Quantity::M, Quantity::Total];

    pub fn of(self, s: &StateVector) -> f64 {
        match self {
            Quantity::N => s.n,
            Quantity::Np => s.np,
            Quantity::M => s.m,
            Quantity::Total => s.total_naive(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::N => "naive_thymus",
            Quantity::Np => "naive_prolif",
            Quantity::M => "memory",
            Quantity::Total => "total_naive",
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "naive_thymus" => Ok(Quantity::N),
            "np" | "naive_prolif" => Ok(Quantity::Np),
            "m" | "memory" => Ok(Quantity::M),
            "total" | "total_naive" => Ok(Quantity::Total),
            other => Err(Error::invalid(format!("unknown quantity '{other}'"))),
        }
    }
}

/// Densities on a uniform time grid `t_i = i·spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    spacing: f64,
    samples: Vec<StateVector>,
}

impl Trajectory {
    pub(crate) fn with_capacity(spacing: f64, capacity: usize) -> Self {
        Trajectory {
            spacing,
            samples: Vec::with_capacity(capacity),
        }
    }

    /// Builds a trajectory from samples, checking the grid is uniform from `t = 0`
    /// and every density is non-negative.
    pub fn from_samples(samples: Vec<StateVector>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("trajectory has no samples"));
        }
        let spacing = if samples.len() > 1 { samples[1].t - samples[0].t } else { 1.0 };
        if spacing <= 0.0 {
            return Err(Error::invalid("trajectory times must be strictly increasing"));
        }
        for (i, s) in samples.iter().enumerate() {
            s.validate()?;
            let expected = i as f64 * spacing + samples[0].t;
            if (s.t - expected).abs() > 1e-6 * spacing.max(1.0) {
                return Err(Error::invalid(format!(
                    "sample {i} at t = {} breaks the uniform grid (expected {expected})",
                    s.t
                )));
            }
        }
        Ok(Trajectory { spacing, samples })
    }

    pub(crate) fn push(&mut self, s: StateVector) {
        self.samples.push(s);
    }

    pub fn samples(&self) -> &[StateVector] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn last(&self) -> &StateVector {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn series(&self, q: Quantity) -> Vec<f64> {
        self.samples.iter().map(|s| q.of(s)).collect()
    }

    /// Per-sample `N + Np`.
    pub fn total_naive(&self) -> Vec<f64> {
        self.series(Quantity::Total)
    }

    /// Linear interpolation of the state at `t`, clamped to the recorded range.
    pub fn state_at(&self, t: f64) -> StateVector {
        let first = self.samples[0];
        let pos = ((t - first.t) / self.spacing).max(0.0);
        let i = pos.floor() as usize;
        if i + 1 >= self.samples.len() {
            return *self.last();
        }
        let w = pos - i as f64;
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        let lerp = |x: f64, y: f64| x + (y - x) * w;
        StateVector::new(t, lerp(a.n, b.n), lerp(a.np, b.np), lerp(a.m, b.m))
    }

    /// The chosen quantity at whole years `0, 1, …, floor(t_end)`.
    pub fn annual_series(&self, q: Quantity) -> Vec<f64> {
        let years = (self.last().t + 1e-9).floor() as usize;
        (0..=years).map(|y| q.of(&self.state_at(y as f64))).collect()
    }

    /// True when both trajectories sit on the same time grid.
    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.samples.len() == other.samples.len()
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .all(|(a, b)| (a.t - b.t).abs() <= 1e-9 * a.t.abs().max(1.0))
    }

    /// Pointwise mean of trajectories sharing one grid.
    pub fn mean_of(trajectories: &[Trajectory]) -> Result<Trajectory> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::invalid("cannot average zero trajectories"))?;
        if let Some(bad) = trajectories.iter().position(|t| !t.same_grid(first)) {
            return Err(Error::invalid(format!("trajectory {bad} is on a different grid")));
        }
        let k = trajectories.len() as f64;
        let mut out = Trajectory::with_capacity(first.spacing, first.len());
        for i in 0..first.len() {
            let (mut n, mut np, mut m) = (0.0, 0.0, 0.0);
            for tr in trajectories {
                let s = &tr.samples[i];
                n += s.n;
                np += s.np;
                m += s.m;
            }
            out.push(StateVector::new(first.samples[i].t, n / k, np / k, m / k));
        }
        Ok(out)
    }
}
