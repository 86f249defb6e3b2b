//! Deterministic stock-and-flow simulation by fixed-step integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derivatives, ActiveCellTable, Derivative, ModelParams, Scenario, StateVector};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Euler,
    Rk4,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    /// Step length in years.
    pub dt: f64,
    pub method: Method,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub record_stride: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            dt: 0.01,
            method: Method::Rk4,
            t_end: 100.0,
            record_stride: 10,
        }
    }
}

impl IntegrationConfig {
    /// Config whose stride records one sample per `interval` years (at least every step).
    pub fn with_record_interval(dt: f64, method: Method, t_end: f64, interval: f64) -> Self {
        let record_stride = ((interval / dt).round() as usize).max(1);
        IntegrationConfig {
            dt,
            method,
            t_end,
            record_stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

fn advance(s: &StateVector, d: &Derivative, h: f64) -> StateVector {
    StateVector::new(s.t + h, s.n + h * d.dn, s.np + h * d.dnp, s.m + h * d.dm)
}

fn step(
    s: &StateVector,
    dt: f64,
    method: Method,
    params: &ModelParams,
    actives: &ActiveCellTable,
) -> StateVector {
    let f = |x: &StateVector| derivatives(x, params, actives);
    match method {
        Method::Euler => advance(s, &f(s), dt),
        Method::Rk4 => {
            let k1 = f(s);
            let k2 = f(&advance(s, &k1, dt / 2.0));
            let k3 = f(&advance(s, &k2, dt / 2.0));
            let k4 = f(&advance(s, &k3, dt));
            let w = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
            let avg = Derivative {
                dn: w(k1.dn, k2.dn, k3.dn, k4.dn),
                dnp: w(k1.dnp, k2.dnp, k3.dnp, k4.dnp),
                dm: w(k1.dm, k2.dm, k3.dm, k4.dm),
            };
            advance(s, &avg, dt)
        }
    }
}

/// Integrates `scenario` from `init` and records every `record_stride` steps.
///
/// Components pushed below zero by a step are clamped to zero. A non-finite
/// state aborts with [`Error::Numerical`] naming the step.
pub fn integrate(
    scenario: &Scenario,
    init: StateVector,
    actives: &ActiveCellTable,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    init.validate()?;
    scenario.params.validate()?;

    let params = &scenario.params;
    let steps = cfg.steps();
    let mut traj = Trajectory::with_capacity(cfg.dt * cfg.record_stride as f64, steps / cfg.record_stride + 1);
    let mut state = init;
    traj.push(state);

    for i in 1..=steps {
        let mut next = step(&state, cfg.dt, cfg.method, params, actives);
        // recompute from the index to keep the grid free of accumulated rounding
        next.t = init.t + i as f64 * cfg.dt;
        if !(next.n.is_finite() && next.np.is_finite() && next.m.is_finite()) {
            return Err(Error::Numerical {
                step: i,
                t: next.t,
                detail: format!("non-finite state {next:?}"),
            });
        }
        next.n = next.n.max(0.0);
        next.np = next.np.max(0.0);
        next.m = next.m.max(0.0);
        state = next;
        if i % cfg.record_stride == 0 {
            traj.push(state);
        }
    }
    Ok(traj)
}

/// Per-sample `N + Np`.
pub fn total_naive(traj: &Trajectory) -> Vec<f64> {
    traj.total_naive()
}
