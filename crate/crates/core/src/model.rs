//! Population model of naive T cell maintenance.
//!
//! Three tracked populations: thymus-derived naive cells `N`, naive cells
//! that have undergone peripheral proliferation `Np`, and memory cells `M`.
//! Activated cells `A` are not integrated; they are read from an
//! [`ActiveCellTable`] as an exogenous forcing term.
//!
//! ```text
//! dN/dt  = s0·exp(−λt·t)·s(Np) − [λn + μn·g(Np)]·N
//! dNp/dt = λn·N + [c·h(N, Np) − μNp]·Np + λmn·M
//! dM/dt  = λa·A(t) − μm·M − λmn·M
//! ```
//!
//! Every function here is pure; both simulation engines share them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thymic output at birth, cells·mm⁻³·year⁻¹.
pub const THYMIC_OUTPUT_AT_BIRTH: f64 = 56615.0;
/// Thymic-naive death rate μn, year⁻¹.
pub const NAIVE_DEATH_RATE: f64 = 4.4;
/// Memory death rate μm, year⁻¹.
pub const MEMORY_DEATH_RATE: f64 = 0.05;
/// Active→memory reversion rate λa, year⁻¹.
pub const ACTIVE_TO_MEMORY_RATE: f64 = 1.0;
/// Thymus-derived naive density at birth, cells·mm⁻³.
pub const INITIAL_NAIVE: f64 = 3673.0;
/// Total naive density the proliferation rate is tuned to sustain, cells·mm⁻³.
const PROLIFERATION_SETPOINT: f64 = 300.0;

/// Thymic involution rate λt: output halves every 15.7 years.
pub fn thymic_decay_rate() -> f64 {
    std::f64::consts::LN_2 / 15.7
}

/// Rates and constants of the model. All rates are per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub s0: f64,
    pub lambda_t: f64,
    pub lambda_n: f64,
    pub mu_n: f64,
    pub mu_np: f64,
    pub c: f64,
    pub lambda_mn: f64,
    pub mu_m: f64,
    pub lambda_a: f64,
    pub n_bar_p: f64,
    pub s_bar: f64,
    pub b: f64,
    /// Whether naive cells proliferate in the periphery at all; when false `c` is 0.
    pub peripheral_proliferation: bool,
}

impl ModelParams {
    /// A parameter set with every rate and source at zero. `n_bar_p` is 1 so the
    /// modifier functions stay defined.
    pub fn null() -> Self {
        ModelParams {
            s0: 0.0,
            lambda_t: 0.0,
            lambda_n: 0.0,
            mu_n: 0.0,
            mu_np: 0.0,
            c: 0.0,
            lambda_mn: 0.0,
            mu_m: 0.0,
            lambda_a: 0.0,
            n_bar_p: 1.0,
            s_bar: 0.0,
            b: 0.0,
            peripheral_proliferation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("s0", self.s0),
            ("lambda_t", self.lambda_t),
            ("lambda_n", self.lambda_n),
            ("mu_n", self.mu_n),
            ("mu_np", self.mu_np),
            ("c", self.c),
            ("lambda_mn", self.lambda_mn),
            ("mu_m", self.mu_m),
            ("lambda_a", self.lambda_a),
            ("n_bar_p", self.n_bar_p),
            ("s_bar", self.s_bar),
            ("b", self.b),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(format!(
                    "parameter {name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if self.n_bar_p <= 0.0 {
            return Err(Error::invalid("parameter n_bar_p must be positive"));
        }
        Ok(())
    }
}

/// Instantaneous cell densities (cells·mm⁻³) at time `t` (years).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub t: f64,
    pub n: f64,
    pub np: f64,
    pub m: f64,
}

impl StateVector {
    pub fn new(t: f64, n: f64, np: f64, m: f64) -> Self {
        StateVector { t, n, np, m }
    }

    /// Newborn state: all naive cells are thymus-derived.
    pub fn at_birth() -> Self {
        StateVector::new(0.0, INITIAL_NAIVE, 0.0, 0.0)
    }

    pub fn total_naive(&self) -> f64 {
        self.n + self.np
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.t) && ok(self.n) && ok(self.np) && ok(self.m) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "state densities and time must be finite and non-negative: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub id: u8,
    pub description: &'static str,
    pub params: ModelParams,
}

/// Right-hand side of the model at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub dn: f64,
    pub dnp: f64,
    pub dm: f64,
}

/// Age → activated cell density lookup, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveCellTable {
    points: Vec<(f64, f64)>,
    placeholder: bool,
}

impl ActiveCellTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("active cell table is empty".into()));
        }
        for (i, &(age, count)) in points.iter().enumerate() {
            if !age.is_finite() || !count.is_finite() {
                return Err(Error::Domain(format!("non-finite entry at row {i}")));
            }
            if count < 0.0 {
                return Err(Error::Domain(format!(
                    "negative active count {count} at age {age}"
                )));
            }
            if i > 0 && age <= points[i - 1].0 {
                return Err(Error::Domain(format!(
                    "ages must be strictly increasing: {} then {age}",
                    points[i - 1].0
                )));
            }
        }
        Ok(ActiveCellTable {
            points,
            placeholder: false,
        })
    }

    /// A table with the same count at every age.
    pub fn constant(count: f64) -> Result<Self> {
        Self::new(vec![(0.0, count)])
    }

    pub fn with_placeholder(mut self, placeholder: bool) -> Self {
        self.placeholder = placeholder;
        self
    }

    /// True when the table is stand-in data rather than measurements.
    pub fn is_placeholder(&self) -> bool {
        self.placeholder
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Homeostatic reduction of thymic export, `s(Np) = 1 / (1 + s̄·Np/N̄p)`.
pub fn export_modifier(np: f64, params: &ModelParams) -> f64 {
    1.0 / (1.0 + params.s_bar * np / params.n_bar_p)
}

/// Death-rate multiplier for thymic naive cells, `g(Np)`, in `[1, 1 + b)`.
pub fn death_modifier(np: f64, params: &ModelParams) -> f64 {
    let ratio = np / params.n_bar_p;
    1.0 + (params.b * ratio) / (1.0 + ratio)
}

/// Dilution of proliferation with total naive density, `h(N, Np)`.
pub fn dilution(n: f64, np: f64, params: &ModelParams) -> f64 {
    1.0 / (1.0 + (n + np) / params.n_bar_p)
}

/// Cells leaving the thymus per year at age `t`.
pub fn thymic_output(t: f64, np: f64, params: &ModelParams) -> f64 {
    params.s0 * (-params.lambda_t * t).exp() * export_modifier(np, params)
}

/// Peripheral proliferation rate `c = μn·(1 + 300/N̄p)`, or 0 when proliferation is off.
pub fn proliferation_c(params: &ModelParams) -> f64 {
    if params.peripheral_proliferation {
        params.mu_n * (1.0 + PROLIFERATION_SETPOINT / params.n_bar_p)
    } else {
        0.0
    }
}

/// Activated cell density at age `t`: piecewise linear between knots,
/// constant beyond either end.
pub fn lookup_active(t: f64, actives: &ActiveCellTable) -> f64 {
    let pts = &actives.points;
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    // first index with age > t; t is strictly inside the table here
    let hi = pts.partition_point(|&(age, _)| age <= t);
    let (a0, c0) = pts[hi - 1];
    let (a1, c1) = pts[hi];
    c0 + (c1 - c0) * (t - a0) / (a1 - a0)
}

pub fn derivatives(
    state: &StateVector,
    params: &ModelParams,
    actives: &ActiveCellTable,
) -> Derivative {
    let StateVector { t, n, np, m } = *state;
    let g = death_modifier(np, params);
    let h = dilution(n, np, params);
    let a = lookup_active(t, actives);

    Derivative {
        dn: thymic_output(t, np, params) - (params.lambda_n + params.mu_n * g) * n,
        dnp: params.lambda_n * n + (params.c * h - params.mu_np) * np + params.lambda_mn * m,
        dm: params.lambda_a * a - params.mu_m * m - params.lambda_mn * m,
    }
}

struct ScenarioRow {
    description: &'static str,
    lambda_n: f64,
    lambda_mn: f64,
    n_bar_p: f64,
    s_bar: f64,
    b: f64,
    mu_np: f64,
    proliferation: bool,
}

const SCENARIO_ROWS: [ScenarioRow; 5] = [
    ScenarioRow {
        description: "No peripheral proliferation",
        lambda_n: 0.22,
        lambda_mn: 0.05,
        n_bar_p: 387.0,
        s_bar: 0.48,
        b: 3.4,
        mu_np: 0.13,
        proliferation: false,
    },
    ScenarioRow {
        description: "No homeostatic reduction in thymic export, no homeostatic alteration of naive death rate",
        lambda_n: 2.1,
        lambda_mn: 0.0,
        n_bar_p: 713.0,
        s_bar: 0.0,
        b: 0.0,
        mu_np: 4.4,
        proliferation: true,
    },
    ScenarioRow {
        description: "Homeostatic alteration of naive death rate but not thymic export",
        lambda_n: 0.003,
        lambda_mn: 0.0,
        n_bar_p: 392.0,
        s_bar: 0.0,
        b: 4.2,
        mu_np: 4.4,
        proliferation: true,
    },
    ScenarioRow {
        description: "Homeostatic alteration of thymic export but no naive death rate",
        lambda_n: 0.005,
        lambda_mn: 0.0,
        n_bar_p: 378.0,
        s_bar: 2.4,
        b: 0.0,
        mu_np: 4.4,
        proliferation: true,
    },
    ScenarioRow {
        description: "No restrictions",
        lambda_n: 0.005,
        lambda_mn: 0.0,
        n_bar_p: 378.0,
        s_bar: 2.2,
        // equals scenario 1's mu_np; kept as published
        b: 0.13,
        mu_np: 4.4,
        proliferation: true,
    },
];

pub const SCENARIO_IDS: [u8; 5] = [1, 2, 3, 4, 5];

/// One of the five published parameter sets, merged with the shared constants.
pub fn scenario_params(id: u8) -> Result<Scenario> {
    let row = match id {
        1..=5 => &SCENARIO_ROWS[usize::from(id) - 1],
        _ => {
            return Err(Error::invalid(format!(
                "unknown scenario {id}; expected 1 to 5"
            )))
        }
    };
    let mut params = ModelParams {
        s0: THYMIC_OUTPUT_AT_BIRTH,
        lambda_t: thymic_decay_rate(),
        lambda_n: row.lambda_n,
        mu_n: NAIVE_DEATH_RATE,
        mu_np: row.mu_np,
        c: 0.0,
        lambda_mn: row.lambda_mn,
        mu_m: MEMORY_DEATH_RATE,
        lambda_a: ACTIVE_TO_MEMORY_RATE,
        n_bar_p: row.n_bar_p,
        s_bar: row.s_bar,
        b: row.b,
        peripheral_proliferation: row.proliferation,
    };
    params.c = proliferation_c(&params);
    Ok(Scenario {
        id,
        description: row.description,
        params,
    })
}
