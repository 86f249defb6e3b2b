//! Stochastic agent-based simulation.
//!
//! Each agent is one T cell in one of three states. Agents do not move or
//! interact; they only feel the population through the density-dependent
//! rates `g`, `h` and `s`, which are evaluated once per step from the
//! start-of-step counts.
//!
//! Within a step every agent is exposed to its state's competing hazards.
//! An agent that changes state, or is born by division, at some time inside
//! the step carries the remaining exposure into its new state, so a step is
//! an exact continuous-time simulation with the rates held constant.
//! Agents emitted by the thymus or by active→memory reversion are spread
//! uniformly over the step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    death_modifier, dilution, lookup_active, thymic_output, ActiveCellTable, Scenario,
    StateVector, INITIAL_NAIVE,
};
use crate::trajectory::Trajectory;

/// Name of the generator behind every replicate stream, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64(base_seed), stream = replicate index";

/// Above this many live agents a run is treated as diverging.
const MAX_AGENTS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum AgentState {
    Naive,
    NaiveFromProliferation,
    Memory,
}

impl AgentState {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agent {
    pub state: AgentState,
}

/// Where a new agent came from; decides its initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Thymus,
    Proliferation { parent: AgentState },
    ActiveReversion,
    MemoryReversion,
}

/// Initial state of a newly created agent.
pub fn newborn_state(origin: Origin) -> AgentState {
    match origin {
        Origin::Thymus => AgentState::Naive,
        Origin::Proliferation { parent } => parent,
        Origin::ActiveReversion => AgentState::Memory,
        Origin::MemoryReversion => AgentState::NaiveFromProliferation,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPopulation {
    agents: Vec<Agent>,
    thymic_reservoir: f64,
    memory_reservoir: f64,
}

impl AgentPopulation {
    pub fn new(agents: Vec<Agent>) -> Self {
        AgentPopulation {
            agents,
            thymic_reservoir: 0.0,
            memory_reservoir: 0.0,
        }
    }

    /// `naive` Naive agents, `np` NaiveFromProliferation agents and `m` Memory agents.
    pub fn with_counts(naive: usize, np: usize, m: usize) -> Self {
        let mut agents = Vec::with_capacity(naive + np + m);
        for (state, k) in [
            (AgentState::Naive, naive),
            (AgentState::NaiveFromProliferation, np),
            (AgentState::Memory, m),
        ] {
            agents.extend(std::iter::repeat_n(Agent { state }, k));
        }
        AgentPopulation::new(agents)
    }

    /// Newborn population: `round(3673·scale)` Naive agents.
    pub fn at_birth(scale: f64) -> Self {
        AgentPopulation::with_counts((INITIAL_NAIVE * scale).round() as usize, 0, 0)
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Agent counts by state: `[Naive, NaiveFromProliferation, Memory]`.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for a in &self.agents {
            c[a.state.index()] += 1;
        }
        c
    }

    fn densities(&self, t: f64, scale: f64) -> StateVector {
        let [n, np, m] = self.counts();
        StateVector::new(t, n as f64 / scale, np as f64 / scale, m as f64 / scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbmConfig {
    pub dt: f64,
    pub t_end: f64,
    pub replicates: usize,
    pub base_seed: u64,
    /// Agents per cell·mm⁻³.
    pub scale: f64,
    /// Steps between recorded samples.
    pub record_stride: usize,
}

impl Default for AbmConfig {
    fn default() -> Self {
        AbmConfig {
            dt: 0.01,
            t_end: 100.0,
            replicates: 50,
            base_seed: 42,
            scale: 1.0,
            record_stride: 10,
        }
    }
}

impl AbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(format!("scale must be positive, got {}", self.scale)));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be at least 1"));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

/// Probability that an event with constant hazard `rate` fires within `dt`.
pub fn hazard_to_prob(rate: f64, dt: f64) -> f64 {
    -(-rate * dt).exp_m1()
}

/// Event counts from one step, for bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepTally {
    pub thymic_births: usize,
    pub memory_births: usize,
    /// Deaths by state, indexed like [`AgentPopulation::counts`].
    pub deaths: [usize; 3],
    /// Naive → NaiveFromProliferation.
    pub conversions: usize,
    /// NaiveFromProliferation divisions.
    pub divisions: usize,
    /// Memory → NaiveFromProliferation.
    pub reversions: usize,
}

impl StepTally {
    /// Net change in each state's count implied by the tallied events.
    pub fn net_change(&self) -> [i64; 3] {
        let i = |x: usize| x as i64;
        [
            i(self.thymic_births) - i(self.deaths[0]) - i(self.conversions),
            i(self.conversions) + i(self.divisions) + i(self.reversions) - i(self.deaths[1]),
            i(self.memory_births) - i(self.deaths[2]) - i(self.reversions),
        ]
    }
}

/// Competing hazards for one state: death, and the state's other event.
#[derive(Debug, Clone, Copy)]
struct Hazards {
    death: f64,
    other: f64,
    total: f64,
    /// Event probability over a full step.
    p_step: f64,
}

impl Hazards {
    fn new(death: f64, other: f64, dt: f64) -> Self {
        let total = death + other;
        Hazards {
            death,
            other,
            total,
            p_step: hazard_to_prob(total, dt),
        }
    }
}

enum Fate {
    Survives,
    Dies,
    /// The non-death event fired with this fraction of the step left.
    Event(f64),
}

fn draw_fate<R: Rng>(hz: &Hazards, exposure: f64, dt: f64, rng: &mut R) -> Fate {
    let p = if exposure >= 1.0 {
        hz.p_step
    } else {
        hazard_to_prob(hz.total, exposure * dt)
    };
    let u: f64 = rng.random();
    if u >= p {
        return Fate::Survives;
    }
    if hz.other == 0.0 || rng.random::<f64>() * hz.total < hz.death {
        return Fate::Dies;
    }
    // invert the exponential waiting time: u < p puts it inside the exposure window
    let elapsed = -(-u).ln_1p() / hz.total;
    Fate::Event((exposure - elapsed / dt).max(0.0))
}

/// Advances the population by one step of `cfg.dt` starting at time `t`.
pub fn step_population<R: Rng>(
    pop: &mut AgentPopulation,
    t: f64,
    scenario: &Scenario,
    actives: &ActiveCellTable,
    cfg: &AbmConfig,
    rng: &mut R,
) -> StepTally {
    let p = &scenario.params;
    let dt = cfg.dt;
    let dens = pop.densities(t, cfg.scale);
    let hazards = [
        Hazards::new(p.mu_n * death_modifier(dens.np, p), p.lambda_n, dt),
        Hazards::new(p.mu_np, p.c * dilution(dens.n, dens.np, p), dt),
        Hazards::new(p.mu_m, p.lambda_mn, dt),
    ];
    let mut tally = StepTally::default();

    pop.thymic_reservoir += thymic_output(t, dens.np, p) * dt * cfg.scale;
    pop.memory_reservoir += p.lambda_a * lookup_active(t, actives) * dt * cfg.scale;
    let thymic = pop.thymic_reservoir.floor();
    let memory = pop.memory_reservoir.floor();
    pop.thymic_reservoir -= thymic;
    pop.memory_reservoir -= memory;
    tally.thymic_births = thymic as usize;
    tally.memory_births = memory as usize;

    let mut next = Vec::with_capacity(pop.agents.len() + tally.thymic_births + tally.memory_births);
    // agents entering a state part-way through the step, with their remaining exposure
    let mut pending: Vec<(AgentState, f64)> = Vec::new();
    for (origin, k) in [
        (Origin::Thymus, tally.thymic_births),
        (Origin::ActiveReversion, tally.memory_births),
    ] {
        let state = newborn_state(origin);
        for _ in 0..k {
            let exposure = 1.0 - rng.random::<f64>();
            pending.push((state, exposure));
        }
    }

    let resolve = |state: AgentState,
                       exposure: f64,
                       rng: &mut R,
                       next: &mut Vec<Agent>,
                       pending: &mut Vec<(AgentState, f64)>,
                       tally: &mut StepTally| {
        match draw_fate(&hazards[state.index()], exposure, dt, rng) {
            Fate::Survives => next.push(Agent { state }),
            Fate::Dies => tally.deaths[state.index()] += 1,
            Fate::Event(left) => match state {
                AgentState::Naive => {
                    tally.conversions += 1;
                    pending.push((AgentState::NaiveFromProliferation, left));
                }
                AgentState::NaiveFromProliferation => {
                    tally.divisions += 1;
                    let child = newborn_state(Origin::Proliferation { parent: state });
                    pending.push((state, left));
                    pending.push((child, left));
                }
                AgentState::Memory => {
                    tally.reversions += 1;
                    pending.push((newborn_state(Origin::MemoryReversion), left));
                }
            },
        }
    };

    for agent in &pop.agents {
        resolve(agent.state, 1.0, rng, &mut next, &mut pending, &mut tally);
    }
    while let Some((state, exposure)) = pending.pop() {
        resolve(state, exposure, rng, &mut next, &mut pending, &mut tally);
    }

    pop.agents = next;
    tally
}

/// Runs one replicate and records densities (counts / scale).
pub fn run_single<R: Rng>(
    scenario: &Scenario,
    actives: &ActiveCellTable,
    cfg: &AbmConfig,
    initial: &AgentPopulation,
    rng: &mut R,
) -> Result<Trajectory> {
    let steps = cfg.steps();
    let mut pop = initial.clone();
    let mut traj = Trajectory::with_capacity(cfg.dt * cfg.record_stride as f64, steps / cfg.record_stride + 1);
    traj.push(pop.densities(0.0, cfg.scale));
    for i in 0..steps {
        let t = i as f64 * cfg.dt;
        step_population(&mut pop, t, scenario, actives, cfg, rng);
        if pop.len() > MAX_AGENTS {
            return Err(Error::Numerical {
                step: i + 1,
                t: t + cfg.dt,
                detail: format!("population diverged to {} agents", pop.len()),
            });
        }
        if (i + 1) % cfg.record_stride == 0 {
            traj.push(pop.densities((i + 1) as f64 * cfg.dt, cfg.scale));
        }
    }
    Ok(traj)
}

/// Deterministic, independent generator for replicate `r`.
pub fn replicate_rng(base_seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(r as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub trajectories: Vec<Trajectory>,
    pub mean: Trajectory,
}

/// Runs `cfg.replicates` independent replicates from the newborn population.
pub fn run_replicates(
    scenario: &Scenario,
    actives: &ActiveCellTable,
    cfg: &AbmConfig,
) -> Result<ReplicateSet> {
    run_replicates_from(scenario, actives, cfg, &AgentPopulation::at_birth(cfg.scale))
}

/// Like [`run_replicates`] with an explicit starting population.
pub fn run_replicates_from(
    scenario: &Scenario,
    actives: &ActiveCellTable,
    cfg: &AbmConfig,
    initial: &AgentPopulation,
) -> Result<ReplicateSet> {
    cfg.validate()?;
    scenario.params.validate()?;
    let trajectories = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.base_seed, r);
            run_single(scenario, actives, cfg, initial, &mut rng).map_err(|e| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = Trajectory::mean_of(&trajectories)?;
    Ok(ReplicateSet { trajectories, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{scenario_params, ModelParams};
    use approx::assert_relative_eq;

    fn null_scenario() -> Scenario {
        Scenario {
            id: 0,
            description: "null",
            params: ModelParams::null(),
        }
    }

    #[test]
    fn hazard_examples() {
        assert_eq!(hazard_to_prob(0.0, 0.01), 0.0);
        assert_relative_eq!(hazard_to_prob(std::f64::consts::LN_2, 1.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(hazard_to_prob(4.4, 0.01), 1.0 - (-0.044f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(hazard_to_prob(4.4, 0.01), 0.043046, epsilon = 1e-6);
    }

    #[test]
    fn newborn_states_follow_origin() {
        assert_eq!(newborn_state(Origin::Thymus), AgentState::Naive);
        assert_eq!(newborn_state(Origin::ActiveReversion), AgentState::Memory);
        assert_eq!(newborn_state(Origin::MemoryReversion), AgentState::NaiveFromProliferation);
        for parent in [AgentState::Naive, AgentState::NaiveFromProliferation, AgentState::Memory] {
            assert_eq!(newborn_state(Origin::Proliferation { parent }), parent);
        }
    }

    #[test]
    fn null_step_leaves_population_unchanged() {
        let sc = null_scenario();
        let actives = ActiveCellTable::constant(0.0).unwrap();
        let cfg = AbmConfig::default();
        let mut pop = AgentPopulation::with_counts(10, 20, 30);
        let mut rng = replicate_rng(1, 0);
        for i in 0..100 {
            let tally = step_population(&mut pop, i as f64 * cfg.dt, &sc, &actives, &cfg, &mut rng);
            assert_eq!(tally, StepTally::default());
        }
        assert_eq!(pop.counts(), [10, 20, 30]);
    }

    #[test]
    fn tallies_account_for_every_count_change() {
        let sc = scenario_params(1).unwrap();
        let actives = crate::data::placeholder_active_table();
        let cfg = AbmConfig { dt: 0.05, ..Default::default() };
        let mut pop = AgentPopulation::with_counts(3000, 500, 400);
        let mut rng = replicate_rng(9, 3);
        for i in 0..200 {
            let before = pop.counts();
            let tally = step_population(&mut pop, i as f64 * cfg.dt, &sc, &actives, &cfg, &mut rng);
            let after = pop.counts();
            let net = tally.net_change();
            for k in 0..3 {
                assert_eq!(after[k] as i64 - before[k] as i64, net[k], "state {k} at step {i}");
            }
        }
        let mut total_events = StepTally::default();
        let sc2 = scenario_params(2).unwrap();
        for i in 0..50 {
            let t = step_population(&mut pop, i as f64 * cfg.dt, &sc2, &actives, &cfg, &mut rng);
            total_events.divisions += t.divisions;
        }
        assert!(total_events.divisions > 0);
    }

    #[test]
    fn reservoir_emits_fractional_spawns_without_bias() {
        // 0.25 agents per step must become exactly 25 agents over 100 steps
        let mut params = ModelParams::null();
        params.lambda_a = 1.0;
        let sc = Scenario { id: 0, description: "memory source", params };
        let actives = ActiveCellTable::constant(25.0).unwrap();
        let cfg = AbmConfig::default();
        let mut pop = AgentPopulation::new(vec![]);
        let mut rng = replicate_rng(0, 0);
        for i in 0..100 {
            step_population(&mut pop, i as f64 * cfg.dt, &sc, &actives, &cfg, &mut rng);
        }
        assert_eq!(pop.counts(), [0, 0, 25]);
    }

    #[test]
    fn pure_birth_death_mean_matches_expectation() {
        // single Memory cohort, death only: E[count(t)] = n0·e^{-μ t}
        let mut params = ModelParams::null();
        params.mu_m = 0.5;
        let sc = Scenario { id: 0, description: "decay", params };
        let actives = ActiveCellTable::constant(0.0).unwrap();
        let cfg = AbmConfig { t_end: 2.0, replicates: 20, ..Default::default() };
        let set = run_replicates_from(&sc, &actives, &cfg, &AgentPopulation::with_counts(0, 0, 2000)).unwrap();
        let expected = 2000.0 * (-1.0f64).exp();
        let got = set.mean.last().m;
        // binomial sd of the 20-replicate mean ≈ 4.8
        assert!((got - expected).abs() < 20.0, "{got} vs {expected}");
    }

    #[test]
    fn replicates_are_reproducible_and_distinct() {
        let sc = scenario_params(3).unwrap();
        let actives = crate::data::placeholder_active_table();
        let cfg = AbmConfig { t_end: 5.0, replicates: 3, base_seed: 7, ..Default::default() };
        let a = run_replicates(&sc, &actives, &cfg).unwrap();
        let b = run_replicates(&sc, &actives, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.trajectories[0], a.trajectories[1]);
        assert_eq!(a.trajectories.len(), 3);
        assert_eq!(a.mean.len(), 51);
    }

    #[test]
    fn counts_are_restored_to_density_units() {
        let sc = null_scenario();
        let actives = ActiveCellTable::constant(0.0).unwrap();
        let cfg = AbmConfig { t_end: 1.0, replicates: 1, scale: 4.0, ..Default::default() };
        let set = run_replicates(&sc, &actives, &cfg).unwrap();
        assert_eq!(set.mean.samples()[0].n, 3673.0);
        assert_eq!(set.mean.last().n, 3673.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let sc = scenario_params(1).unwrap();
        let actives = ActiveCellTable::constant(0.0).unwrap();
        for cfg in [
            AbmConfig { replicates: 0, ..Default::default() },
            AbmConfig { scale: 0.0, ..Default::default() },
            AbmConfig { dt: -0.1, ..Default::default() },
        ] {
            assert!(matches!(run_replicates(&sc, &actives, &cfg), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn divergence_carries_replicate_index() {
        let mut params = ModelParams::null();
        params.c = 100.0;
        params.n_bar_p = 1e12;
        params.peripheral_proliferation = true;
        let sc = Scenario { id: 0, description: "runaway", params };
        let actives = ActiveCellTable::constant(0.0).unwrap();
        let cfg = AbmConfig { t_end: 1.0, replicates: 2, dt: 0.01, ..Default::default() };
        let err = run_replicates_from(&sc, &actives, &cfg, &AgentPopulation::with_counts(0, 50, 0)).unwrap_err();
        assert!(err.is_numerical(), "{err}");
        assert!(matches!(err, Error::Replicate { .. }));
    }
}
