//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::abm::{self, AbmConfig, ReplicateSet, RNG_ALGORITHM};
use crate::data::{self, DatasetId, Manifest};
use crate::error::{Error, Result};
use crate::model::{scenario_params, ActiveCellTable, Scenario, StateVector, SCENARIO_IDS};
use crate::ode::{self, IntegrationConfig, Method};
use crate::plot::{self, Chart, Series};
use crate::stats::{compare_trajectories, Comparison};
use crate::trajectory::{Quantity, Trajectory};

pub const OUT_DIR_ENV: &str = "TCELLSIM_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "tcellsim", version, about = "Naive T cell depletion: stock-and-flow and agent-based simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario under one or both engines.
    Run {
        #[arg(long)]
        scenario: u8,
        #[arg(long, value_enum, default_value_t = Engine::Ode)]
        engine: Engine,
        #[command(flatten)]
        opts: SimOpts,
    },
    /// Compare the engines on annual samples of every quantity.
    Compare {
        /// Scenario to compare; repeat for several. Defaults to all five.
        #[arg(long)]
        scenario: Vec<u8>,
        #[command(flatten)]
        opts: SimOpts,
    },
    /// Overlay simulated thymic-naive decline on TREC validation data.
    Validate {
        #[arg(long)]
        scenario: u8,
        #[arg(long, value_enum, default_value_t = Engine::Ode)]
        engine: Engine,
        /// murray, lorenzi, or both
        #[arg(long, default_value = "both")]
        dataset: String,
        #[command(flatten)]
        opts: SimOpts,
    },
    /// Print the built-in TREC validation tables.
    Datasets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Ode,
    Abm,
    Both,
}

impl Engine {
    fn name(self) -> &'static str {
        match self {
            Engine::Ode => "ode",
            Engine::Abm => "abm",
            Engine::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimOpts {
    /// Step length in years (both engines).
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long = "t-end", default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Agents per cell/mm^3.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Recorded sample spacing in years.
    #[arg(long = "record-every", default_value_t = 0.1)]
    pub record_every: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    /// Active-cell table (CSV). Without it the built-in placeholder table is used.
    #[arg(long)]
    pub actives: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Euler,
    Rk4,
}

impl SimOpts {
    fn stride(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("--dt must be positive, got {}", self.dt)));
        }
        if !(self.record_every.is_finite() && self.record_every > 0.0) {
            return Err(Error::invalid("--record-every must be positive"));
        }
        Ok(((self.record_every / self.dt).round() as usize).max(1))
    }

    pub fn integration(&self) -> Result<IntegrationConfig> {
        let method = match self.method {
            MethodArg::Euler => Method::Euler,
            MethodArg::Rk4 => Method::Rk4,
        };
        let cfg = IntegrationConfig {
            dt: self.dt,
            method,
            t_end: self.t_end,
            record_stride: self.stride()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn abm(&self) -> Result<AbmConfig> {
        let cfg = AbmConfig {
            dt: self.dt,
            t_end: self.t_end,
            replicates: self.replicates,
            base_seed: self.seed,
            scale: self.scale,
            record_stride: self.stride()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn actives(&self) -> Result<(ActiveCellTable, String)> {
        match &self.actives {
            Some(p) => Ok((data::load_active_table(p)?, p.display().to_string())),
            None => Ok((data::placeholder_active_table(), "builtin-placeholder".into())),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else if err.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { scenario, engine, opts } => cmd_run(*scenario, *engine, opts).map(|_| ()),
        Command::Compare { scenario, opts } => {
            let ids = if scenario.is_empty() { SCENARIO_IDS.to_vec() } else { scenario.clone() };
            cmd_compare(&ids, opts).map(|_| ())
        }
        Command::Validate { scenario, engine, dataset, opts } => cmd_validate(*scenario, *engine, dataset, opts).map(|_| ()),
        Command::Datasets => {
            let (a, b) = data::builtin_datasets();
            print!("{}\n{}", data::format_dataset(&a), data::format_dataset(&b));
            Ok(())
        }
    }
}

struct EngineRuns {
    ode: Option<Trajectory>,
    abm: Option<ReplicateSet>,
}

fn simulate(scenario: &Scenario, engine: Engine, opts: &SimOpts, actives: &ActiveCellTable) -> Result<EngineRuns> {
    let ode = match engine {
        Engine::Ode | Engine::Both => Some(ode::integrate(scenario, StateVector::at_birth(), actives, &opts.integration()?)?),
        Engine::Abm => None,
    };
    let abm = match engine {
        Engine::Abm | Engine::Both => Some(abm::run_replicates(scenario, actives, &opts.abm()?)?),
        Engine::Ode => None,
    };
    Ok(EngineRuns { ode, abm })
}

fn base_manifest(command: &str, engine: Engine, opts: &SimOpts, actives: &ActiveCellTable, actives_source: &str) -> Result<Manifest> {
    let mut m = Manifest::new();
    m.set("tool", concat!("tcellsim ", env!("CARGO_PKG_VERSION")))
        .set("command", command)
        .set("engine", engine.name())
        .set("dt_years", opts.dt)
        .set("t_end_years", opts.t_end)
        .set("record_every_years", opts.record_every)
        .set("initial_state", "N=3673,Np=0,M=0");
    if engine != Engine::Abm {
        m.set("ode_method", opts.integration()?.method);
    }
    if engine != Engine::Ode {
        m.set("replicates", opts.replicates)
            .set("seed", opts.seed)
            .set("scale", opts.scale)
            .set("rng", RNG_ALGORITHM);
    }
    m.set("actives", actives_source)
        .set("actives_placeholder", actives.is_placeholder());
    Ok(m)
}

fn replay_line(sub: &str, extra: &str, engine: Engine, opts: &SimOpts) -> String {
    let mut s = format!(
        "tcellsim {sub} {extra} --engine {} --dt {} --t-end {} --replicates {} --seed {} --scale {} --record-every {} --method {}",
        engine.name(),
        opts.dt,
        opts.t_end,
        opts.replicates,
        opts.seed,
        opts.scale,
        opts.record_every,
        match opts.method {
            MethodArg::Euler => "euler",
            MethodArg::Rk4 => "rk4",
        }
    );
    if let Some(p) = &opts.actives {
        s.push_str(&format!(" --actives {}", p.display()));
    }
    s.push_str(&format!(" --out {}", opts.out.display()));
    s
}

fn finish_manifest(m: &mut Manifest, path: &Path) -> Result<()> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    m.set("created_unix", now);
    data::write_text(path, &m.to_text())
}

/// Files written by one `run`.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
    pub comparisons: Vec<(u8, Comparison)>,
}

fn compare_all(id: u8, ode: &Trajectory, abm: &Trajectory) -> Result<Vec<(u8, Comparison)>> {
    Quantity::ALL
        .iter()
        .map(|&q| compare_trajectories(ode, abm, q).map(|c| (id, c)))
        .collect()
}

fn runs_chart(id: u8, runs: &EngineRuns) -> Chart {
    let mut series = Vec::new();
    let curve = |t: &Trajectory, q: Quantity| t.samples().iter().map(|s| (s.t, q.of(s))).collect::<Vec<_>>();
    for (tag, traj) in [("ODE", runs.ode.as_ref()), ("ABM mean", runs.abm.as_ref().map(|a| &a.mean))] {
        if let Some(t) = traj {
            for q in [Quantity::N, Quantity::Np, Quantity::Total] {
                series.push(Series::line(format!("{tag} {}", q.name()), curve(t, q)));
            }
        }
    }
    Chart {
        title: format!("Scenario {id}"),
        x_label: "age (years)".into(),
        y_label: "cells per mm^3".into(),
        series,
    }
}

pub fn cmd_run(id: u8, engine: Engine, opts: &SimOpts) -> Result<RunArtifacts> {
    let scenario = scenario_params(id)?;
    let (actives, source) = opts.actives()?;
    let mut manifest = base_manifest("run", engine, opts, &actives, &source)?;
    manifest.set("scenario", id).set("scenario_description", scenario.description);
    let runs = simulate(&scenario, engine, opts, &actives)?;

    let out = &opts.out;
    let mut art = RunArtifacts::default();
    let emit = |name: String, text: &str, art: &mut RunArtifacts| -> Result<()> {
        let path = out.join(name);
        data::write_text(&path, text)?;
        art.files.push(path);
        Ok(())
    };
    if let Some(t) = &runs.ode {
        emit(format!("scenario{id}_ode.csv"), &data::format_trajectory(t), &mut art)?;
    }
    if let Some(set) = &runs.abm {
        emit(format!("scenario{id}_abm_mean.csv"), &data::format_trajectory(&set.mean), &mut art)?;
        emit(format!("scenario{id}_abm_replicates.csv"), &data::format_replicates(&set.trajectories), &mut art)?;
    }
    if let (Some(o), Some(a)) = (&runs.ode, &runs.abm) {
        art.comparisons = compare_all(id, o, &a.mean)?;
        emit(format!("scenario{id}_comparison.csv"), &data::format_report_csv(&art.comparisons), &mut art)?;
        emit(format!("scenario{id}_comparison.txt"), &data::format_report_text(&art.comparisons), &mut art)?;
    }
    emit(format!("scenario{id}_{}.svg", engine.name()), &plot::render_svg(&runs_chart(id, &runs))?, &mut art)?;

    manifest.set("replay", replay_line("run", &format!("--scenario {id}"), engine, opts));
    let mpath = out.join(format!("scenario{id}_{}.manifest", engine.name()));
    finish_manifest(&mut manifest, &mpath)?;
    art.files.push(mpath);
    for f in &art.files {
        println!("wrote {}", f.display());
    }
    if !art.comparisons.is_empty() {
        print!("{}", data::format_report_text(&art.comparisons));
    }
    Ok(art)
}

pub fn cmd_compare(ids: &[u8], opts: &SimOpts) -> Result<Vec<(u8, Comparison)>> {
    let scenarios = ids.iter().map(|&id| scenario_params(id)).collect::<Result<Vec<_>>>()?;
    let (actives, source) = opts.actives()?;
    let mut manifest = base_manifest("compare", Engine::Both, opts, &actives, &source)?;
    let list = ids.iter().map(u8::to_string).collect::<Vec<_>>().join(",");
    manifest.set("scenarios", &list);
    let mut rows = Vec::new();
    for sc in &scenarios {
        let runs = simulate(sc, Engine::Both, opts, &actives)?;
        let (o, a) = (runs.ode.as_ref().unwrap(), runs.abm.as_ref().unwrap());
        rows.extend(compare_all(sc.id, o, &a.mean)?);
    }
    data::write_text(&opts.out.join("comparison.csv"), &data::format_report_csv(&rows))?;
    data::write_text(&opts.out.join("comparison.txt"), &data::format_report_text(&rows))?;
    let extra: String = ids.iter().map(|id| format!("--scenario {id} ")).collect();
    let mut replay = replay_line("compare", extra.trim_end(), Engine::Both, opts);
    replay = replay.replace(" --engine both", "");
    manifest.set("replay", replay);
    finish_manifest(&mut manifest, &opts.out.join("comparison.manifest"))?;
    print!("{}", data::format_report_text(&rows));
    Ok(rows)
}

/// Residuals of simulated thymic-naive percentage against one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub dataset: String,
    pub engine: &'static str,
    /// `(age, data %, simulated %)` at each dataset midpoint.
    pub points: Vec<(f64, f64, f64)>,
    pub rms_residual: f64,
}

/// Simulated `N(t)` as a percentage of `N(0)`.
pub fn naive_percentage(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let n0 = traj.samples()[0].n;
    if n0 <= 0.0 {
        return Err(Error::Domain("N(0) is zero; cannot express N(t) as a percentage".into()));
    }
    Ok(traj.samples().iter().map(|s| (s.t, 100.0 * s.n / n0)).collect())
}

pub fn fit_summary(traj: &Trajectory, dataset: &data::TrecDataset, engine: &'static str) -> Result<FitSummary> {
    let n0 = traj.samples()[0].n;
    if n0 <= 0.0 {
        return Err(Error::Domain("N(0) is zero; cannot express N(t) as a percentage".into()));
    }
    let points: Vec<(f64, f64, f64)> = data::to_percentage(dataset)?
        .into_iter()
        .map(|(age, pct)| (age, pct, 100.0 * traj.state_at(age).n / n0))
        .collect();
    let rms = (points.iter().map(|(_, d, s)| (s - d).powi(2)).sum::<f64>() / points.len() as f64).sqrt();
    Ok(FitSummary {
        dataset: dataset.source.clone(),
        engine,
        points,
        rms_residual: rms,
    })
}

fn format_fit(id: u8, fits: &[FitSummary]) -> String {
    let mut out = format!(
        "Scenario {id}: simulated N(t) as % of N(0) vs TREC data as % of its age-0 value\n"
    );
    for f in fits {
        out.push_str(&format!("\n[{} | engine {}]\nage,data_pct,sim_pct,residual\n", f.dataset, f.engine));
        for (age, d, s) in &f.points {
            out.push_str(&format!("{age},{d:.4},{s:.4},{:.4}\n", s - d));
        }
        out.push_str(&format!("rms_residual={:.4}\n", f.rms_residual));
    }
    out
}

pub fn cmd_validate(id: u8, engine: Engine, dataset: &str, opts: &SimOpts) -> Result<Vec<FitSummary>> {
    let scenario = scenario_params(id)?;
    let datasets: Vec<DatasetId> = match dataset.to_ascii_lowercase().as_str() {
        "both" | "all" => vec![DatasetId::Murray, DatasetId::Lorenzi],
        other => vec![other.parse()?],
    };
    let (actives, source) = opts.actives()?;
    let mut manifest = base_manifest("validate", engine, opts, &actives, &source)?;
    manifest
        .set("scenario", id)
        .set("datasets", dataset)
        .set("normalization", "data: 10^mean relative to age-0 row; simulation: N(t)/N(0); ages at range midpoints");
    let runs = simulate(&scenario, engine, opts, &actives)?;

    let mut fits = Vec::new();
    let mut series = Vec::new();
    for (tag, traj) in [("ode", runs.ode.as_ref()), ("abm", runs.abm.as_ref().map(|a| &a.mean))] {
        if let Some(t) = traj {
            series.push(Series::line(format!("{} N(t) %", tag.to_uppercase()), naive_percentage(t)?));
            for &d in &datasets {
                fits.push(fit_summary(t, &data::builtin_dataset(d), tag)?);
            }
        }
    }
    for &d in &datasets {
        let ds = data::builtin_dataset(d);
        series.push(Series::markers(format!("TREC {}", ds.source), data::to_percentage(&ds)?));
    }
    let chart = Chart {
        title: format!("Scenario {id}: thymic naive cells vs TREC data"),
        x_label: "age (years)".into(),
        y_label: "percent of birth value".into(),
        series,
    };
    let stem = format!("validate_scenario{id}_{}", dataset.to_ascii_lowercase());
    plot::render_plot(&chart, &opts.out.join(format!("{stem}.svg")))?;
    let text = format_fit(id, &fits);
    data::write_text(&opts.out.join(format!("{stem}.txt")), &text)?;
    manifest.set("replay", replay_line("validate", &format!("--scenario {id} --dataset {dataset}"), engine, opts));
    finish_manifest(&mut manifest, &opts.out.join(format!("{stem}.manifest")))?;
    print!("{text}");
    Ok(fits)
}
