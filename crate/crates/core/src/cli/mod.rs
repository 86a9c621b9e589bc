//! Command-line driver: solvers, closed-form evaluation, simulation,
//! sweeps and validation, all emitting CSV.

mod spec;

pub use spec::{CommandKind, ExperimentSpec, GammaChoice, DEFAULT_EPOCHS, DEFAULT_SEED};

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{
    baseline_infinite_battery, closed_form_aoi, optimize_gamma, percentage_gain, solve_nofb, solve_wfb,
};
use crate::model::Feedback;
use crate::sim::{run_simulation, SimConfig, StopRule};
use crate::stats::{pooled_result, replicate, replication_seed, validate_replicated, DEFAULT_REL_TOL};
use crate::{ChannelSpec, PolicySpec, RootSolverConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION_FAIL: u8 = 3;

/// Below this many epochs per source the 1% tolerance is rarely resolvable.
pub const MIN_EPOCHS_FOR_TIGHT_CI: u64 = 1_000;

pub const SWEEP_HEADER: [&str; 11] = [
    "q",
    "M",
    "setting",
    "gamma",
    "analytic_aoi",
    "gamma_star",
    "baseline_inf_battery",
    "sim_mean",
    "sim_ci",
    "verdict",
    "pct_gain",
];

#[derive(Debug, Parser)]
#[command(
    name = "aoi",
    version,
    about = "Age of information for a unit-battery energy-harvesting sensor over an erasure channel",
    after_help = "Exit codes: 0 ok, 1 solver/simulation failure, 2 usage error, 3 validation FAIL."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal single-source threshold and AoI for each q and setting.
    Solve(GridArgs),
    /// Closed-form multi-source AoI at the given thresholds.
    Eval(GridArgs),
    /// Optimal multi-source threshold by golden-section search.
    Optimize(GridArgs),
    /// Simulate and report per-source renewal estimates.
    Simulate(GridArgs),
    /// Closed forms over a parameter grid, optionally with simulation.
    Sweep(GridArgs),
    /// Simulation-vs-closed-form verdicts; exits 3 if any cell fails.
    Validate(GridArgs),
}

impl Command {
    fn parts(&self) -> (CommandKind, &GridArgs) {
        match self {
            Command::Solve(a) => (CommandKind::Solve, a),
            Command::Eval(a) => (CommandKind::Eval, a),
            Command::Optimize(a) => (CommandKind::Optimize, a),
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Sweep(a) => (CommandKind::Sweep, a),
            Command::Validate(a) => (CommandKind::Validate, a),
        }
    }
}

/// Flags shared by every command. Lists are comma-separated. Defaults:
/// `--m 1`, `--setting nofb,wfb`, `--gamma optimal`, `--seed 1`,
/// `--replications 1`; `sweep` uses q = 0, 0.05, ..., 0.9 and no simulation;
/// `simulate` and `validate` use 100000 epochs per source; `validate` uses
/// q = 0.1,0.3,0.5,0.7, M = 1,2,4,8 and gamma = 0,optimal.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct GridArgs {
    /// Erasure probabilities, each in [0, 1).
    #[arg(long)]
    pub q: Option<String>,
    /// Numbers of sources.
    #[arg(long)]
    pub m: Option<String>,
    /// Feedback settings: nofb, wfb.
    #[arg(long)]
    pub setting: Option<String>,
    /// Thresholds: numbers or `optimal`.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Epochs per source to simulate.
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent simulation runs per cell, pooled.
    #[arg(long)]
    pub replications: Option<u32>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Configuration file of `key = value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record the event log of a single simulated cell and write it to --out.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Resolves defaults, the configuration file and flags, in that order.
pub fn resolve_spec(command: CommandKind, args: &GridArgs) -> Result<ExperimentSpec, CliError> {
    let mut spec = ExperimentSpec::defaults(command);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        spec.apply_config(&text).map_err(CliError::Usage)?;
    }
    let mut set = |key: &str, value: Option<String>| match value {
        Some(v) => spec.set(key, &v).map_err(CliError::Usage),
        None => Ok(()),
    };
    set("q", args.q.clone())?;
    set("m", args.m.clone())?;
    set("setting", args.setting.clone())?;
    set("gamma", args.gamma.clone())?;
    set("epochs", args.epochs.map(|e| e.to_string()))?;
    set("seed", args.seed.map(|s| s.to_string()))?;
    set("replications", args.replications.map(|r| r.to_string()))?;
    if let Some(out) = &args.out {
        spec.out = Some(out.clone());
    }
    spec.trace |= args.trace;
    spec.check_grids().map_err(CliError::Usage)?;
    Ok(spec)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    let (kind, args) = cli.command.parts();
    let spec = resolve_spec(kind, args)?;
    execute(&spec)
}

/// Runs a resolved experiment.
pub fn execute(spec: &ExperimentSpec) -> Result<u8, CliError> {
    if spec.trace && spec.command != CommandKind::Simulate {
        return Err(CliError::Usage("--trace only applies to simulate".into()));
    }
    if spec.command == CommandKind::Simulate && spec.trace {
        return simulate_traced(spec);
    }
    let mut out = open_output(spec.out.as_deref())?;
    let code = {
        let mut w = csv::Writer::from_writer(&mut out);
        let code = match spec.command {
            CommandKind::Solve => solve(spec, &mut w)?,
            CommandKind::Eval => eval(spec, &mut w)?,
            CommandKind::Optimize => optimize(spec, &mut w)?,
            CommandKind::Simulate => simulate(spec, &mut w)?,
            CommandKind::Sweep => sweep(spec, &mut w)?,
            CommandKind::Validate => validate(spec, &mut w)?,
        };
        w.flush().map_err(io_err(Path::new("<output>")))?;
        code
    };
    out.flush().map_err(io_err(Path::new("<output>")))?;
    Ok(code)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

type Csv<'a> = csv::Writer<&'a mut Box<dyn Write>>;

fn solver_cfg() -> RootSolverConfig {
    RootSolverConfig::default()
}

fn solve(spec: &ExperimentSpec, w: &mut Csv<'_>) -> Result<u8, CliError> {
    w.write_record(["q", "setting", "regime", "threshold", "lambda_star", "baseline_inf_battery"])?;
    for &q in &spec.q {
        for &fb in &spec.settings {
            let sol = match fb {
                Feedback::NoFeedback => solve_nofb(q, &solver_cfg())?,
                Feedback::WithFeedback => solve_wfb(q, &solver_cfg())?,
            };
            let base = baseline_infinite_battery(q, fb)?;
            w.write_record([
                f6(q),
                fb.to_string(),
                sol.regime.to_string(),
                f6(sol.threshold),
                f6(sol.lambda_star),
                f6(base),
            ])?;
        }
    }
    Ok(EXIT_OK)
}

/// Concrete threshold for a grid entry.
fn resolve_gamma(q: f64, m: usize, fb: Feedback, choice: GammaChoice) -> Result<f64, CliError> {
    Ok(match choice {
        GammaChoice::Fixed(g) => g,
        GammaChoice::Optimal => optimize_gamma(q, m, fb, &solver_cfg())?.gamma,
    })
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    q: f64,
    m: usize,
    feedback: Feedback,
    gamma: GammaChoice,
}

/// Grid cells ordered by q, then M, then setting and gamma in the given order.
fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut qs = spec.q.clone();
    qs.sort_by(f64::total_cmp);
    let mut ms = spec.m.clone();
    ms.sort_unstable();
    let mut out = Vec::new();
    for &q in &qs {
        for &m in &ms {
            for &feedback in &spec.settings {
                for &gamma in &spec.gamma {
                    out.push(Cell { q, m, feedback, gamma });
                }
            }
        }
    }
    out
}

fn cell_seed(base: u64, index: usize) -> u64 {
    // Offset by a large odd constant so cell streams never coincide with the
    // replication seeds of a neighbouring cell.
    replication_seed(base ^ 0xD1B5_4A32_D192_ED03u64.wrapping_mul(index as u64 + 1), 0)
}

fn eval(spec: &ExperimentSpec, w: &mut Csv<'_>) -> Result<u8, CliError> {
    w.write_record(["q", "M", "setting", "gamma", "analytic_aoi"])?;
    for c in cells(spec) {
        let g = resolve_gamma(c.q, c.m, c.feedback, c.gamma)?;
        let v = closed_form_aoi(c.q, c.m, c.feedback, g)?;
        w.write_record([f6(c.q), c.m.to_string(), c.feedback.to_string(), f6(g), f6(v)])?;
    }
    Ok(EXIT_OK)
}

fn optimize(spec: &ExperimentSpec, w: &mut Csv<'_>) -> Result<u8, CliError> {
    w.write_record(["q", "M", "setting", "gamma_star", "analytic_aoi"])?;
    let mut seen = Vec::new();
    for c in cells(spec) {
        if seen.contains(&(c.q.to_bits(), c.m, c.feedback)) {
            continue;
        }
        seen.push((c.q.to_bits(), c.m, c.feedback));
        let opt = optimize_gamma(c.q, c.m, c.feedback, &solver_cfg())?;
        w.write_record([f6(c.q), c.m.to_string(), c.feedback.to_string(), f6(opt.gamma), f6(opt.aoi)])?;
    }
    Ok(EXIT_OK)
}

fn warn_small_epochs(epochs: u64) {
    if epochs < MIN_EPOCHS_FOR_TIGHT_CI {
        warn!("CI too wide: {epochs} epochs per source cannot resolve a 1% tolerance");
    }
}

fn sim_config(c: &Cell, gamma: f64, epochs: u64, seed: u64) -> Result<SimConfig, CliError> {
    Ok(SimConfig::new(
        ChannelSpec::new(c.q)?,
        c.m,
        PolicySpec::for_sources(c.feedback, c.m, gamma)?,
        StopRule::EpochsPerSource(epochs),
        seed,
    )?)
}

fn simulate(spec: &ExperimentSpec, w: &mut Csv<'_>) -> Result<u8, CliError> {
    let epochs = spec.epochs.unwrap_or(DEFAULT_EPOCHS);
    warn_small_epochs(epochs);
    w.write_record([
        "q",
        "M",
        "setting",
        "gamma",
        "source",
        "sim_mean",
        "sim_ci",
        "epochs",
        "energy_arrivals",
        "overflows",
        "attempts",
        "successes",
    ])?;
    for (i, c) in cells(spec).into_iter().enumerate() {
        let g = resolve_gamma(c.q, c.m, c.feedback, c.gamma)?;
        let cfg = sim_config(&c, g, epochs, cell_seed(spec.seed, i))?;
        let r = pooled_result(&replicate(&cfg, spec.replications)?)?;
        let k = r.counters;
        let tail = [
            k.energy_arrivals.to_string(),
            k.overflows.to_string(),
            k.attempts.to_string(),
            k.successes.to_string(),
        ];
        let head = [f6(c.q), c.m.to_string(), c.feedback.to_string(), f6(g)];
        for (j, est) in r.per_source.iter().enumerate() {
            let mid = [(j + 1).to_string(), f6(est.point), f6(est.ci_half_width), est.n_epochs.to_string()];
            w.write_record(head.iter().chain(&mid).chain(&tail))?;
        }
        let total: u64 = r.epochs_per_source.iter().sum();
        let mid = ["all".to_string(), f6(r.cumulative_mean), f6(r.cumulative_ci), total.to_string()];
        w.write_record(head.iter().chain(&mid).chain(&tail))?;
    }
    Ok(EXIT_OK)
}

fn simulate_traced(spec: &ExperimentSpec) -> Result<u8, CliError> {
    let cells = cells(spec);
    if cells.len() != 1 {
        return Err(CliError::Usage("--trace needs exactly one grid cell".into()));
    }
    let path = spec
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("--trace needs --out for the event log".into()))?;
    let c = cells[0];
    let g = resolve_gamma(c.q, c.m, c.feedback, c.gamma)?;
    let epochs = spec.epochs.unwrap_or(DEFAULT_EPOCHS);
    let cfg = sim_config(&c, g, epochs, spec.seed)?.with_trace(true);
    let out = run_simulation(&cfg)?;
    let file = File::create(path).map_err(io_err(path))?;
    let mut file = BufWriter::new(file);
    if let Some(log) = &out.log {
        log.write_to(&mut file).map_err(io_err(path))?;
    }
    file.flush().map_err(io_err(path))?;
    let r = out.result;
    println!(
        "q={} M={} setting={} gamma={} mean={} ci={} events={}",
        f6(c.q),
        c.m,
        c.feedback,
        f6(g),
        f6(r.cumulative_mean),
        f6(r.cumulative_ci),
        out.log.map_or(0, |l| l.len())
    );
    Ok(EXIT_OK)
}

/// One row of `sweep`/`validate` output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub q: f64,
    pub m: usize,
    pub feedback: Feedback,
    pub gamma: f64,
    pub analytic_aoi: f64,
    pub gamma_star: f64,
    pub baseline: f64,
    pub sim: Option<(f64, f64)>,
    pub pass: Option<bool>,
    pub pct_gain: f64,
}

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            f6(self.q),
            self.m.to_string(),
            self.feedback.to_string(),
            f6(self.gamma),
            f6(self.analytic_aoi),
            f6(self.gamma_star),
            f6(self.baseline),
            self.sim.map_or_else(String::new, |s| f6(s.0)),
            self.sim.map_or_else(String::new, |s| f6(s.1)),
            self.pass.map_or_else(String::new, |p| if p { "PASS" } else { "FAIL" }.to_string()),
            f6(self.pct_gain),
        ]
    }
}

/// Computes every row of a sweep; cells run in parallel, rows come back in
/// grid order.
pub fn sweep_rows(spec: &ExperimentSpec, simulate: bool) -> Result<Vec<SweepRow>, CliError> {
    let epochs = spec.epochs.unwrap_or(DEFAULT_EPOCHS);
    if simulate {
        warn_small_epochs(epochs);
    }
    cells(spec)
        .into_par_iter()
        .enumerate()
        .map(|(i, c)| {
            let cfg = solver_cfg();
            let gamma_star = optimize_gamma(c.q, c.m, c.feedback, &cfg)?.gamma;
            let gamma = match c.gamma {
                GammaChoice::Fixed(g) => g,
                GammaChoice::Optimal => gamma_star,
            };
            let (sim, pass) = if simulate {
                let v = validate_replicated(
                    c.q,
                    c.m,
                    c.feedback,
                    gamma,
                    epochs,
                    cell_seed(spec.seed, i),
                    spec.replications,
                    DEFAULT_REL_TOL,
                )?;
                (Some((v.sim.point, v.sim.ci_half_width)), Some(v.pass))
            } else {
                (None, None)
            };
            Ok(SweepRow {
                q: c.q,
                m: c.m,
                feedback: c.feedback,
                gamma,
                analytic_aoi: closed_form_aoi(c.q, c.m, c.feedback, gamma)?,
                gamma_star,
                baseline: baseline_infinite_battery(c.q, c.feedback)?,
                sim,
                pass,
                pct_gain: percentage_gain(c.q, c.m, &cfg)?,
            })
        })
        .collect()
}

fn write_rows(rows: &[SweepRow], w: &mut Csv<'_>) -> Result<(), CliError> {
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    Ok(())
}

fn sweep(spec: &ExperimentSpec, w: &mut Csv<'_>) -> Result<u8, CliError> {
    let rows = sweep_rows(spec, spec.epochs.is_some())?;
    write_rows(&rows, w)?;
    Ok(EXIT_OK)
}

fn validate(spec: &ExperimentSpec, w: &mut Csv<'_>) -> Result<u8, CliError> {
    let rows = sweep_rows(spec, true)?;
    write_rows(&rows, w)?;
    let failed = rows.iter().filter(|r| r.pass == Some(false)).count();
    if failed > 0 {
        warn!("{failed} of {} cells failed validation", rows.len());
        Ok(EXIT_VALIDATION_FAIL)
    } else {
        Ok(EXIT_OK)
    }
}
