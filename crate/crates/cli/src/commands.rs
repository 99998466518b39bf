use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ehsched_core::analysis::{fill_bounds_at_mean_power, mc_cdf, paired_experiment, CdfModel, Estimate, StaticHarvest};
use ehsched_core::offline::solve_offline_detailed;
use ehsched_core::online::POLICY_NAMES;
use ehsched_core::{
    named_scenario, sample_trace, simulate_policy, HalfLog2, PolicyRunner, PolicySpec, Process, RateModel, RngStream,
    ScenarioModel, SolverOptions, Trace,
};
use serde_json::json;

use crate::config::{hash_json, AnalysisToggles, ExperimentConfig, ScenarioRef};
use crate::error::{CliError, CliResult};
use crate::io::{fmt, metadata_line, read_trace, render_csv};

#[derive(Debug, Clone, Parser)]
#[command(name = "ehsched", version, about = "Transmission scheduling for energy-harvesting transmitters")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Experiment config (JSON); supplies scenario, seed and replicates.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; every random stream derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; without it single-file commands print to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Named scenario, overriding the config.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Solve the clairvoyant schedule of one trace.
    Offline(OfflineArgs),
    /// Run an online policy on one trace with per-slot diagnostics.
    Simulate(SimulateArgs),
    /// Paired Monte Carlo sweep of policies against the offline optimum.
    Experiment(ExperimentArgs),
    /// Offline-power distribution under Bernoulli harvests.
    Cdf(CdfArgs),
    /// Fill bounds against Monte Carlo fill over a harvest-probability grid.
    Fill(FillArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Rescaled water levels of the logarithmic rate.
    #[default]
    Log,
    /// General-form solver with f = ½·log₂.
    General,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Log => "log",
            Mode::General => "general",
        }
    }

    fn rate_model(self) -> RateModel {
        match self {
            Mode::Log => RateModel::Logarithmic,
            Mode::General => RateModel::general(HalfLog2),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TraceSource {
    /// Trace CSV with columns n,H,B,gamma; otherwise one trace is sampled.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Horizon of the sampled trace, overriding the scenario.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Stored energy before the first slot.
    #[arg(long)]
    pub e1: Option<f64>,
    /// Stored data before the first slot; `inf` for an unlimited backlog.
    #[arg(long)]
    pub b1: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OfflineArgs {
    #[command(flatten)]
    pub source: TraceSource,
    #[arg(long, value_enum, default_value_t = Mode::Log)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: TraceSource,
    #[arg(long, default_value = "heuristic")]
    pub policy: String,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Comma-separated policy names, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    /// Comma-separated horizons, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CdfArgs {
    /// Stored energy; defaults to the scenario's initial energy.
    #[arg(long)]
    pub energy: Option<f64>,
    /// Harvest size; defaults to the scenario's Bernoulli value.
    #[arg(long)]
    pub harvest: Option<f64>,
    /// Harvest probability; defaults to the scenario's.
    #[arg(long)]
    pub p: Option<f64>,
    /// Slots after the current one; defaults to the horizon minus one.
    #[arg(long)]
    pub remaining: Option<usize>,
    /// Thresholds h/m for m = 1..=max_m.
    #[arg(long, default_value_t = 20)]
    pub max_m: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FillArgs {
    #[arg(long, default_value_t = 24.0)]
    pub harvest: f64,
    #[arg(long, value_delimiter = ',', default_value = "5,25,55")]
    pub energies: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5,25")]
    pub remaining: Vec<usize>,
    #[arg(long = "p", value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub p_grid: Vec<f64>,
}

impl Default for FillArgs {
    fn default() -> Self {
        FillArgs {
            harvest: 24.0,
            energies: vec![5.0, 25.0, 55.0],
            remaining: vec![5, 25],
            p_grid: (1..=9).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

pub const DEFAULT_CDF_REPLICATES: usize = 100_000;
pub const DEFAULT_FILL_REPLICATES: usize = 10_000;
pub const DEFAULT_EXPERIMENT_REPLICATES: usize = 1000;
pub const DEFAULT_HORIZONS: [usize; 5] = [25, 50, 100, 150, 200];

/// One file produced by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

/// Files produced by a command and where they belong; `dir = None` means
/// standard output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
    pub files: Vec<Output>,
}

struct Context {
    config: Option<ExperimentConfig>,
    seed: u64,
}

impl Context {
    fn new(g: &GlobalArgs) -> CliResult<Context> {
        let config = g.config.as_deref().map(ExperimentConfig::load).transpose()?;
        let seed = g.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
        Ok(Context { config, seed })
    }

    /// `--scenario`, else the config's scenario.
    fn explicit_scenario(&self, g: &GlobalArgs) -> CliResult<Option<ScenarioModel>> {
        if let Some(name) = &g.scenario {
            return Ok(Some(named_scenario(name)?));
        }
        self.config.as_ref().map(|c| c.scenario.resolve()).transpose()
    }

    fn scenario_or(&self, g: &GlobalArgs, fallback: &str) -> CliResult<ScenarioModel> {
        match self.explicit_scenario(g)? {
            Some(m) => Ok(m),
            None => Ok(named_scenario(fallback)?),
        }
    }

    fn replicates(&self, g: &GlobalArgs, fallback: usize) -> CliResult<usize> {
        let r = g.replicates.or(self.config.as_ref().map(|c| c.replicates)).unwrap_or(fallback);
        if r == 0 {
            return Err(CliError::config("replicates must be at least 1"));
        }
        Ok(r)
    }
}

pub fn execute(cli: &Cli) -> CliResult<Outputs> {
    let run = || match &cli.command {
        Command::Offline(a) => cmd_offline(&cli.global, a),
        Command::Simulate(a) => cmd_simulate(&cli.global, a),
        Command::Experiment(a) => cmd_experiment(&cli.global, a),
        Command::Cdf(a) => cmd_cdf(&cli.global, a),
        Command::Fill(a) => cmd_fill(&cli.global, a),
    };
    match cli.global.threads {
        Some(0) => Err(CliError::config("threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Runs a command and writes its files; returns the paths written.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let out = execute(cli)?;
    match out.dir {
        None => {
            for f in &out.files {
                print!("{}", f.contents);
            }
            Ok(Vec::new())
        }
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            out.files
                .iter()
                .map(|f| {
                    let path = dir.join(&f.name);
                    std::fs::write(&path, &f.contents).map_err(|e| CliError::io(&path, e))?;
                    Ok(path)
                })
                .collect()
        }
    }
}

fn single(g: &GlobalArgs, name: &str, contents: String) -> Outputs {
    Outputs {
        dir: g.out.clone(),
        files: vec![Output {
            name: name.to_string(),
            contents,
        }],
    }
}

fn parse_policy(name: &str) -> CliResult<PolicySpec> {
    PolicySpec::from_name(name).map_err(|_| {
        CliError::config(format!("unknown policy '{name}', expected one of: {}", POLICY_NAMES.join(", ")))
    })
}

/// The trace a single-trace command works on. A sampled trace is replicate 0
/// of an experiment with the same seed.
struct Resolved {
    trace: Trace,
    model: Option<ScenarioModel>,
    e_1: f64,
    b_1: f64,
}

fn resolve_trace(ctx: &Context, g: &GlobalArgs, src: &TraceSource) -> CliResult<Resolved> {
    let (trace, model) = match &src.trace {
        Some(path) => {
            let trace = read_trace(path)?;
            let model = ctx.explicit_scenario(g)?;
            (trace, model)
        }
        None => {
            let mut model = ctx.scenario_or(g, "main")?;
            if let Some(n) = src.horizon {
                if n == 0 {
                    return Err(CliError::config("horizon must be at least 1"));
                }
                model = model.with_horizon(n);
            }
            let trace = sample_trace(&model, &RngStream::new(ctx.seed, 0).derive(0))?;
            (trace, Some(model))
        }
    };
    let e_1 = src.e1.or(model.as_ref().map(|m| m.e_1())).unwrap_or(0.0);
    let b_1 = src.b1.or(model.as_ref().map(|m| m.b_1())).unwrap_or(f64::INFINITY);
    if !(e_1.is_finite() && e_1 >= 0.0) || b_1.is_nan() || b_1 < 0.0 {
        return Err(CliError::config(format!("initial buffers must be non-negative, got e1 = {e_1}, b1 = {b_1}")));
    }
    Ok(Resolved { trace, model, e_1, b_1 })
}

fn trace_hash(command: &str, seed: u64, r: &Resolved, extra: serde_json::Value) -> String {
    hash_json(&json!({
        "command": command,
        "seed": seed,
        "trace": r.trace,
        "e1": fmt(r.e_1),
        "b1": fmt(r.b_1),
        "extra": extra,
    }))
}

fn slot_columns(trace: &Trace, n: usize) -> Vec<String> {
    vec![
        (n + 1).to_string(),
        fmt(trace.harvests()[n]),
        fmt(trace.arrivals()[n]),
        fmt(trace.gains()[n]),
    ]
}

pub const SCHEDULE_COLUMNS: [&str; 10] = ["n", "H", "B", "gamma", "w", "power", "rate", "e", "b", "binding"];

fn cmd_offline(g: &GlobalArgs, a: &OfflineArgs) -> CliResult<Outputs> {
    let ctx = Context::new(g)?;
    let r = resolve_trace(&ctx, g, &a.source)?;
    let sol = solve_offline_detailed(&r.trace, r.e_1, r.b_1, &a.mode.rate_model(), &SolverOptions::default())?;
    let rows: Vec<Vec<String>> = (0..r.trace.n_slots())
        .map(|n| {
            let d = sol.schedule.decisions[n];
            let s = sol.states[n];
            let mut row = slot_columns(&r.trace, n);
            row.extend([
                fmt(d.water),
                fmt(d.power),
                fmt(d.rate),
                fmt(s.energy),
                fmt(s.data),
                sol.bindings[n].as_str().to_string(),
            ]);
            row
        })
        .collect();
    let hash = trace_hash("offline", ctx.seed, &r, json!({ "mode": a.mode.as_str() }));
    let meta = metadata_line(&[
        ("command", "offline".into()),
        ("seed", ctx.seed.to_string()),
        ("config_hash", hash),
        ("mode", a.mode.as_str().into()),
        ("e1", fmt(r.e_1)),
        ("b1", fmt(r.b_1)),
        ("throughput", fmt(sol.schedule.total_throughput)),
    ]);
    Ok(single(g, "offline.csv", render_csv(&meta, &SCHEDULE_COLUMNS, &rows)))
}

pub const SIMULATION_COLUMNS: [&str; 10] = ["n", "H", "B", "gamma", "w", "power", "rate", "e", "b", "clamped"];

fn cmd_simulate(g: &GlobalArgs, a: &SimulateArgs) -> CliResult<Outputs> {
    let ctx = Context::new(g)?;
    let spec = parse_policy(&a.policy)?;
    let r = resolve_trace(&ctx, g, &a.source)?;
    let runner = PolicyRunner::build(&spec, r.model.as_ref())?;
    let stream = RngStream::new(ctx.seed, 1).derive(0);
    // (decision, energy, data, clamped) per slot
    let slots: Vec<(ehsched_core::SlotDecision, f64, f64, bool)> = match &runner {
        PolicyRunner::Offline(opts) => {
            let sol = solve_offline_detailed(&r.trace, r.e_1, r.b_1, &RateModel::Logarithmic, opts)?;
            sol.schedule
                .decisions
                .iter()
                .zip(&sol.states)
                .map(|(d, s)| (*d, s.energy, s.data, false))
                .collect()
        }
        PolicyRunner::Online(p) => {
            let sim = simulate_policy(p.as_ref(), &r.trace, r.e_1, r.b_1, r.model.as_ref(), stream)?;
            sim.schedule
                .decisions
                .iter()
                .zip(&sim.diagnostics)
                .map(|(d, s)| (*d, s.energy, s.data, s.clamped))
                .collect()
        }
    };
    let total: f64 = slots.iter().map(|s| s.0.rate).sum();
    let rows: Vec<Vec<String>> = slots
        .iter()
        .enumerate()
        .map(|(n, (d, e, b, clamped))| {
            let mut row = slot_columns(&r.trace, n);
            row.extend([fmt(d.water), fmt(d.power), fmt(d.rate), fmt(*e), fmt(*b), clamped.to_string()]);
            row
        })
        .collect();
    let hash = trace_hash("simulate", ctx.seed, &r, json!({ "policy": spec, "scenario": r.model }));
    let meta = metadata_line(&[
        ("command", "simulate".into()),
        ("seed", ctx.seed.to_string()),
        ("config_hash", hash),
        ("policy", spec.name().into()),
        ("e1", fmt(r.e_1)),
        ("b1", fmt(r.b_1)),
        ("throughput", fmt(total)),
    ]);
    Ok(single(g, "simulate.csv", render_csv(&meta, &SIMULATION_COLUMNS, &rows)))
}

fn default_experiment() -> ExperimentConfig {
    ExperimentConfig {
        scenario: ScenarioRef::Named("main".into()),
        policies: vec![PolicySpec::Heuristic, PolicySpec::PowerHalving],
        horizons: DEFAULT_HORIZONS.to_vec(),
        replicates: DEFAULT_EXPERIMENT_REPLICATES,
        seed: 0,
        output: PathBuf::from("out"),
        analysis: AnalysisToggles::default(),
    }
}

/// The config after command-line overrides; its hash goes in the metadata.
pub fn effective_config(g: &GlobalArgs, a: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => default_experiment(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(r) = g.replicates {
        cfg.replicates = r;
    }
    if let Some(name) = &g.scenario {
        cfg.scenario = ScenarioRef::Named(name.clone());
    }
    if let Some(out) = &g.out {
        cfg.output = out.clone();
    }
    if let Some(names) = &a.policies {
        cfg.policies = names.iter().map(|n| parse_policy(n)).collect::<CliResult<_>>()?;
    }
    if let Some(h) = &a.horizons {
        cfg.horizons = h.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub const EXPERIMENT_COLUMNS: [&str; 14] = [
    "horizon",
    "policy",
    "replicates",
    "throughput",
    "throughput_se",
    "throughput_mbps",
    "throughput_mbps_se",
    "energy",
    "energy_se",
    "efficiency",
    "efficiency_se",
    "gap",
    "gap_se",
    "slot_duration",
];

fn experiment_row(n: usize, reps: usize, slot_duration: f64, s: &ehsched_core::analysis::PolicySummary) -> Vec<String> {
    let mbps = 1e-6 / slot_duration;
    vec![
        n.to_string(),
        s.policy.clone(),
        reps.to_string(),
        fmt(s.throughput.mean),
        fmt(s.throughput.se),
        fmt(s.throughput.mean * mbps),
        fmt(s.throughput.se * mbps),
        fmt(s.energy.mean),
        fmt(s.energy.se),
        fmt(s.efficiency.mean),
        fmt(s.efficiency.se),
        fmt(s.gap.mean / n as f64),
        fmt(s.gap.se / n as f64),
        fmt(slot_duration),
    ]
}

pub const WATER_PROFILE_COLUMNS: [&str; 6] = ["horizon", "policy", "n", "w", "power", "rate"];

fn water_profiles(cfg: &ExperimentConfig, model: &ScenarioModel) -> CliResult<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    let specs: Vec<PolicySpec> = std::iter::once(PolicySpec::Offline).chain(cfg.policies.iter().cloned()).collect();
    for &n in &cfg.horizons {
        let m = model.with_horizon(n);
        let trace = sample_trace(&m, &RngStream::new(cfg.seed, 0).derive(0))?;
        for spec in &specs {
            let runner = PolicyRunner::build(spec, Some(&m))?;
            let s = runner.run(&trace, m.e_1(), m.b_1(), Some(&m), RngStream::new(cfg.seed, 1).derive(0))?;
            for (k, d) in s.decisions.iter().enumerate() {
                rows.push(vec![
                    n.to_string(),
                    spec.name().to_string(),
                    (k + 1).to_string(),
                    fmt(d.water),
                    fmt(d.power),
                    fmt(d.rate),
                ]);
            }
        }
    }
    Ok(rows)
}

fn cmd_experiment(g: &GlobalArgs, a: &ExperimentArgs) -> CliResult<Outputs> {
    let cfg = effective_config(g, a)?;
    let model = cfg.scenario.resolve()?;
    let hash = cfg.hash();
    let meta = |command: &str| {
        metadata_line(&[
            ("command", command.into()),
            ("seed", cfg.seed.to_string()),
            ("config_hash", hash.clone()),
            ("replicates", cfg.replicates.to_string()),
        ])
    };
    let mut rows = Vec::new();
    for &n in &cfg.horizons {
        let res = paired_experiment(&model.with_horizon(n), &cfg.policies, cfg.replicates, cfg.seed)?;
        rows.push(experiment_row(n, cfg.replicates, model.slot_duration, &res.offline));
        for p in &res.policies {
            rows.push(experiment_row(n, cfg.replicates, model.slot_duration, p));
        }
    }
    let mut files = vec![Output {
        name: "experiment.csv".into(),
        contents: render_csv(&meta("experiment"), &EXPERIMENT_COLUMNS, &rows),
    }];
    if cfg.analysis.water_profiles {
        files.push(Output {
            name: "water_profile.csv".into(),
            contents: render_csv(&meta("water_profile"), &WATER_PROFILE_COLUMNS, &water_profiles(&cfg, &model)?),
        });
    }
    if cfg.analysis.cdfs {
        let cdf = named_scenario("cdf-figure")?;
        let rows = cdf_rows(&cdf_params(&cdf, &CdfArgs { max_m: 20, ..CdfArgs::default() })?, cfg.replicates, cfg.seed)?;
        files.push(Output {
            name: "cdf.csv".into(),
            contents: render_csv(&meta("cdf"), &CDF_COLUMNS, &rows),
        });
    }
    if cfg.analysis.fill_bounds {
        let rows = fill_rows(&FillArgs::default(), cfg.replicates, cfg.seed)?;
        files.push(Output {
            name: "fill.csv".into(),
            contents: render_csv(&meta("fill"), &FILL_COLUMNS, &rows),
        });
    }
    Ok(Outputs {
        dir: Some(cfg.output.clone()),
        files,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
struct CdfParams {
    energy: f64,
    harvest: f64,
    p: f64,
    remaining: usize,
    max_m: usize,
}

fn cdf_params(model: &ScenarioModel, a: &CdfArgs) -> CliResult<CdfParams> {
    let (p0, h0) = match model.harvest_model {
        Process::Bernoulli { p, value } => (Some(p), Some(value)),
        _ => (None, None),
    };
    let missing = || CliError::config("cdf needs a Bernoulli harvest scenario or explicit --p and --harvest");
    let params = CdfParams {
        energy: a.energy.unwrap_or(model.initial_energy),
        harvest: a.harvest.or(h0).ok_or_else(missing)?,
        p: a.p.or(p0).ok_or_else(missing)?,
        remaining: a.remaining.unwrap_or(model.horizon.saturating_sub(1)),
        max_m: a.max_m,
    };
    if !(params.energy > 0.0 && params.energy.is_finite()) {
        return Err(CliError::config(format!("cdf energy must be positive, got {}", params.energy)));
    }
    if params.max_m == 0 {
        return Err(CliError::config("max-m must be at least 1"));
    }
    Ok(params)
}

pub const CDF_COLUMNS: [&str; 6] = ["m", "threshold", "asymptotic", "finite", "empirical", "empirical_se"];

fn cdf_rows(c: &CdfParams, replicates: usize, seed: u64) -> CliResult<Vec<Vec<String>>> {
    let thresholds: Vec<f64> = (1..=c.max_m).map(|m| c.harvest / m as f64).collect();
    let empirical = mc_cdf(c.energy, c.remaining, c.p, c.harvest, &thresholds, replicates, &RngStream::new(seed, 0))?;
    (1..=c.max_m)
        .zip(&empirical)
        .map(|(m, est)| {
            let model = CdfModel::new(c.p, c.harvest, m, c.remaining)?;
            Ok(vec![
                m.to_string(),
                fmt(thresholds[m - 1]),
                fmt(model.asymptotic(c.energy)),
                fmt(model.finite(c.energy)),
                fmt(est.mean),
                fmt(est.se),
            ])
        })
        .collect()
}

fn cmd_cdf(g: &GlobalArgs, a: &CdfArgs) -> CliResult<Outputs> {
    let ctx = Context::new(g)?;
    let model = ctx.scenario_or(g, "cdf-figure")?;
    let params = cdf_params(&model, a)?;
    let replicates = ctx.replicates(g, DEFAULT_CDF_REPLICATES)?;
    let rows = cdf_rows(&params, replicates, ctx.seed)?;
    let hash = hash_json(&json!({ "command": "cdf", "seed": ctx.seed, "replicates": replicates, "params": params }));
    let meta = metadata_line(&[
        ("command", "cdf".into()),
        ("seed", ctx.seed.to_string()),
        ("config_hash", hash),
        ("replicates", replicates.to_string()),
        ("energy", fmt(params.energy)),
        ("harvest", fmt(params.harvest)),
        ("p", fmt(params.p)),
        ("remaining", params.remaining.to_string()),
    ]);
    Ok(single(g, "cdf.csv", render_csv(&meta, &CDF_COLUMNS, &rows)))
}

pub const FILL_COLUMNS: [&str; 17] = [
    "energy",
    "remaining",
    "p",
    "mean_power",
    "mean_power_se",
    "lb",
    "lb_se",
    "simplified",
    "simplified_se",
    "variance",
    "variance_se",
    "general",
    "general_se",
    "fill",
    "fill_se",
    "loss",
    "loss_se",
];

/// Point `k` of the sweep (energies outermost, then remaining, then p) uses
/// stream `(seed, 0)` derived by `k`.
fn fill_rows(a: &FillArgs, replicates: usize, seed: u64) -> CliResult<Vec<Vec<String>>> {
    let root = RngStream::new(seed, 0);
    let mut rows = Vec::new();
    let mut k = 0u64;
    for &e in &a.energies {
        for &r in &a.remaining {
            for &p in &a.p_grid {
                let b = fill_bounds_at_mean_power(e, r, &StaticHarvest { p, h: a.harvest }, replicates, &root.derive(k))?;
                k += 1;
                let pair = |x: Estimate| [fmt(x.mean), fmt(x.se)];
                let mut row = vec![fmt(e), r.to_string(), fmt(p)];
                row.extend(pair(b.mean_power));
                row.extend(pair(b.lb));
                row.extend(pair(b.simplified));
                row.extend(pair(b.variance));
                row.extend(pair(b.general));
                row.extend([fmt(b.fill.fill), fmt(b.fill.fill_se)]);
                row.extend(pair(b.fill.loss));
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn cmd_fill(g: &GlobalArgs, a: &FillArgs) -> CliResult<Outputs> {
    let ctx = Context::new(g)?;
    let replicates = ctx.replicates(g, DEFAULT_FILL_REPLICATES)?;
    let rows = fill_rows(a, replicates, ctx.seed)?;
    let hash = hash_json(&json!({
        "command": "fill",
        "seed": ctx.seed,
        "replicates": replicates,
        "harvest": a.harvest,
        "energies": a.energies,
        "remaining": a.remaining,
        "p": a.p_grid,
    }));
    let meta = metadata_line(&[
        ("command", "fill".into()),
        ("seed", ctx.seed.to_string()),
        ("config_hash", hash),
        ("replicates", replicates.to_string()),
        ("harvest", fmt(a.harvest)),
    ]);
    Ok(single(g, "fill.csv", render_csv(&meta, &FILL_COLUMNS, &rows)))
}
