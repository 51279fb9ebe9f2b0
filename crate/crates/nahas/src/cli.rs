//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nahas_core::accel::{self, baseline_config, peak_throughput, AcceleratorConfig};
use nahas_core::nas::{build_space, count_macs, count_params, decode, efficientnet_b0, mobilenet_v2, ArchitectureSpec};
use nahas_core::nas::{DecisionVector, SpaceName};
use nahas_core::oracle::{CostModel, EvaluatorKind, SimulatorCostModel, SyntheticOracle};
use nahas_core::perf;
use nahas_core::search::{
    brute_force, pareto_frontier, run_search, CostAxis, Pipeline, SearchConfig, SearchContext, SearchMode, Trial,
    TrialLog, DEFAULT_BRUTE_FORCE_CAP,
};
use nahas_core::surrogate::{
    error_report, split, train_with, FeatureLayout, Labeled, Record, SurrogateCostModel, SurrogateModel, TrainSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::io::{self, read_json, read_jsonl, write_json, IoError, JsonlWriter};
use crate::manifest::RunManifest;
use crate::parallel::{self, ParallelEvaluator};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Schema { .. } => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "nahas", version, about = "Joint neural-architecture and accelerator search")]
pub struct Cli {
    /// Evaluation worker threads.
    #[arg(long, global = true, default_value = "1")]
    pub workers: NonZeroUsize,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a configured search and write manifest, trial log, frontier and best trial.
    Search(SearchArgs),
    /// Price one network on one accelerator with the analytical models.
    Simulate(SimulateArgs),
    /// Print a network as JSON.
    DumpArch(ArchArgs),
    /// Generate data for, train, evaluate and query the learned cost model.
    #[command(subcommand)]
    CostModel(CostModelCommand),
    /// Extract the Pareto frontier of a trial log as CSV.
    Pareto(ParetoArgs),
    /// Evaluate every point of a small configured space.
    Bruteforce(BruteforceArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Search configuration (JSON).
    #[arg(long, required_unless_present = "print_default_config")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, required_unless_present = "print_default_config")]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, env = "NAHAS_SEED")]
    pub seed: Option<u64>,
    /// Record per-trial evaluation wall time (makes logs non-reproducible).
    #[arg(long)]
    pub timings: bool,
    /// Print a complete default configuration on stdout and field notes on stderr.
    #[arg(long)]
    pub print_default_config: bool,
}

#[derive(Debug, Args)]
pub struct ArchArgs {
    /// Search space whose decisions are given.
    #[arg(long, default_value = "S1_mobilenetv2")]
    pub space: SpaceName,
    /// Decision vector as a JSON array; the space's template when absent.
    #[arg(long, conflicts_with_all = ["reference", "arch"])]
    pub decisions: Option<String>,
    /// A reference network instead of a space.
    #[arg(long, value_enum, conflicts_with = "arch")]
    pub reference: Option<Reference>,
    /// Network JSON file.
    #[arg(long)]
    pub arch: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Reference {
    MobilenetV2,
    EfficientnetB0,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Accelerator JSON file; the baseline when absent.
    #[arg(long)]
    pub hw: Option<PathBuf>,
    /// Include per-layer costs.
    #[arg(long)]
    pub layers: bool,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CostModelCommand {
    /// Label uniform samples with the analytical models (JSONL).
    Generate {
        #[arg(long, default_value = "S1_mobilenetv2")]
        space: SpaceName,
        #[arg(long, default_value_t = 50_000)]
        n: usize,
        #[arg(long, env = "NAHAS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a dataset; a seeded fraction is held out and reported.
    Train {
        #[arg(long, default_value = "S1_mobilenetv2")]
        space: SpaceName,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training hyperparameters (JSON); defaults when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, env = "NAHAS_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.1)]
        holdout: f64,
        /// Training curve CSV (step, loss).
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Mean relative errors of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Predicted area and latency of one pair.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Decision vector as a JSON array; the template when absent.
        #[arg(long)]
        decisions: Option<String>,
        #[arg(long)]
        hw: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    Latency,
    Energy,
}

impl From<Axis> for CostAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::Latency => CostAxis::Latency,
            Axis::Energy => CostAxis::Energy,
        }
    }
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// Trial log (JSONL).
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "latency")]
    pub axis: Axis,
    /// Ignore trials whose chip area exceeds this.
    #[arg(long)]
    pub max_area: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BruteforceArgs {
    /// Search configuration; its space subset, pinning and reward are used.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
    pub cap: u128,
    #[arg(long, value_enum, default_value = "latency")]
    pub axis: Axis,
}

/// Parses `args` and runs the command. Returns the process exit status.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            f.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Search(a) => cmd_search(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::DumpArch(a) => print_json(&resolve_arch(a)?),
        Command::CostModel(c) => cmd_cost_model(cli, c),
        Command::Pareto(a) => cmd_pareto(cli, a),
        Command::Bruteforce(a) => cmd_bruteforce(cli, a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Runtime(e.into())),
        _ => Ok(()),
    }
}

fn parse_decisions(text: &str) -> Result<DecisionVector, Failure> {
    io::parse_json(text, Path::new("--decisions")).map_err(Failure::from)
}

fn resolve_arch(a: &ArchArgs) -> Result<ArchitectureSpec, Failure> {
    if let Some(path) = &a.arch {
        let mut arch: ArchitectureSpec = read_json(path)?;
        arch.propagate_shapes().map_err(|e| Failure::Config(anyhow!("{}: {e}", path.display())))?;
        return Ok(arch);
    }
    match a.reference {
        Some(Reference::MobilenetV2) => return Ok(mobilenet_v2()),
        Some(Reference::EfficientnetB0) => return Ok(efficientnet_b0()),
        None => {}
    }
    let def = build_space(a.space);
    let d = match &a.decisions {
        Some(text) => parse_decisions(text)?,
        None => def.template_decisions().map_err(anyhow::Error::from)?,
    };
    decode(&def, &d).map_err(|e| Failure::Usage(anyhow!("--decisions: {e}")))
}

fn read_hw(path: Option<&Path>) -> Result<AcceleratorConfig, Failure> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => baseline_config(),
    };
    cfg.check_domain().map_err(|e| Failure::Config(anyhow!("accelerator: {e}")))?;
    Ok(cfg)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Outcome {
    let arch = resolve_arch(&a.arch)?;
    let hw = read_hw(a.hw.as_deref())?;
    let sim = SimulatorCostModel::default();
    let validity = accel::validate(&hw, &arch).map_err(anyhow::Error::from)?;
    let costs = perf::layer_costs(&arch, &hw, &sim.perf);
    let total = perf::totals(&costs, &sim.perf, &sim.energy);
    let mut out = json!({
        "network": arch.name,
        "valid": validity.is_valid(),
        "invalid_reasons": validity.reasons(),
        "area": sim.area(&hw),
        "latency_ms": total.latency_ms,
        "energy_mj": total.energy_mj,
        "macs": count_macs(&arch),
        "params": count_params(&arch),
        "dram_bytes": total.dram_bytes,
        "peak_ops_per_s": peak_throughput(&hw),
        "config": hw,
    });
    if a.layers {
        out["layers"] = serde_json::to_value(&costs).map_err(anyhow::Error::from)?;
    }
    match &a.out {
        Some(p) => write_json(p, &out, cli.force)?,
        None => print_json(&out)?,
    }
    Ok(())
}

fn load_search_config(path: &Path, seed: Option<u64>) -> Result<SearchConfig, Failure> {
    let mut cfg: SearchConfig = read_json(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Config(anyhow!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn load_model(path: &Path) -> Result<SurrogateModel, Failure> {
    let model: SurrogateModel = read_json(path)?;
    model.check().map_err(|e| Failure::Config(anyhow!("{}: {e}", path.display())))?;
    Ok(model)
}

/// The configured cost model behind the parallel pipeline.
fn with_evaluator<R>(
    cfg: &SearchConfig,
    cli: &Cli,
    timings: bool,
    f: impl FnOnce(&dyn nahas_core::search::BatchEvaluator) -> R,
) -> Result<R, Failure> {
    let def = build_space(cfg.space);
    let oracle = SyntheticOracle::new(cfg.oracle.clone());
    match cfg.evaluator_kind {
        EvaluatorKind::Simulator => {
            let ev = ParallelEvaluator { pipeline: Pipeline::new(def, cfg.simulator, oracle), workers: cli.workers, timings };
            Ok(f(&ev))
        }
        EvaluatorKind::Surrogate => {
            let path = cfg
                .surrogate_model
                .as_ref()
                .ok_or_else(|| Failure::Config(anyhow!("surrogate_model: required for the surrogate evaluator")))?;
            let model = load_model(Path::new(path))?;
            let mut cost = SurrogateCostModel::new(model, def.clone())
                .map_err(|e| Failure::Config(anyhow!("surrogate_model: {e}")))?;
            cost.perf = cfg.simulator.perf;
            cost.energy = cfg.simulator.energy;
            let ev = ParallelEvaluator { pipeline: Pipeline::new(def, cost, oracle), workers: cli.workers, timings };
            Ok(f(&ev))
        }
    }
}

fn default_config() -> SearchConfig {
    SearchConfig::new(
        SpaceName::S1MobileNetV2,
        nahas_core::search::ControllerKind::Ppo,
        2000,
        nahas_core::RewardSpec::hard(0.3, 1.0),
    )
}

const CONFIG_NOTES: &str = "\
space               S1_mobilenetv2 | S2_efficientnet | evolved
arch_points         optional list of free decision ids (e.g. \"block3.kernel\"); all when absent
hw_knobs            optional list of free accelerator knobs; all when absent
mode                {\"kind\": \"joint\"} | nas_only {config} | has_only {decisions} | phase {phase1_budget, initial_decisions}
controller          random | reinforce | ppo
budget              number of trials (each costs reward_averaging_n evaluations)
reward              t_latency (ms), t_area (baseline = 1), mode hard|soft, exponents p, q, invalid_penalty
evaluator_kind      simulator | surrogate (then surrogate_model is the model file)
seed                overridden by --seed or NAHAS_SEED
random/reinforce/ppo controller hyperparameters
oracle              synthetic accuracy model
simulator           area, roofline and energy coefficients";

fn cmd_search(cli: &Cli, a: &SearchArgs) -> Outcome {
    if a.print_default_config {
        print_json(&default_config())?;
        eprintln!("{CONFIG_NOTES}");
        return Ok(());
    }
    let (config_path, out) = (a.config.as_ref().expect("required"), a.out.as_ref().expect("required"));
    let cfg = load_search_config(config_path, a.seed)?;
    let paths = [
        ("manifest", out.join("manifest.json")),
        ("trials", out.join("trials.jsonl")),
        ("frontier", out.join("frontier.csv")),
        ("best", out.join("best.json")),
    ];
    for (_, p) in &paths {
        io::check_writable(p, cli.force)?;
    }
    let mut manifest = paths.iter().fold(
        RunManifest::new(
            std::env::args().collect(),
            cfg.seed,
            serde_json::to_value(&cfg).map_err(anyhow::Error::from)?,
            cli.workers.get(),
        ),
        |m, (name, p)| m.output(name, p),
    );
    manifest.write(&paths[0].1, cli.force)?;

    let mut writer = JsonlWriter::create(&paths[1].1, cli.force)?;
    let mut write_error = None;
    let mut best = f64::NEG_INFINITY;
    let budget = cfg.budget;
    let log = with_evaluator(&cfg, cli, a.timings, |ev| {
        run_search(&cfg, ev, &mut |t: &Trial| {
            if write_error.is_none() {
                write_error = writer.write(t).err();
            }
            let improved = t.reward > best;
            best = best.max(t.reward);
            let done = t.trial_id + 1;
            if improved || done.is_multiple_of(100) || done == budget {
                eprintln!("[{done}/{budget}] best reward {best:.6}");
            }
        })
    })?
    .map_err(|e| Failure::Runtime(e.into()))?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    writer.finish()?;
    finish_search_outputs(&log, &paths[2].1, &paths[3].1)?;
    manifest.finish(&paths[0].1)?;
    Ok(())
}

fn finish_search_outputs(log: &TrialLog, frontier_path: &Path, best_path: &Path) -> Outcome {
    let frontier = pareto_frontier(&log.trials, CostAxis::Latency);
    io::write_frontier_csv(frontier_path, &frontier, true)?;
    match log.best() {
        Some(b) => write_json(best_path, b, true)?,
        None => write_json(best_path, &serde_json::Value::Null, true)?,
    }
    Ok(())
}

fn cmd_bruteforce(cli: &Cli, a: &BruteforceArgs) -> Outcome {
    let cfg = load_search_config(&a.config, None)?;
    if matches!(cfg.mode, SearchMode::Phase { .. }) {
        return Err(Failure::Config(anyhow!("mode: phase search has no single space to enumerate")));
    }
    let space = cfg.pinned_space().map_err(|e| Failure::Config(e.into()))?;
    let paths = [
        ("manifest", a.out.join("manifest.json")),
        ("trials", a.out.join("trials.jsonl")),
        ("frontier", a.out.join("frontier.csv")),
        ("optimum", a.out.join("optimum.json")),
    ];
    for (_, p) in &paths {
        io::check_writable(p, cli.force)?;
    }
    let mut manifest = paths.iter().fold(
        RunManifest::new(
            std::env::args().collect(),
            cfg.seed,
            serde_json::to_value(&cfg).map_err(anyhow::Error::from)?,
            cli.workers.get(),
        ),
        |m, (name, p)| m.output(name, p),
    );
    manifest.write(&paths[0].1, cli.force)?;
    let bf = with_evaluator(&cfg, cli, false, |ev| {
        let ctx = SearchContext {
            space: &space,
            reward: &cfg.reward,
            evaluator: ev,
            averaging_n: cfg.reward_averaging_n,
            run_seed: cfg.seed,
            stream_seed: cfg.seed,
            phase: None,
            first_trial_id: 0,
        };
        brute_force(&ctx, a.cap, a.axis.into())
    })?
    .map_err(|e| Failure::Runtime(e.into()))?;
    io::write_jsonl(&paths[1].1, &bf.log.trials, true)?;
    let frontier: Vec<&Trial> = bf.frontier.iter().collect();
    io::write_frontier_csv(&paths[2].1, &frontier, true)?;
    write_json(&paths[3].1, &bf.optimum, true)?;
    manifest.finish(&paths[0].1)?;
    eprintln!("{} points, optimum reward {}", bf.log.len(), bf.optimum.reward);
    Ok(())
}

fn cmd_pareto(cli: &Cli, a: &ParetoArgs) -> Outcome {
    let trials: Vec<Trial> = read_jsonl(&a.trials)?;
    let kept = trials.iter().filter(|t| a.max_area.is_none_or(|m| t.eval.area <= m));
    let frontier = pareto_frontier(kept, a.axis.into());
    io::write_frontier_csv(&a.out, &frontier, cli.force)?;
    eprintln!("{} of {} trials on the {} frontier", frontier.len(), trials.len(), io::axis_name(a.axis.into()));
    Ok(())
}

fn labeled(records: &[Record], layout: &FeatureLayout) -> Result<Vec<Labeled>, Failure> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| r.labeled(layout).map_err(|e| Failure::Config(anyhow!("record {}: {e}", i + 1))))
        .collect()
}

fn cmd_cost_model(cli: &Cli, c: &CostModelCommand) -> Outcome {
    match c {
        CostModelCommand::Generate { space, n, seed, out } => {
            if *n == 0 {
                return Err(Failure::Usage(anyhow!("--n must be at least 1")));
            }
            io::check_writable(out, cli.force)?;
            let records =
                parallel::generate_dataset(&build_space(*space), *n, *seed, &SimulatorCostModel::default(), cli.workers);
            io::write_jsonl(out, &records, cli.force)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
            Ok(())
        }
        CostModelCommand::Train { space, data, out, spec, steps, seed, holdout, curve } => {
            if !(0.0..1.0).contains(holdout) {
                return Err(Failure::Usage(anyhow!("--holdout must be in [0, 1)")));
            }
            io::check_writable(out, cli.force)?;
            if let Some(p) = curve {
                io::check_writable(p, cli.force)?;
            }
            let mut spec: TrainSpec = match spec {
                Some(p) => read_json(p)?,
                None => TrainSpec::default(),
            };
            if let Some(s) = steps {
                spec.training_steps = *s;
            }
            if let Some(s) = seed {
                spec.seed = *s;
            }
            let def = build_space(*space);
            let layout = FeatureLayout::for_space(&def);
            let records: Vec<Record> = read_jsonl(data)?;
            let all = labeled(&records, &layout)?;
            let (train_set, held_out) = split(&all, *holdout, spec.seed);
            let mut points = Vec::new();
            let outcome = train_with(&train_set, &layout, &spec, &mut |p| {
                eprintln!("step {} loss {:.6}", p.step, p.loss);
                points.push(p);
            })
            .map_err(|e| Failure::Runtime(e.into()))?;
            write_json(out, &outcome.model, cli.force)?;
            if let Some(p) = curve {
                let mut w = csv::Writer::from_path(p).with_context(|| p.display().to_string())?;
                for pt in &points {
                    w.serialize(pt).map_err(anyhow::Error::from)?;
                }
                w.flush().map_err(anyhow::Error::from)?;
            }
            let report = json!({
                "train": error_report(&outcome.model, &train_set).map_err(anyhow::Error::from)?,
                "held_out": if held_out.is_empty() { None } else {
                    Some(error_report(&outcome.model, &held_out).map_err(anyhow::Error::from)?)
                },
            });
            print_json(&report)
        }
        CostModelCommand::Eval { model, data } => {
            let model = load_model(model)?;
            let records: Vec<Record> = read_jsonl(data)?;
            let set = labeled(&records, &model.layout)?;
            print_json(&error_report(&model, &set).map_err(anyhow::Error::from)?)
        }
        CostModelCommand::Predict { model, decisions, hw } => {
            let model = load_model(model)?;
            let def = build_space(model.layout.space);
            if !model.layout.matches(&def) {
                return Err(Failure::Config(anyhow!("model layout does not match space {:?}", model.layout.space)));
            }
            let d = match decisions {
                Some(t) => parse_decisions(t)?,
                None => def.template_decisions().map_err(anyhow::Error::from)?,
            };
            let hw = read_hw(hw.as_deref())?;
            let x = model.layout.encode(&d, &hw).map_err(|e| Failure::Usage(anyhow!("{e}")))?;
            let (area, latency_ms) = model.predict(&x).map_err(anyhow::Error::from)?;
            print_json(&json!({ "area": area, "latency_ms": latency_ms }))
        }
    }
}

/// Flushes stdout; used by the binary before exiting.
pub fn flush_stdout() {
    let _ = std::io::stdout().flush();
}
