//! Command-line front end. Every subcommand reads an optional JSON config,
//! applies flag overrides, writes its outputs under the output root and
//! finishes with a `manifest.json`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::dqn::LR_GRID;
use crate::env::scenario_registry;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, run_rfe, RfeResult};
use crate::manifest::{now, RunManifest};
use crate::population::{ingest_csv, synthesize_population, Population};
use crate::preprocess::fit_transform;
use crate::report::{render_report, write_records, SummaryRow};
use crate::schema::FeatureSchema;
use crate::shap::{export_summary, tree_shap};
use crate::sim::{
    fine_tune_run, sweep_scenarios, train_run, BaselineRun, Baselines, Model, RunCheckpoint, RunResult,
    ScenarioAggregate, SimConfig, World, WorldConfig,
};

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "WELL_OUT";

#[derive(Debug, Parser)]
#[command(name = "wellsim", version, about = "Seeded agent-based simulation of private well testing")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; fields override the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Population seed for data commands, first run seed for training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output root (default: $WELL_OUT, then ./wellsim-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 100 agents, 300 episodes, 3 seeds.
    Desk,
    /// 561 agents, 2000 episodes, 3 seeds.
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct WorldInputs {
    /// Population CSV to use instead of synthesizing one.
    #[arg(long)]
    pub population: Option<PathBuf>,
    /// Saved feature selection (from select-features) to reuse.
    #[arg(long)]
    pub rfe: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a calibrated population CSV.
    GenPop {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Validate and normalize a survey CSV against the schema.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Schema JSON; defaults to the canonical schema.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Fit imputation, encoding and scaling; write the design matrix.
    Preprocess {
        #[arg(long)]
        population: Option<PathBuf>,
    },
    /// Random-forest recursive feature elimination with cross-validation.
    SelectFeatures {
        #[arg(long)]
        population: Option<PathBuf>,
        /// Feature-set sizes as start:end:step.
        #[arg(long, default_value = "10:90:10")]
        grid: String,
    },
    /// TreeSHAP explanations of a forest on the top-k features.
    Explain {
        #[command(flatten)]
        inputs: WorldInputs,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Train adoption (and frequency) baselines, one per seed.
    TrainBaseline {
        #[command(flatten)]
        inputs: WorldInputs,
        /// Number of seeds, counting up from --seed.
        #[arg(long)]
        seeds: Option<usize>,
        /// Skip the frequency model.
        #[arg(long)]
        no_frequency: bool,
    },
    /// Fine-tune the baselines under one scenario.
    Scenario {
        #[command(flatten)]
        inputs: WorldInputs,
        /// Scenario id or name.
        #[arg(long)]
        id: String,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        baseline_dir: Option<PathBuf>,
    },
    /// Fine-tune the baselines under many scenarios and write the reports.
    Sweep {
        #[command(flatten)]
        inputs: WorldInputs,
        #[arg(long, conflicts_with = "ids")]
        all: bool,
        /// Comma-separated scenario ids.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<u8>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        baseline_dir: Option<PathBuf>,
    },
    /// Render CSV reports from a saved sweep.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
    /// Short training runs over a grid of learning rates.
    HyperparamSweep {
        #[command(flatten)]
        inputs: WorldInputs,
        /// Comma-separated learning rates (default: the standard grid).
        #[arg(long, value_delimiter = ',')]
        lrs: Vec<f64>,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenPop { .. } => "gen-pop",
            Command::Ingest { .. } => "ingest",
            Command::Preprocess { .. } => "preprocess",
            Command::SelectFeatures { .. } => "select-features",
            Command::Explain { .. } => "explain",
            Command::TrainBaseline { .. } => "train-baseline",
            Command::Scenario { .. } => "scenario",
            Command::Sweep { .. } => "sweep",
            Command::Report { .. } => "report",
            Command::HyperparamSweep { .. } => "hyperparam-sweep",
        }
    }
}

/// Everything a command can be configured with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub world: WorldConfig,
    pub sim: SimConfig,
    pub seeds: Vec<u64>,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl CliConfig {
    pub fn preset(preset: Preset) -> Self {
        let sim = match preset {
            Preset::Desk => SimConfig::desk(),
            Preset::Full => SimConfig::default(),
        };
        Self {
            world: WorldConfig::default(),
            sim,
            seeds: vec![1, 2, 3],
        }
    }

    /// Preset, then the config file merged field by field.
    pub fn load(preset: Preset, file: Option<&Path>) -> Result<Self> {
        let mut value = serde_json::to_value(Self::preset(preset))?;
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let patch: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
            merge(&mut value, patch);
        }
        serde_json::from_value(value).map_err(|e| Error::Usage(format!("invalid config: {e}")))
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parse `start:end:step` into the list of sizes.
pub fn parse_grid(spec: &str) -> Result<Vec<usize>> {
    let parts: Vec<usize> = spec
        .split(':')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Usage(format!("grid {spec:?} must look like start:end:step")))?;
    match parts[..] {
        [start, end, step] if step > 0 && start > 0 && start <= end => Ok((start..=end).step_by(step).collect()),
        [single] if single > 0 => Ok(vec![single]),
        _ => Err(Error::Usage(format!("grid {spec:?} must look like start:end:step with 0 < start <= end"))),
    }
}

fn out_root(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("wellsim-out"))
}

fn run_seeds(cfg: &CliConfig, first: Option<u64>, count: Option<usize>) -> Vec<u64> {
    match (first, count) {
        (None, None) => cfg.seeds.clone(),
        (first, count) => {
            let start = first.or_else(|| cfg.seeds.first().copied()).unwrap_or(1);
            (start..).take(count.unwrap_or(cfg.seeds.len().max(1))).collect()
        }
    }
}

fn load_population(cfg: &CliConfig, path: Option<&Path>) -> Result<Population> {
    match path {
        Some(p) => ingest_csv(p, &FeatureSchema::canonical()),
        None => synthesize_population(cfg.world.agents, cfg.world.population_seed, &cfg.world.calibration),
    }
}

fn load_world(cfg: &CliConfig, inputs: &WorldInputs) -> Result<World> {
    let pop = load_population(cfg, inputs.population.as_deref())?;
    match &inputs.rfe {
        Some(path) => {
            let rfe = RfeResult::from_json(&fs::read_to_string(path)?)?;
            World::from_parts(&pop, fit_transform(&pop)?, rfe.selected_sets)
        }
        None => World::from_population(&pop, &cfg.world.rfe),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Parse `args` (including the program name) and run. Returns the exit
/// code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            0
        }
        Err(e) => {
            eprintln!("wellsim {}: {e}", cli.command.name());
            match e {
                Error::Usage(_) | Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

/// Run a parsed command; returns the path of its manifest.
pub fn dispatch(cli: &Cli) -> Result<PathBuf> {
    let started = now();
    let common = &cli.common;
    let mut cfg = CliConfig::load(common.preset.unwrap_or(Preset::Desk), common.config.as_deref())?;
    let name = cli.command.name();
    let dir = out_root(common).join(name);
    fs::create_dir_all(&dir)?;
    let mut inputs: Vec<PathBuf> = common.config.iter().cloned().collect();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut seed = common.seed;

    match &cli.command {
        Command::GenPop { n } => {
            if let Some(n) = n {
                cfg.world.agents = *n;
            }
            if let Some(s) = common.seed {
                cfg.world.population_seed = s;
            }
            seed = Some(cfg.world.population_seed);
            let pop = load_population(&cfg, None)?;
            let path = dir.join("population.csv");
            pop.save_csv(&path)?;
            info!("{} agents, testing rate {:.3}", pop.len(), pop.adoption_rate());
            outputs.push(path);
        }
        Command::Ingest { input, schema } => {
            let schema = match schema {
                Some(p) => {
                    inputs.push(p.clone());
                    FeatureSchema::load(p)?
                }
                None => FeatureSchema::canonical(),
            };
            inputs.push(input.clone());
            let pop = ingest_csv(input, &schema)?;
            let path = dir.join("population.csv");
            pop.save_csv(&path)?;
            let prov = dir.join("provenance.json");
            write_json(&prov, &pop.provenance)?;
            outputs.extend([path, prov]);
        }
        Command::Preprocess { population } => {
            if let Some(s) = common.seed {
                cfg.world.population_seed = s;
            }
            inputs.extend(population.iter().cloned());
            let pop = load_population(&cfg, population.as_deref())?;
            let design = fit_transform(&pop)?;
            let transform = dir.join("transform.json");
            fs::write(&transform, design.transform.to_json()?)?;
            let matrix = dir.join("design.csv");
            design.write_csv(fs::File::create(&matrix)?)?;
            info!("{} columns, {} outlier cells flagged", design.columns.len(), design.outlier_count());
            outputs.extend([transform, matrix]);
        }
        Command::SelectFeatures { population, grid } => {
            if let Some(s) = common.seed {
                cfg.world.population_seed = s;
                cfg.world.rfe.seed = s;
            }
            inputs.extend(population.iter().cloned());
            let pop = load_population(&cfg, population.as_deref())?;
            let design = fit_transform(&pop)?;
            let y: Vec<f64> = pop.agents.iter().map(|a| a.label_adoption.unwrap_or(0) as f64).collect();
            let mut rfe_cfg = cfg.world.rfe.clone();
            rfe_cfg.grid = parse_grid(grid)?;
            rfe_cfg.grid.retain(|&k| k <= design.columns.len());
            let result = run_rfe(design.rows.view(), &y, &design.columns, &rfe_cfg)?;
            let path = dir.join("rfe.json");
            fs::write(&path, result.to_json()?)?;
            outputs.push(path);
        }
        Command::Explain { inputs: wi, k } => {
            if let Some(s) = common.seed {
                cfg.world.population_seed = s;
            }
            inputs.extend(wi.population.iter().chain(&wi.rfe).cloned());
            let world = load_world(&cfg, wi)?;
            let names = world
                .feature_sets
                .get(k)
                .ok_or_else(|| Error::Usage(format!("feature set {k} was not recorded")))?
                .clone();
            let pop = load_population(&cfg, wi.population.as_deref())?;
            let y: Vec<f64> = pop.agents.iter().map(|a| a.label_adoption.unwrap_or(0) as f64).collect();
            let x = world.design.select(&names)?;
            let forest = fit_forest(x.view(), &y, &cfg.world.rfe.forest)?;
            let shap = tree_shap(&forest, x.view())?;
            let summary = export_summary(&shap, x.view(), &names, &world.design.agent_ids, names.len())?;
            let imp = dir.join("shap_importance.csv");
            summary.write_importance_csv(fs::File::create(&imp)?)?;
            let dots = dir.join("shap_dots.csv");
            summary.write_dots_csv(fs::File::create(&dots)?)?;
            let model = dir.join("forest.json");
            fs::write(&model, forest.to_json()?)?;
            outputs.extend([imp, dots, model]);
        }
        Command::TrainBaseline {
            inputs: wi,
            seeds,
            no_frequency,
        } => {
            inputs.extend(wi.population.iter().chain(&wi.rfe).cloned());
            let world = load_world(&cfg, wi)?;
            let seeds = run_seeds(&cfg, common.seed, *seeds);
            let (baselines, runs) = crate::sim::train_baselines(&world, &cfg.sim, &seeds, !no_frequency)?;
            for run in &runs {
                let sdir = dir.join(format!("seed-{}", run.seed));
                fs::create_dir_all(&sdir)?;
                let mut files = vec![
                    (sdir.join("adoption.ckpt.json"), &baselines.adoption[&run.seed]),
                ];
                if let Some(f) = baselines.frequency.get(&run.seed) {
                    files.push((sdir.join("frequency.ckpt.json"), f));
                }
                for (path, ckpt) in files {
                    ckpt.save(&path)?;
                    outputs.push(path);
                }
                let result = sdir.join("result.json");
                write_json(&result, run)?;
                outputs.push(result);
            }
            outputs.extend(write_baseline_report(&runs, &dir)?);
        }
        Command::Scenario {
            inputs: wi,
            id,
            seeds,
            baseline_dir,
        } => {
            inputs.extend(wi.population.iter().chain(&wi.rfe).cloned());
            let spec = crate::env::find_scenario(id)?;
            let world = load_world(&cfg, wi)?;
            let seeds = run_seeds(&cfg, common.seed, *seeds);
            let bdir = baseline_dir.clone().unwrap_or_else(|| out_root(common).join("train-baseline"));
            let baselines = load_baselines(&bdir, &seeds)?;
            inputs.push(bdir);
            for &s in &seeds {
                let base = SimConfig {
                    seed: s,
                    scenario: Some(spec.id),
                    model: Model::Adoption,
                    ..cfg.sim.clone()
                };
                let sdir = dir.join(format!("scenario-{}-seed-{s}", spec.id));
                fs::create_dir_all(&sdir)?;
                let (adoption, ckpt) = fine_tune_run(&world, &base, &baselines.adoption[&s], None)?;
                let mut runs: Vec<(String, RunResult)> = vec![("adoption".into(), adoption)];
                if let Some(fb) = baselines.frequency.get(&s) {
                    let fcfg = SimConfig {
                        model: Model::Frequency,
                        ..base.clone()
                    };
                    runs.push(("frequency".into(), fine_tune_run(&world, &fcfg, fb, Some(ckpt.learner.net.clone()))?.0));
                }
                let path = sdir.join("adoption.ckpt.json");
                ckpt.save(&path)?;
                outputs.push(path);
                for (label, run) in &runs {
                    let path = sdir.join(format!("result_{label}.json"));
                    write_json(&path, run)?;
                    outputs.push(path);
                    let curve = sdir.join(format!("learning_curve_{label}.csv"));
                    write_records(&curve, &crate::report::curve_records(run))?;
                    outputs.push(curve);
                }
            }
        }
        Command::Sweep {
            inputs: wi,
            all,
            ids,
            seeds,
            baseline_dir,
        } => {
            let ids: Vec<u8> = if *all {
                scenario_registry().iter().map(|s| s.id).collect()
            } else if ids.is_empty() {
                return Err(Error::Usage("sweep needs --all or --ids".into()));
            } else {
                ids.clone()
            };
            inputs.extend(wi.population.iter().chain(&wi.rfe).cloned());
            let world = load_world(&cfg, wi)?;
            let seeds = run_seeds(&cfg, common.seed, *seeds);
            let bdir = baseline_dir.clone().unwrap_or_else(|| out_root(common).join("train-baseline"));
            let baselines = load_baselines(&bdir, &seeds)?;
            let baseline_runs = load_baseline_runs(&bdir, &seeds)?;
            inputs.push(bdir);
            let scenarios = sweep_scenarios(&world, &cfg.sim, &ids, &seeds, &baselines)?;
            let sweep = SweepOutput {
                format_version: SWEEP_FORMAT_VERSION,
                baseline: baseline_runs,
                scenarios,
            };
            let path = dir.join("sweep.json");
            write_json(&path, &sweep)?;
            outputs.push(path);
            outputs.extend(write_sweep_report(&sweep, &dir)?);
        }
        Command::Report { input } => {
            inputs.push(input.clone());
            let sweep: SweepOutput = serde_json::from_str(&fs::read_to_string(input)?)?;
            if sweep.format_version != SWEEP_FORMAT_VERSION {
                return Err(Error::Usage(format!("sweep format_version {} not supported", sweep.format_version)));
            }
            outputs.extend(write_sweep_report(&sweep, &dir)?);
        }
        Command::HyperparamSweep {
            inputs: wi,
            lrs,
            episodes,
        } => {
            inputs.extend(wi.population.iter().chain(&wi.rfe).cloned());
            let world = load_world(&cfg, wi)?;
            let lrs = if lrs.is_empty() { LR_GRID.to_vec() } else { lrs.clone() };
            let s = common.seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(1);
            let mut sim = cfg.sim.clone();
            sim.seed = s;
            if let Some(e) = episodes {
                sim.episodes = *e;
                sim.convergence.window = sim.convergence.window.min(e / 2).max(1);
                sim.convergence.patience = sim.convergence.patience.min(e / 2).max(1);
            }
            sim.checkpoint_dir = Some(dir.join("diverged"));
            let rows = hyperparam_sweep(&world, &sim, &lrs)?;
            let path = dir.join("hyperparam.csv");
            write_records(&path, &rows)?;
            outputs.push(path);
            outputs.extend(rows.iter().filter_map(|r| r.checkpoint.clone().map(PathBuf::from)));
        }
    }

    let mut manifest = RunManifest::new(name, &cfg, seed, started)?;
    manifest.inputs = inputs;
    manifest.outputs = outputs;
    manifest.save(&dir)
}

pub const SWEEP_FORMAT_VERSION: u32 = 1;

/// Saved sweep: the baseline runs and the scenario aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub format_version: u32,
    pub baseline: Vec<BaselineRun>,
    pub scenarios: BTreeMap<u8, ScenarioAggregate>,
}

fn baseline_row(runs: &[BaselineRun]) -> Result<SummaryRow> {
    let adoption: Vec<&RunResult> = runs.iter().map(|r| &r.adoption).collect();
    let frequency: Vec<&RunResult> = runs.iter().filter_map(|r| r.frequency.as_ref()).collect();
    SummaryRow::baseline(&adoption, &frequency)
}

fn write_baseline_report(runs: &[BaselineRun], dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = vec![baseline_row(runs)?];
    let curves: Vec<(String, &RunResult)> = runs
        .iter()
        .flat_map(|r| {
            let mut v = vec![(format!("baseline_adoption_seed{}", r.seed), &r.adoption)];
            if let Some(f) = &r.frequency {
                v.push((format!("baseline_frequency_seed{}", r.seed), f));
            }
            v
        })
        .collect();
    render_report(&rows, &curves, dir)
}

/// Summary, frequency breakdown and a learning curve per run.
pub fn write_sweep_report(sweep: &SweepOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut rows = Vec::new();
    if !sweep.baseline.is_empty() {
        rows.push(baseline_row(&sweep.baseline)?);
    }
    rows.extend(sweep.scenarios.values().map(SummaryRow::scenario));
    let mut curves: Vec<(String, &RunResult)> = Vec::new();
    for agg in sweep.scenarios.values() {
        for cell in &agg.cells {
            curves.push((format!("scenario{}_adoption_seed{}", agg.id, cell.seed), &cell.adoption));
            if let Some(f) = &cell.frequency {
                curves.push((format!("scenario{}_frequency_seed{}", agg.id, cell.seed), f));
            }
        }
    }
    render_report(&rows, &curves, dir)
}

fn load_baselines(dir: &Path, seeds: &[u64]) -> Result<Baselines> {
    let mut b = Baselines::default();
    for &s in seeds {
        let sdir = dir.join(format!("seed-{s}"));
        let adoption = sdir.join("adoption.ckpt.json");
        if !adoption.exists() {
            return Err(Error::MissingBaseline(format!(
                "{} not found; run `wellsim train-baseline --seed {s}` (same preset and config) first",
                adoption.display()
            )));
        }
        b.adoption.insert(s, RunCheckpoint::load(&adoption)?);
        let freq = sdir.join("frequency.ckpt.json");
        if freq.exists() {
            b.frequency.insert(s, RunCheckpoint::load(&freq)?);
        }
    }
    Ok(b)
}

fn load_baseline_runs(dir: &Path, seeds: &[u64]) -> Result<Vec<BaselineRun>> {
    seeds
        .iter()
        .filter_map(|s| {
            let p = dir.join(format!("seed-{s}")).join("result.json");
            p.exists().then(|| Ok(serde_json::from_str(&fs::read_to_string(p)?)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamRow {
    pub lr: f64,
    pub diverged: bool,
    pub episodes: usize,
    pub final_testers: Option<usize>,
    pub final_mse: Option<f64>,
    pub last_loss: Option<f64>,
    pub detail: String,
    pub checkpoint: Option<String>,
}

/// Train the adoption baseline once per learning rate. Divergence is a
/// result here, not a failure.
pub fn hyperparam_sweep(world: &World, sim: &SimConfig, lrs: &[f64]) -> Result<Vec<HyperparamRow>> {
    lrs.iter()
        .map(|&lr| {
            let mut cfg = sim.clone();
            cfg.model = Model::Adoption;
            cfg.scenario = None;
            cfg.train.lr = lr;
            match train_run(world, &cfg, None) {
                Ok((r, _)) => Ok(HyperparamRow {
                    lr,
                    diverged: false,
                    episodes: r.episodes_run(),
                    final_testers: Some(r.final_testers),
                    final_mse: Some(r.final_mse).filter(|m| m.is_finite()),
                    last_loss: r.per_episode.iter().rev().find_map(|m| m.loss),
                    detail: String::new(),
                    checkpoint: None,
                }),
                Err(Error::Divergence { step, detail, checkpoint }) => Ok(HyperparamRow {
                    lr,
                    diverged: true,
                    episodes: 0,
                    final_testers: None,
                    final_mse: None,
                    last_loss: None,
                    detail: format!("step {step}: {detail}"),
                    checkpoint: checkpoint.map(|p| p.display().to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}
