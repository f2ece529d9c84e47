//! The `riskdec` command line.
//!
//! Every command resolves its configuration from defaults, then the JSON
//! config file, then flags, and echoes the resolved configuration into the
//! result document it stores.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analysis::{self, Method, ModelTable};
use crate::decomposition::{self, RefRisk, RiskComponents, Setting, SettingResult};
use crate::error::{Error, Result};
use crate::fvec_io::{default_sub_size, load_fvec, make_split_plan, save_fvec};
use crate::probe::{LambdaPolicy, TrainConfig, DEFAULT_LAMBDA_GRID};
use crate::repstats;
use crate::report::{self, MetricTable, ResultStore, StoredDoc};
use crate::rng;
use crate::scaling::{self, Holdout, ScalingObservation};
use crate::synth::{self, EncoderSpec, PretrainSet, SweepConfig, SweepRow, SynthTask};

#[derive(Debug, Parser)]
#[command(name = "riskdec", version, about = "Risk decomposition for linearly probed encoders")]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where to write the command's result document.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Result store directory.
    #[arg(long, global = true, env = "RISKDEC_STORE", default_value = "riskdec-store")]
    pub store: PathBuf,
    /// Recompute even when the store already holds this configuration.
    #[arg(long, global = true)]
    pub force: bool,
    /// JSON config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the four risk components of one encoder.
    Decompose(DecomposeArgs),
    /// Test risk under label-budget settings.
    Fewshot(FewshotArgs),
    /// Effective dimension, uniformity and alignment of a representation.
    Stats(StatsArgs),
    /// Fit scaling laws.
    #[command(subcommand)]
    Scaling(ScalingCommand),
    /// Synthetic tasks and encoder sweeps.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Linear analysis of a design choice.
    Analyze(AnalyzeArgs),
    /// Emit tables from the result store.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct ProbeArgs {
    /// Fixed regularization strength (skips tuning).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated tuning grid.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Training error of a supervised model of the same family.
    #[arg(long)]
    pub ref_risk: Option<f64>,
    /// Raw inputs of the train set, for computing hr_FF.
    #[arg(long)]
    pub raw_train: Option<PathBuf>,
    /// Encoder id used in the store; defaults to the train file stem.
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub sub_size: Option<usize>,
    #[arg(long)]
    pub bayes_risk: Option<f64>,
    /// Also report the alternative decomposition.
    #[arg(long)]
    pub alternative: bool,
    #[command(flatten)]
    pub probe: ProbeArgs,
}

#[derive(Debug, Args)]
pub struct FewshotArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub encoder: Option<String>,
    /// Comma-separated settings such as `100%,30-shot,1%`.
    #[arg(long, value_delimiter = ',')]
    pub settings: Option<Vec<String>>,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long)]
    pub n_seeds: Option<u64>,
    #[command(flatten)]
    pub probe: ProbeArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Paired representation for alignment.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ScalingCommand {
    Fit(ScalingFitArgs),
}

#[derive(Debug, Args)]
pub struct ScalingFitArgs {
    /// JSON list of observations.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// `iid` or `group:<key>`.
    #[arg(long)]
    pub holdout: Option<String>,
    /// `decomposition` or `standard`.
    #[arg(long)]
    pub law: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Write raw_{pretrain,train,test}.fvec for a task.
    Gen(SynthGenArgs),
    /// Decompose every encoder in a list and write the frontier table.
    Sweep(SynthSweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthGenArgs {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthSweepArgs {
    /// JSON list of encoder specs.
    #[arg(long)]
    pub encoders: Option<PathBuf>,
    /// JSON task; defaults to the ten-class Gaussian task.
    #[arg(long)]
    pub task: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub n_seeds: Option<u64>,
    /// `pool`, `train` or `train_and_pool`.
    #[arg(long)]
    pub pretrain: Option<String>,
    /// Subtract the oracle Bayes risk from the approximation error.
    #[arg(long)]
    pub excess_risk: bool,
    #[command(flatten)]
    pub probe: ProbeArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// `ca` or `gla`.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub hparam: Option<String>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub controls: Option<Vec<String>>,
    #[arg(long)]
    pub log_hparam: bool,
    #[arg(long)]
    pub log_metric: bool,
    /// Other response columns, excluded from the design.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    #[arg(long)]
    pub id_column: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Defaults to `<store>/report`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub val_fraction: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            lambda: None,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            val_fraction: 0.1,
            max_iter: TrainConfig::default().max_iter,
            grad_tol: TrainConfig::default().grad_tol,
        }
    }
}

impl ProbeSettings {
    fn policy(&self, seed: u64) -> LambdaPolicy {
        match self.lambda {
            Some(l) => LambdaPolicy::Fixed(l),
            None => LambdaPolicy::Tune {
                grid: self.lambda_grid.clone(),
                val_fraction: self.val_fraction,
                seed,
            },
        }
    }

    fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub seed: u64,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub ref_risk: Option<f64>,
    pub raw_train: Option<PathBuf>,
    pub encoder: Option<String>,
    pub sub_size: Option<usize>,
    pub bayes_risk: f64,
    pub alternative: bool,
    pub probe: ProbeSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FewshotConfig {
    pub seed: u64,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub encoder: Option<String>,
    pub settings: Vec<String>,
    pub seeds: Vec<u64>,
    pub probe: ProbeSettings,
}

impl Default for FewshotConfig {
    fn default() -> Self {
        FewshotConfig {
            seed: 0,
            train: None,
            test: None,
            encoder: None,
            settings: Setting::defaults().iter().map(Setting::to_string).collect(),
            seeds: (0..5).collect(),
            probe: ProbeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub seed: u64,
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub atol: f64,
    pub rtol: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            seed: 0,
            input: None,
            pairs: None,
            atol: repstats::DEFAULT_ATOL,
            rtol: repstats::DEFAULT_RTOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub seed: u64,
    pub obs: Option<PathBuf>,
    pub holdout: Option<String>,
    pub law: String,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            seed: 0,
            obs: None,
            holdout: None,
            law: "decomposition".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepCliConfig {
    pub seed: u64,
    pub encoders: Option<PathBuf>,
    pub task: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub pretrain: PretrainSet,
    pub sub_size: Option<usize>,
    pub excess_risk: bool,
    pub probe: ProbeSettings,
}

impl Default for SweepCliConfig {
    fn default() -> Self {
        SweepCliConfig {
            seed: 0,
            encoders: None,
            task: None,
            seeds: (0..10).collect(),
            pretrain: PretrainSet::default(),
            sub_size: None,
            excess_risk: false,
            probe: ProbeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub seed: u64,
    pub table: Option<PathBuf>,
    pub method: Option<String>,
    pub hparam: Option<String>,
    pub metric: Option<String>,
    pub controls: Vec<String>,
    pub log_hparam: bool,
    pub log_metric: bool,
    pub metrics: Vec<String>,
    pub id_column: Option<String>,
}

/// Column names treated as responses when `--metrics` is not given.
pub const KNOWN_METRICS: [&str; 14] = [
    "approx",
    "usability",
    "probe_gen",
    "encoder_gen",
    "total",
    "hr_FF",
    "hr_AF",
    "hr_AS",
    "hr_US",
    "100%",
    "30-shot",
    "1%",
    "5-shot",
    "3-shot",
];

/// Overwrites keys of `base` with those of `over`, recursing into objects.
fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Flag values that were actually given, as a JSON overlay.
#[derive(Default)]
struct Flags(Map<String, Value>);

impl Flags {
    fn set<T: Serialize>(&mut self, path: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            let v = serde_json::to_value(v).expect("flag values serialize");
            let mut keys = path.split('.').peekable();
            let mut map = &mut self.0;
            while let Some(k) = keys.next() {
                if keys.peek().is_none() {
                    map.insert(k.to_string(), v);
                    break;
                }
                map = map
                    .entry(k.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
                    .as_object_mut()
                    .expect("flag paths do not collide");
            }
        }
        self
    }

    fn flag(&mut self, path: &str, on: bool) -> &mut Self {
        self.set(path, on.then_some(true))
    }

    fn probe(&mut self, p: &ProbeArgs) -> &mut Self {
        self.set("probe.lambda", p.lambda)
            .set("probe.lambda_grid", p.lambda_grid.clone())
            .set("probe.val_fraction", p.val_fraction)
            .set("probe.max_iter", p.max_iter)
    }
}

/// The section of a config file that applies to `command`: the object under
/// that key if present (with a top-level `seed` as fallback), otherwise the
/// whole file.
fn file_section(file: Option<&Value>, command: &str) -> Result<Value> {
    let Some(file) = file else {
        return Ok(Value::Object(Map::new()));
    };
    let obj = file
        .as_object()
        .ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
    match obj.get(command) {
        Some(section @ Value::Object(_)) => {
            let mut out = Value::Object(Map::new());
            if let Some(seed) = obj.get("seed") {
                out["seed"] = seed.clone();
            }
            merge(&mut out, section);
            Ok(out)
        }
        Some(_) => Err(Error::Config(format!("config section `{command}` must be an object"))),
        None => Ok(file.clone()),
    }
}

fn resolve<T: Serialize + DeserializeOwned + Default>(
    command: &str,
    file: Option<&Value>,
    flags: &Flags,
    seed: Option<u64>,
) -> Result<(T, Value)> {
    let mut value = serde_json::to_value(T::default())?;
    merge(&mut value, &file_section(file, command)?);
    merge(&mut value, &Value::Object(flags.0.clone()));
    if let Some(s) = seed {
        value["seed"] = json!(s);
    }
    let cfg: T = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("{command} configuration: {e}")))?;
    let resolved = serde_json::to_value(&cfg)?;
    Ok((cfg, resolved))
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

/// Resolved configuration plus the content hash of every input file, which
/// is what the store keys on.
fn with_inputs(resolved: &Value, inputs: &[&Path]) -> Result<Value> {
    let mut hashes = Map::new();
    for p in inputs {
        hashes.insert(p.display().to_string(), json!(report::file_hash(p)?));
    }
    let mut v = resolved.clone();
    v["inputs"] = Value::Object(hashes);
    Ok(v)
}

struct Ctx {
    store: ResultStore,
    out: Option<PathBuf>,
    force: bool,
    seed: Option<u64>,
    file: Option<Value>,
}

impl Ctx {
    fn emit(&self, doc: &StoredDoc) -> Result<()> {
        if let Some(out) = &self.out {
            report::write_atomic(out, serde_json::to_string_pretty(doc)?.as_bytes())?;
        }
        Ok(())
    }

    fn run_stored<F>(&self, command: &str, encoder: &str, key: &Value, run: F) -> Result<StoredDoc>
    where
        F: FnOnce() -> Result<Value>,
    {
        let (doc, hit) = self.store.get_or_run(command, encoder, key, self.force, run)?;
        if hit {
            log::info!("{command} `{encoder}`: reusing stored result {}", &doc.config_hash[..16]);
        }
        self.emit(&doc)?;
        Ok(doc)
    }
}

/// Parses arguments from the process and runs; returns the exit code.
pub fn main_from_env() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let ctx = Ctx {
        store: ResultStore::open(&cli.store)?,
        out: cli.out,
        force: cli.force,
        seed: cli.seed,
        file,
    };
    match cli.command {
        Command::Decompose(a) => cmd_decompose(&ctx, &a),
        Command::Fewshot(a) => cmd_fewshot(&ctx, &a),
        Command::Stats(a) => cmd_stats(&ctx, &a),
        Command::Scaling(ScalingCommand::Fit(a)) => cmd_scaling(&ctx, &a),
        Command::Synth(SynthCommand::Gen(a)) => cmd_synth_gen(&ctx, &a),
        Command::Synth(SynthCommand::Sweep(a)) => cmd_synth_sweep(&ctx, &a),
        Command::Analyze(a) => cmd_analyze(&ctx, &a),
        Command::Report(a) => cmd_report(&ctx, &a),
    }
}

fn cmd_decompose(ctx: &Ctx, a: &DecomposeArgs) -> Result<()> {
    let mut flags = Flags::default();
    flags
        .set("train", a.train.clone())
        .set("test", a.test.clone())
        .set("ref_risk", a.ref_risk)
        .set("raw_train", a.raw_train.clone())
        .set("encoder", a.encoder.clone())
        .set("sub_size", a.sub_size)
        .set("bayes_risk", a.bayes_risk)
        .flag("alternative", a.alternative)
        .probe(&a.probe);
    let (cfg, resolved): (DecomposeConfig, _) = resolve("decompose", ctx.file.as_ref(), &flags, ctx.seed)?;
    let train_path = required(&cfg.train, "train")?;
    let test_path = required(&cfg.test, "test")?;
    let mut inputs = vec![train_path.as_path(), test_path.as_path()];
    match (&cfg.ref_risk, &cfg.raw_train) {
        (Some(_), Some(_)) => {
            return Err(Error::Usage("give either --ref-risk or --raw-train, not both".into()))
        }
        (None, None) => {
            return Err(Error::Usage(
                "hr_FF needs a source: pass --ref-risk or --raw-train".into(),
            ))
        }
        (None, Some(raw)) => inputs.push(raw),
        _ => {}
    }
    let encoder = cfg.encoder.clone().unwrap_or_else(|| stem(train_path));
    let key = with_inputs(&resolved, &inputs)?;
    let doc = ctx.run_stored("decompose", &encoder, &key, || {
        let train = load_fvec(train_path)?;
        let test = load_fvec(test_path)?;
        let raw = cfg.raw_train.as_ref().map(load_fvec).transpose()?;
        let reference = match (&raw, cfg.ref_risk) {
            (Some(r), _) => RefRisk::Raw(r),
            (None, Some(v)) => RefRisk::External(v),
            (None, None) => RefRisk::Missing,
        };
        let sub_size = cfg.sub_size.unwrap_or_else(|| default_sub_size(train.n(), test.n()));
        let plan = make_split_plan(&train, &test, sub_size, cfg.seed)?;
        let policy = cfg.probe.policy(rng::derive(cfg.seed, 1));
        let tc = cfg.probe.train(cfg.seed);
        let (est, mut comps) = decomposition::estimate_components(&train, &test, &plan, reference, &policy, &tc)?;
        if cfg.bayes_risk != 0.0 {
            comps = comps.with_bayes(cfg.bayes_risk)?;
        }
        let alt = if cfg.alternative {
            Some(decomposition::alternative_components(&train, &test, &policy, &tc)?)
        } else {
            None
        };
        Ok(json!({
            "estimates": est,
            "components": comps,
            "alternative": alt,
            "n_train": train.n(),
            "n_test": test.n(),
            "sub_size": sub_size,
        }))
    })?;
    let comps: RiskComponents = serde_json::from_value(doc.result["components"].clone())?;
    print!("{}", report::component_table(&comps));
    Ok(())
}

fn seeds_from(explicit: Option<&Vec<u64>>, count: Option<u64>, base: Option<u64>) -> Option<Vec<u64>> {
    match (explicit, count) {
        (Some(s), _) => Some(s.clone()),
        (None, Some(k)) => {
            let b = base.unwrap_or(0);
            Some((b..b + k).collect())
        }
        _ => None,
    }
}

fn cmd_fewshot(ctx: &Ctx, a: &FewshotArgs) -> Result<()> {
    let mut flags = Flags::default();
    flags
        .set("train", a.train.clone())
        .set("test", a.test.clone())
        .set("encoder", a.encoder.clone())
        .set("settings", a.settings.clone())
        .set("seeds", seeds_from(a.seeds.as_ref(), a.n_seeds, ctx.seed))
        .probe(&a.probe);
    let (cfg, resolved): (FewshotConfig, _) = resolve("fewshot", ctx.file.as_ref(), &flags, ctx.seed)?;
    let train_path = required(&cfg.train, "train")?;
    let test_path = required(&cfg.test, "test")?;
    let settings = cfg.settings.iter().map(|s| s.parse()).collect::<Result<Vec<Setting>>>()?;
    if cfg.seeds.is_empty() {
        return Err(Error::Usage("at least one seed is required".into()));
    }
    let encoder = cfg.encoder.clone().unwrap_or_else(|| stem(train_path));
    let key = with_inputs(&resolved, &[train_path, test_path])?;
    let doc = ctx.run_stored("fewshot", &encoder, &key, || {
        let train = load_fvec(train_path)?;
        let test = load_fvec(test_path)?;
        let policy = cfg.probe.policy(rng::derive(cfg.seed, 1));
        let results = decomposition::fewshot_suite(&train, &test, &settings, &cfg.seeds, &policy, &cfg.probe.train(cfg.seed))?;
        Ok(json!({ "n_full": train.n(), "settings": results }))
    })?;
    let results: Vec<SettingResult> = serde_json::from_value(doc.result["settings"].clone())?;
    let csv = report::fewshot_csv(&results)?;
    if let Some(out) = &ctx.out {
        report::write_atomic(&out.with_extension("csv"), csv.as_bytes())?;
    }
    for r in &results {
        match (r.mean, r.std, &r.infeasible) {
            (Some(m), Some(s), _) => println!("{:<10}{:>8.4} ± {:.4}   accuracy {}", r.setting.to_string(), m, s, report::accuracy(m)),
            (_, _, Some(why)) => println!("{:<10}infeasible: {why}", r.setting.to_string()),
            _ => {}
        }
    }
    let feasible: Vec<f64> = results.iter().filter_map(|r| r.mean).collect();
    println!("{}", report::render_accuracy_row(&feasible));
    Ok(())
}

fn cmd_stats(ctx: &Ctx, a: &StatsArgs) -> Result<()> {
    let mut flags = Flags::default();
    flags
        .set("in", a.input.clone())
        .set("pairs", a.pairs.clone())
        .set("atol", a.atol)
        .set("rtol", a.rtol);
    let (cfg, resolved): (StatsConfig, _) = resolve("stats", ctx.file.as_ref(), &flags, ctx.seed)?;
    let input = required(&cfg.input, "in")?;
    let mut inputs = vec![input.as_path()];
    inputs.extend(cfg.pairs.as_deref());
    let key = with_inputs(&resolved, &inputs)?;
    let doc = ctx.run_stored("stats", &stem(input), &key, || {
        let z = load_fvec(input)?;
        let pairs = cfg.pairs.as_ref().map(load_fvec).transpose()?;
        let stats = repstats::RepStats {
            effective_dim: repstats::effective_dim(z.features(), cfg.atol, cfg.rtol)?,
            uniformity: repstats::uniformity(z.features())?,
            alignment: pairs.as_ref().map(|p| repstats::alignment(z.features(), p.features())).transpose()?,
        };
        Ok(serde_json::to_value(stats)?)
    })?;
    println!("{}", serde_json::to_string_pretty(&doc.result)?);
    Ok(())
}

fn cmd_scaling(ctx: &Ctx, a: &ScalingFitArgs) -> Result<()> {
    let mut flags = Flags::default();
    flags
        .set("obs", a.obs.clone())
        .set("holdout", a.holdout.clone())
        .set("law", a.law.clone());
    let (cfg, resolved): (ScalingConfig, _) = resolve("scaling", ctx.file.as_ref(), &flags, ctx.seed)?;
    let obs_path = required(&cfg.obs, "obs")?;
    let holdout = cfg
        .holdout
        .as_deref()
        .map(|h| {
            h.parse::<Holdout>().map(|h| match h {
                Holdout::Iid { .. } => Holdout::Iid { seed: cfg.seed },
                g => g,
            })
        })
        .transpose()?;
    if !matches!(cfg.law.as_str(), "decomposition" | "standard") {
        return Err(Error::Usage(format!("--law must be `decomposition` or `standard`, got `{}`", cfg.law)));
    }
    if cfg.law == "standard" && holdout.is_some() {
        return Err(Error::Usage("held-out scoring is implemented for the decomposition law".into()));
    }
    let key = with_inputs(&resolved, &[obs_path])?;
    let doc = ctx.run_stored("scaling", &stem(obs_path), &key, || {
        let text = fs::read_to_string(obs_path).map_err(|e| Error::io(obs_path, e))?;
        let obs: Vec<ScalingObservation> =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", obs_path.display())))?;
        if cfg.law == "standard" {
            return Ok(serde_json::to_value(scaling::fit_standard_law(&obs)?)?);
        }
        let fit = match &holdout {
            Some(h) => scaling::fit_with_holdout(&obs, h)?,
            None => scaling::fit_decomposition_law(&obs)?,
        };
        Ok(serde_json::to_value(fit)?)
    })?;
    let r = &doc.result;
    if cfg.law == "standard" {
        println!("groups {}  R² {:.4}", r["groups"].as_array().map_or(0, Vec::len), r["r2_train"].as_f64().unwrap_or(f64::NAN));
    } else {
        print!("alpha {:.4}  w {:.4}  R² {:.4}", r["alpha"].as_f64().unwrap_or(f64::NAN), r["w"].as_f64().unwrap_or(f64::NAN), r["r2_train"].as_f64().unwrap_or(f64::NAN));
        match r["r2_test"].as_f64() {
            Some(t) => println!("  held-out R² {t:.4}"),
            None => println!(),
        }
    }
    Ok(())
}

fn cmd_synth_gen(ctx: &Ctx, a: &SynthGenArgs) -> Result<()> {
    let section = file_section(ctx.file.as_ref(), "synth")?;
    let mut task_value = serde_json::to_value(SynthTask::gaussian_default(0))?;
    let mut out_dir = a.out_dir.clone();
    if let Value::Object(mut m) = section {
        if let Some(d) = m.remove("out_dir") {
            out_dir = out_dir.or_else(|| d.as_str().map(PathBuf::from));
        }
        merge(&mut task_value, &Value::Object(m));
    }
    if let Some(s) = ctx.seed {
        task_value["seed"] = json!(s);
    }
    let task: SynthTask =
        serde_json::from_value(task_value).map_err(|e| Error::Config(format!("task: {e}")))?;
    let out_dir = out_dir.ok_or_else(|| Error::Usage("--out-dir is required".into()))?;
    let raw = synth::gen_gaussian_task(&task)?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut written = Vec::new();
    for (name, ds) in [("raw_pretrain", raw.pretrain.as_ref()), ("raw_train", Some(&raw.train)), ("raw_test", Some(&raw.test))] {
        if let Some(ds) = ds {
            let path = out_dir.join(format!("{name}.fvec"));
            save_fvec(&ds.clone().into_f64(), &path)?;
            written.push(path);
        }
    }
    let bayes = synth::bayes_risk_oracle(&task)?;
    let summary = json!({"task": task, "bayes": bayes, "files": written});
    report::write_atomic(&out_dir.join("task.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    if let Some(out) = &ctx.out {
        report::write_atomic(out, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    for p in &written {
        println!("{}", p.display());
    }
    println!("bayes risk {:.4}", bayes.risk);
    Ok(())
}

fn cmd_synth_sweep(ctx: &Ctx, a: &SynthSweepArgs) -> Result<()> {
    let pretrain = a
        .pretrain
        .as_deref()
        .map(|p| {
            serde_json::from_value::<PretrainSet>(json!(p))
                .map_err(|_| Error::Usage(format!("unknown pretraining set `{p}`")))
        })
        .transpose()?;
    let mut flags = Flags::default();
    flags
        .set("encoders", a.encoders.clone())
        .set("task", a.task.clone())
        .set("seeds", seeds_from(a.seeds.as_ref(), a.n_seeds, ctx.seed))
        .set("pretrain", pretrain)
        .flag("excess_risk", a.excess_risk)
        .probe(&a.probe);
    let (cfg, resolved): (SweepCliConfig, _) = resolve("sweep", ctx.file.as_ref(), &flags, ctx.seed)?;
    let enc_path = required(&cfg.encoders, "encoders")?;
    let mut inputs = vec![enc_path.as_path()];
    inputs.extend(cfg.task.as_deref());
    let key = with_inputs(&resolved, &inputs)?;
    let doc = ctx.run_stored("sweep", "synth", &key, || {
        let text = fs::read_to_string(enc_path).map_err(|e| Error::io(enc_path, e))?;
        let specs = EncoderSpec::from_json(&text)?;
        let task = match &cfg.task {
            Some(p) => {
                let t = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&t).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => SynthTask::gaussian_default(cfg.seed),
        };
        let sweep = SweepConfig {
            policy: cfg.probe.policy(rng::derive(cfg.seed, 1)),
            train: cfg.probe.train(cfg.seed),
            pretrain: cfg.pretrain,
            sub_size: cfg.sub_size,
            excess_risk: cfg.excess_risk,
        };
        Ok(serde_json::to_value(synth::tradeoff_sweep(&task, &specs, &cfg.seeds, &sweep)?)?)
    })?;
    let rows: Vec<SweepRow> = serde_json::from_value(doc.result.clone())?;
    let csv = synth::frontier_csv(&rows)?;
    match &ctx.out {
        Some(out) => report::write_atomic(&out.with_extension("csv"), csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<()> {
    let mut flags = Flags::default();
    flags
        .set("table", a.table.clone())
        .set("method", a.method.clone())
        .set("hparam", a.hparam.clone())
        .set("metric", a.metric.clone())
        .set("controls", a.controls.clone())
        .flag("log_hparam", a.log_hparam)
        .flag("log_metric", a.log_metric)
        .set("metrics", a.metrics.clone())
        .set("id_column", a.id_column.clone());
    let (cfg, resolved): (AnalyzeConfig, _) = resolve("analyze", ctx.file.as_ref(), &flags, ctx.seed)?;
    let table_path = required(&cfg.table, "table")?;
    let method: Method = required(&cfg.method, "method")?.parse()?;
    let hparam = required(&cfg.hparam, "hparam")?;
    let metric = required(&cfg.metric, "metric")?;
    let key = with_inputs(&resolved, &[table_path])?;
    let doc = ctx.run_stored("analyze", &stem(table_path), &key, || {
        let mut metrics: Vec<&str> = if cfg.metrics.is_empty() {
            KNOWN_METRICS.to_vec()
        } else {
            cfg.metrics.iter().map(String::as_str).collect()
        };
        metrics.push(metric);
        let id = cfg.id_column.as_deref().or(Some("model"));
        let text = fs::read(table_path).map_err(|e| Error::io(table_path, e))?;
        let header = csv::ReaderBuilder::new().from_reader(text.as_slice()).headers()?.clone();
        let id = id.filter(|i| header.iter().any(|h| h.trim() == *i));
        let table = ModelTable::read_csv(text.as_slice(), &metrics, id)?;
        let result = match method {
            Method::Ca => analysis::controlled_fit(&table, hparam, metric, cfg.log_hparam, cfg.log_metric)?,
            Method::Gla => {
                let controls: Vec<&str> = cfg.controls.iter().map(String::as_str).collect();
                analysis::global_fit(&table, hparam, &controls, metric, cfg.log_hparam, cfg.log_metric)?
            }
        };
        Ok(serde_json::to_value(result)?)
    })?;
    let result: analysis::Analysis = serde_json::from_value(doc.result)?;
    let e = result.effect();
    println!(
        "{} {}: coefficient {:.4} (standard error {:.4}), t = {:.3}, p = {:.3e}, R² = {:.4}, rows {}",
        result.method, e.name, e.estimate, e.std_error, e.t_stat, e.p_value, result.fit.r_squared, result.rows_used
    );
    Ok(())
}

fn cmd_report(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let decomp = ctx.store.latest_by_encoder("decompose")?;
    let fewshot = ctx.store.latest_by_encoder("fewshot")?;
    let sweeps = ctx.store.list("sweep")?;
    if decomp.is_empty() && fewshot.is_empty() && sweeps.is_empty() {
        return Err(Error::Usage(format!("result store {} is empty", ctx.store.root().display())));
    }
    let out_dir = a.out_dir.clone().unwrap_or_else(|| ctx.store.root().join("report"));
    let bundle = build_report(&decomp, &fewshot, &sweeps)?;
    for (name, text) in &bundle {
        report::write_atomic(&out_dir.join(name), text.as_bytes())?;
        println!("{}", out_dir.join(name).display());
    }
    if let Some(out) = &ctx.out {
        let index: BTreeMap<&str, String> =
            bundle.iter().map(|(n, _)| (n.as_str(), out_dir.join(n).display().to_string())).collect();
        report::write_atomic(out, serde_json::to_string_pretty(&index)?.as_bytes())?;
    }
    Ok(())
}

/// File name and contents of each report artifact.
pub fn build_report(
    decomp: &BTreeMap<String, StoredDoc>,
    fewshot: &BTreeMap<String, StoredDoc>,
    sweeps: &[StoredDoc],
) -> Result<Vec<(String, String)>> {
    let models: Vec<String> = decomp.keys().chain(fewshot.keys()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut rows = Vec::new();
    let mut observations = Vec::new();
    for m in &models {
        let comps: Option<RiskComponents> = decomp
            .get(m)
            .map(|d| serde_json::from_value(d.result["components"].clone()))
            .transpose()?;
        let settings: Vec<SettingResult> = fewshot
            .get(m)
            .map(|d| serde_json::from_value(d.result["settings"].clone()))
            .transpose()?
            .unwrap_or_default();
        if let (Some(c), Some(d)) = (&comps, decomp.get(m)) {
            let n_full = d.result["n_train"].as_f64().unwrap_or(f64::NAN);
            observations.extend(scaling::observations_from_fewshot(m, c, n_full, &settings));
        }
        rows.push((m.clone(), comps, settings));
    }
    let mut out = vec![("components.csv".to_string(), report::components_csv(&rows)?)];

    // Radar over metrics every model has.
    let mut metric_names: Vec<String> = report::COMPONENT_COLUMNS.iter().map(|s| s.to_string()).collect();
    metric_names.extend(Setting::defaults().iter().map(Setting::to_string));
    let lookup = |(_, c, s): &(String, Option<RiskComponents>, Vec<SettingResult>), j: usize| -> Option<f64> {
        if j < 4 {
            c.as_ref().map(|c| [c.approx, c.usability, c.probe_gen, c.encoder_gen][j])
        } else {
            let setting = Setting::defaults()[j - 4];
            s.iter().find(|r| r.setting == setting).and_then(|r| r.mean)
        }
    };
    let complete: Vec<usize> = (0..metric_names.len()).filter(|&j| rows.iter().all(|r| lookup(r, j).is_some())).collect();
    if rows.len() >= 2 && !complete.is_empty() {
        let table = MetricTable {
            models: models.clone(),
            metrics: complete.iter().map(|&j| metric_names[j].clone()).collect(),
            values: rows.iter().map(|r| complete.iter().map(|&j| lookup(r, j).unwrap()).collect()).collect(),
        };
        out.push(("radar.json".into(), serde_json::to_string_pretty(&report::radar_normalize(&table)?)?));
    } else {
        log::warn!("radar summary needs at least two models with a shared metric");
    }
    out.push(("scaling_observations.json".into(), serde_json::to_string_pretty(&observations)?));

    let mut frontier: Vec<SweepRow> = Vec::new();
    for d in sweeps {
        frontier.extend(serde_json::from_value::<Vec<SweepRow>>(d.result.clone())?);
    }
    for (m, (_, comps, _)) in models.iter().zip(&rows) {
        if let Some(c) = comps {
            frontier.push(SweepRow {
                encoder: m.clone(),
                spec: EncoderSpec::Identity,
                per_seed: vec![c.clone()],
                mean: synth::MeanComponents::of(std::slice::from_ref(c)),
            });
        }
    }
    out.push(("frontier.csv".into(), synth::frontier_csv(&frontier)?));
    Ok(out)
}
