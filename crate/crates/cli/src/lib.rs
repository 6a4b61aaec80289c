//! Command-line pipeline: `preprocess` → `tune` → `eval` → `report`.
//!
//! One TOML file describes a run; flags override individual keys. Results
//! are laid out as `<out>/<dataset>/slice_<i>/<algorithm>/`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sessbench_core::algorithms::save_model;
use sessbench_core::evaluate::report::{aggregate, read_rows, render_table, write_aggregate, write_rows, ReportRow};
use sessbench_core::evaluate::{evaluate, EvalSet, Execution, MetricConfig, MetricReport};
use sessbench_core::eventlog::{load_events, LogFormat};
use sessbench_core::hyperopt::{
    preset, random_search, Dataset, Phase, SearchConfig, SearchResult, SearchSpace, TrialCache,
};
use sessbench_core::preprocess::{
    largest_slice, load_manifest, preprocess, read_split, save_manifest, write_id_maps, write_split, Manifest,
    PreprocessConfig, MANIFEST_FILE,
};
use sessbench_core::recommender::{AlgorithmSpec, ParamValue, Params, Variant};

pub const TRIALS_FILE: &str = "trials.json";
pub const REPORT_FILE: &str = "report.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MODEL_FILE: &str = "model.json";

/// The objective of tuning.
const TUNING_CUTOFF: usize = 20;

/// A configuration or input problem; exits with code 1.
#[derive(Debug)]
pub struct UserError(pub String);

impl fmt::Display for UserError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

fn user_error(msg: impl Into<String>) -> anyhow::Error {
    UserError(msg.into()).into()
}

/// 1 for user or configuration errors, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UserError>() || cause.is::<toml::de::Error>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<sessbench_core::Error>() {
            return if e.is_user_error() { 1 } else { 2 };
        }
    }
    2
}

// ---- configuration -------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: LogFormat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub trials: usize,
    pub posthoc_trials: usize,
    /// Tuning slice; defaults to the slice with most events.
    pub slice: Option<usize>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        let d = SearchConfig::default();
        TuningConfig {
            trials: d.trials,
            posthoc_trials: d.posthoc_trials,
            slice: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    /// Variant name such as `vsknn` or `stan_er`.
    pub name: String,
    /// Start from the published optimum on this dataset.
    #[serde(default)]
    pub preset: Option<String>,
    /// Fixed parameters; they override presets and tuned values.
    #[serde(default)]
    pub params: Params,
    /// Replacement value sets for the search space.
    #[serde(default)]
    pub space: BTreeMap<String, Vec<ParamValue>>,
}

impl AlgorithmEntry {
    pub fn variant(&self) -> sessbench_core::Result<Variant> {
        self.name.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: String,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub evaluation: MetricConfig,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmEntry>,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_seed() -> u64 {
    SearchConfig::default().seed
}

impl RunConfig {
    /// Parses a config file; relative paths are taken relative to its folder.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| user_error(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        if let Some(input) = &mut cfg.input {
            if input.path.is_relative() {
                input.path = base.join(&input.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.dataset.is_empty() || self.dataset.contains(['/', '\\']) {
            return Err(user_error(format!("invalid dataset name '{}'", self.dataset)));
        }
        self.preprocess.validate()?;
        self.evaluation.validate()?;
        for entry in &self.algorithms {
            entry.variant()?;
            if let Some(p) = &entry.preset {
                p.parse::<Dataset>()?;
            }
        }
        Ok(())
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out.join(&self.dataset)
    }
}

pub fn slice_dir(dataset_dir: &Path, slice: usize) -> PathBuf {
    dataset_dir.join(format!("slice_{slice}"))
}

// ---- command line ---------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "sessbench", version, about = "Session-aware recommendation benchmark")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for tuning; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Comma-separated metric cut-offs, e.g. 5,10,20.
    #[arg(long, global = true, value_delimiter = ',')]
    pub cutoffs: Option<Vec<usize>>,
    /// Single-worker evaluation so that latencies are comparable.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sessionize, slice, filter and split the input log.
    Preprocess,
    /// Random hyperparameter search on the validation set of the tuning slice.
    Tune(TuneArgs),
    /// Fit and evaluate every configured algorithm on every slice.
    Eval(EvalArgs),
    /// Average per-slice results into tables sorted by MAP.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Number of joint-phase trials; overrides the config.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Number of reminder-phase trials; overrides the config.
    #[arg(long)]
    pub posthoc_trials: Option<usize>,
    /// Tuning slice; overrides the config.
    #[arg(long)]
    pub slice: Option<usize>,
    /// Re-use scores from an existing trial log.
    #[arg(long)]
    pub resume: bool,
    /// Only tune these algorithms.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SetArg {
    Validation,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Evaluate only this slice.
    #[arg(long)]
    pub slice: Option<usize>,
    #[arg(long, value_enum, default_value = "test")]
    pub set: SetArg,
    /// Ignore tuned parameters even when a trial log exists.
    #[arg(long)]
    pub untuned: bool,
    /// Also write the fitted base model.
    #[arg(long)]
    pub save_model: bool,
    /// Only evaluate these algorithms.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Result directory of one dataset; defaults to `<out>/<dataset>`.
    pub dir: Option<PathBuf>,
    /// Cut-off used for the printed table; defaults to the largest one.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long, value_enum, default_value = "test")]
    pub set: SetArg,
}

impl From<SetArg> for EvalSet {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Validation => EvalSet::Validation,
            SetArg::Test => EvalSet::Test,
        }
    }
}

/// Loads the config and applies flag overrides.
pub fn resolve_config(global: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| user_error("--config is required for this command"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.out = out.clone();
    }
    if let Some(cutoffs) = &global.cutoffs {
        cfg.evaluation.cutoffs = cutoffs.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.global.threads {
        if threads == 0 {
            return Err(user_error("--threads must be >= 1"));
        }
        // fails only if a pool was already installed, e.g. by an earlier call in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match &cli.command {
        Command::Preprocess => cmd_preprocess(&resolve_config(&cli.global)?),
        Command::Tune(args) => cmd_tune(&resolve_config(&cli.global)?, args).map(|_| ()),
        Command::Eval(args) => {
            let execution = if cli.global.timing { Execution::Timing } else { Execution::Parallel };
            cmd_eval(&resolve_config(&cli.global)?, args, execution).map(|_| ())
        }
        Command::Report(args) => {
            let dir = match &args.dir {
                Some(d) => d.clone(),
                None => resolve_config(&cli.global)?.dataset_dir(),
            };
            let text = cmd_report(&dir, args.cutoff, args.set.into())?;
            print!("{text}");
            Ok(())
        }
    }
}

// ---- commands ---------------------------------------------------------------

pub fn cmd_preprocess(cfg: &RunConfig) -> anyhow::Result<()> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| user_error("config has no [input] section"))?;
    let started = Instant::now();
    let log = load_events(&input.path, &input.format)?;
    log::info!("loaded {} events from {}", log.len(), input.path.display());
    let result = preprocess(&log, &cfg.preprocess)?;

    let dir = cfg.dataset_dir();
    fs::create_dir_all(&dir)?;
    write_id_maps(&log, &dir)?;
    for split in &result.splits {
        let sdir = slice_dir(&dir, split.slice_index);
        fs::create_dir_all(&sdir)?;
        write_split(split, &sdir)?;
    }
    let manifest = Manifest::new(&cfg.dataset, &log, &cfg.preprocess, result.slices);
    save_manifest(&manifest, &dir)?;
    for s in &manifest.slices {
        log::info!(
            "slice {}: {} events, {} sessions, {} items ({} train / {} validation / {} test sessions)",
            s.index,
            s.stats.events,
            s.stats.sessions,
            s.stats.items,
            s.train_sessions,
            s.validation_sessions,
            s.test_sessions
        );
    }
    log::info!("preprocessing finished in {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn load_dataset_manifest(dir: &Path) -> anyhow::Result<Manifest> {
    if !dir.join(MANIFEST_FILE).exists() {
        return Err(user_error(format!(
            "no {MANIFEST_FILE} in {}; run `preprocess` first",
            dir.display()
        )));
    }
    Ok(load_manifest(dir)?)
}

fn selected<'a>(cfg: &'a RunConfig, only: &Option<Vec<String>>) -> anyhow::Result<Vec<&'a AlgorithmEntry>> {
    if cfg.algorithms.is_empty() {
        return Err(user_error("config lists no algorithms"));
    }
    match only {
        None => Ok(cfg.algorithms.iter().collect()),
        Some(names) => names
            .iter()
            .map(|n| {
                cfg.algorithms
                    .iter()
                    .find(|a| &a.name == n)
                    .ok_or_else(|| user_error(format!("algorithm '{n}' is not listed in the config")))
            })
            .collect(),
    }
}

/// Preset parameters, then tuned ones, then fixed ones from the config.
fn entry_params(entry: &AlgorithmEntry, tuned: Option<&Params>) -> anyhow::Result<Params> {
    let variant = entry.variant()?;
    let mut params = Params::new();
    if let Some(dataset) = &entry.preset {
        let (_, p) = preset(dataset.parse()?, &variant.to_string())?;
        params.extend(p);
    }
    if let Some(t) = tuned {
        params.extend(t.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    params.extend(entry.params.iter().map(|(k, v)| (k.clone(), v.clone())));
    Ok(params)
}

pub fn tuning_slice(cfg: &RunConfig, manifest: &Manifest, flag: Option<usize>) -> anyhow::Result<usize> {
    let slice = match flag.or(cfg.tuning.slice) {
        Some(s) => s,
        None => largest_slice(&manifest.slices).ok_or_else(|| user_error("manifest lists no slices"))?,
    };
    if !manifest.slices.iter().any(|s| s.index == slice) {
        return Err(user_error(format!("slice {slice} does not exist")));
    }
    Ok(slice)
}

pub fn cmd_tune(cfg: &RunConfig, args: &TuneArgs) -> anyhow::Result<Vec<SearchResult>> {
    let dir = cfg.dataset_dir();
    let manifest = load_dataset_manifest(&dir)?;
    let slice = tuning_slice(cfg, &manifest, args.slice)?;
    let split = read_split(slice_dir(&dir, slice), slice)?;
    let search = SearchConfig {
        trials: args.trials.unwrap_or(cfg.tuning.trials),
        posthoc_trials: args.posthoc_trials.unwrap_or(cfg.tuning.posthoc_trials),
        seed: cfg.seed,
    };
    let metric = MetricConfig {
        cutoffs: vec![TUNING_CUTOFF],
    };
    let mut results = Vec::new();
    for entry in selected(cfg, &args.only)? {
        let variant = entry.variant()?;
        let mut space = SearchSpace::with_overrides(variant, &entry.space)?;
        // fixed parameters are not searched
        for name in entry.params.keys() {
            space.params.remove(name);
        }
        let out = slice_dir(&dir, slice).join(variant.to_string());
        fs::create_dir_all(&out)?;
        let trials_path = out.join(TRIALS_FILE);
        let cache = if args.resume && trials_path.exists() {
            let c = TrialCache::from_result(&SearchResult::load(&trials_path)?);
            log::info!("{variant}: resuming with {} cached scores", c.len());
            Some(c)
        } else {
            None
        };
        log::info!("{variant}: tuning on slice {slice} ({} joint trials)", search.trials);
        let started = Instant::now();
        let result = random_search(
            &space,
            &search,
            |spec| {
                let variant = spec.variant();
                let mut params = spec.to_params();
                // joint-phase trials run without Remind, so its fixed weights wait
                let fixed = entry.params.iter().filter(|(k, _)| variant.remind || Phase::of(k) == Phase::Joint);
                params.extend(fixed.map(|(k, v)| (k.clone(), v.clone())));
                let spec = AlgorithmSpec::from_params(variant, &params)?;
                let report = evaluate(&spec, &split, EvalSet::Validation, &metric, Execution::Parallel)?;
                Ok(report.at(TUNING_CUTOFF).map_or(0.0, |m| m.mrr))
            },
            cache,
        )?;
        log::info!(
            "{variant}: best MRR@{TUNING_CUTOFF} {:.4} after {:.1}s",
            result.best_score,
            started.elapsed().as_secs_f64()
        );
        result.save(&trials_path)?;
        results.push(result);
    }
    Ok(results)
}

fn tuned_params(cfg: &RunConfig, manifest: &Manifest, entry: &AlgorithmEntry) -> anyhow::Result<Option<Params>> {
    let slice = tuning_slice(cfg, manifest, None)?;
    let path = slice_dir(&cfg.dataset_dir(), slice).join(&entry.name).join(TRIALS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let result = SearchResult::load(&path)?;
    if result.variant != entry.variant()? {
        bail!("{} holds a search for {}, not {}", path.display(), result.variant, entry.name);
    }
    Ok(Some(result.best_params))
}

pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs, execution: Execution) -> anyhow::Result<Vec<MetricReport>> {
    let dir = cfg.dataset_dir();
    let manifest = load_dataset_manifest(&dir)?;
    let slices: Vec<usize> = match args.slice {
        Some(s) if manifest.slices.iter().any(|m| m.index == s) => vec![s],
        Some(s) => return Err(user_error(format!("slice {s} does not exist"))),
        None => manifest.slices.iter().map(|m| m.index).collect(),
    };
    let entries = selected(cfg, &args.only)?;
    let mut specs = Vec::new();
    for entry in &entries {
        let tuned = if args.untuned { None } else { tuned_params(cfg, &manifest, entry)? };
        if tuned.is_some() {
            log::info!("{}: using tuned parameters", entry.name);
        }
        let params = entry_params(entry, tuned.as_ref())?;
        specs.push(AlgorithmSpec::from_params(entry.variant()?, &params)?);
    }
    let mut reports = Vec::new();
    for &slice in &slices {
        let split = read_split(slice_dir(&dir, slice), slice)?;
        for spec in &specs {
            let report = evaluate(spec, &split, args.set.into(), &cfg.evaluation, execution)
                .with_context(|| format!("{} on slice {slice}", spec.name()))?;
            let out = slice_dir(&dir, slice).join(spec.name());
            fs::create_dir_all(&out)?;
            let mut json = serde_json::to_string_pretty(&report)?;
            json.push('\n');
            fs::write(out.join(REPORT_FILE), json)?;
            write_rows(&report.rows(), &out.join(METRICS_FILE))?;
            if args.save_model {
                save_model(&sessbench_core::algorithms::fit(&split.train, &spec.base)?, out.join(MODEL_FILE))?;
            }
            let last = report.metrics.last().expect("cutoffs are non-empty");
            log::info!(
                "slice {slice} {}: MAP@{k} {:.4} HR@{k} {:.4} MRR@{k} {:.4}",
                report.algorithm,
                last.map,
                last.hr,
                last.mrr,
                k = last.cutoff
            );
            reports.push(report);
        }
    }
    Ok(reports)
}

/// Collects every per-slice metrics file below `dir`, writes one aggregate
/// CSV per cutoff and returns the text table for the chosen cutoff.
pub fn cmd_report(dir: &Path, cutoff: Option<usize>, set: EvalSet) -> anyhow::Result<String> {
    if !dir.is_dir() {
        return Err(user_error(format!("result directory {} does not exist", dir.display())));
    }
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut slice_dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("slice_")))
        .collect();
    slice_dirs.sort();
    for sd in &slice_dirs {
        let mut algs: Vec<PathBuf> = fs::read_dir(sd)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        algs.sort();
        for alg in algs {
            let f = alg.join(METRICS_FILE);
            if f.is_file() {
                rows.extend(read_rows(&f)?);
            }
        }
    }
    rows.retain(|r| r.eval_set == set);
    if rows.is_empty() {
        return Err(user_error(format!("no {} results found in {}", set.name(), dir.display())));
    }
    let expected: Option<BTreeSet<usize>> = if dir.join(MANIFEST_FILE).exists() {
        Some(load_manifest(dir)?.slices.iter().map(|s| s.index).collect())
    } else {
        None
    };
    let cutoffs: BTreeSet<usize> = rows.iter().map(|r| r.cutoff).collect();
    let shown = match cutoff {
        Some(k) if cutoffs.contains(&k) => k,
        Some(k) => return Err(user_error(format!("no results at cutoff {k}"))),
        None => *cutoffs.iter().next_back().unwrap(),
    };
    let mut table = String::new();
    for &k in &cutoffs {
        let agg = aggregate(&rows, set, k, expected.as_ref());
        write_aggregate(&agg, &dir.join(format!("summary_{}_at{k}.csv", set.name())))?;
        if k == shown {
            for r in agg.iter().filter(|r| !r.complete) {
                log::warn!("{}: results for {} of the slices only", r.algorithm, r.slices);
            }
            table = render_table(&agg);
        }
    }
    fs::write(dir.join(format!("summary_{}_at{shown}.txt", set.name())), &table)?;
    Ok(table)
}

pub fn parse_cli<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}

/// Convenience for tests: runs a command line and returns the exit code.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_cli(args) {
        Ok(cli) => match run(cli) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                exit_code(&e)
            }
        },
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                1
            } else {
                0
            }
        }
    }
}
