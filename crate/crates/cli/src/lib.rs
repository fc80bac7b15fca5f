//! The `rsf` command line: generate synthetic data, fit forests, predict and
//! cross-validate.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rsf::data::ValueKind;
use rsf::eval::{repeated_cv_with, EvalReport};
use rsf::forest::{fit_with, FitOptions, ForestModel};
use rsf::manifest::{load_columns, load_manifest, write_manifest};
use rsf::params::{Hyperparams, MaxFeatures, StoppingRule, DEFAULT_SEED};
use rsf::synth::{bag_of_items, bag_of_items_with_vocab, generate, Mode, SynthConfig};
use rsf::{Dataset, FeatureColumn};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable holding the log filter, e.g. `RSF_LOG=info`.
pub const LOG_ENV: &str = "RSF_LOG";

#[derive(Debug, Parser)]
#[command(name = "rsf", version, about = "Random similarity forests for mixed-type data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic sequences-of-sets dataset
    Generate(GenerateArgs),
    /// Train a forest and save it as JSON
    Fit(FitArgs),
    /// Score a dataset with a saved forest
    Predict(PredictArgs),
    /// Repeated stratified cross-validation
    Cv(CvArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with default values for any flag (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// items, lengths or order
    #[arg(long)]
    mode: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_examples: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    mean_length: Option<usize>,
    #[arg(long)]
    mean_set_size: Option<usize>,
    /// Write item counts instead of the set sequences
    #[arg(long)]
    bag_of_items: bool,
}

#[derive(Debug, Args)]
struct ForestArgs {
    /// Number of trees
    #[arg(long)]
    trees: Option<usize>,
    /// Features screened per node: a fraction such as 0.5, or a count such as 3
    #[arg(long)]
    max_features: Option<String>,
    /// Exemplar pairs drawn per screened feature
    #[arg(long)]
    max_pairs: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_samples_split: Option<usize>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Training threads; results do not depend on it
    #[arg(long)]
    workers: Option<usize>,
    /// Replace set-sequence columns by item counts before training
    #[arg(long)]
    bag_of_items: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset manifest
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file to write
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    forest: ForestArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset manifest; labels are not needed
    #[arg(long)]
    data: Option<PathBuf>,
    /// Prediction CSV to write
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON report to write; without it the report goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Dataset label shown in the summary table
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    forest: ForestArgs,
}

/// Values read from `--config`; every field mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    mode: Option<String>,
    out: Option<PathBuf>,
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    n_examples: Option<usize>,
    vocab_size: Option<usize>,
    mean_length: Option<usize>,
    mean_set_size: Option<usize>,
    bag_of_items: Option<bool>,
    trees: Option<usize>,
    max_features: Option<ConfigMaxFeatures>,
    max_pairs: Option<usize>,
    max_depth: Option<usize>,
    min_samples_split: Option<usize>,
    min_samples_leaf: Option<usize>,
    workers: Option<usize>,
    reps: Option<usize>,
    folds: Option<usize>,
    name: Option<String>,
}

/// A bare integer is a count, any other number a fraction.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum ConfigMaxFeatures {
    Count(usize),
    Fraction(f64),
}

impl From<ConfigMaxFeatures> for MaxFeatures {
    fn from(m: ConfigMaxFeatures) -> Self {
        match m {
            ConfigMaxFeatures::Count(k) => MaxFeatures::Count(k),
            ConfigMaxFeatures::Fraction(f) => MaxFeatures::Fraction(f),
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<rsf::Error> for Failure {
    fn from(e: rsf::Error) -> Self {
        let code = match e {
            rsf::Error::Config(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut config: FileConfig =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    // paths in a config file are relative to the file
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut config.out, &mut config.data, &mut config.model].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(config)
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| Failure::usage(format!("missing required flag --{flag}")))
}

fn parse_max_features(text: &str) -> CliResult<MaxFeatures> {
    let bad = || Failure::usage(format!("--max-features: '{text}' is neither a fraction nor a count"));
    if text.contains(['.', 'e', 'E']) {
        text.parse().map(MaxFeatures::Fraction).map_err(|_| bad())
    } else {
        text.parse().map(MaxFeatures::Count).map_err(|_| bad())
    }
}

fn hyperparams(args: &ForestArgs, seed: Option<u64>, cfg: &FileConfig) -> CliResult<Hyperparams> {
    let d = Hyperparams::default();
    let max_features = match &args.max_features {
        Some(text) => parse_max_features(text)?,
        None => cfg.max_features.map_or(d.max_features, MaxFeatures::from),
    };
    Ok(Hyperparams {
        max_trees: args.trees.or(cfg.trees).unwrap_or(d.max_trees),
        max_features,
        max_pairs: args.max_pairs.or(cfg.max_pairs).unwrap_or(d.max_pairs),
        stopping: StoppingRule {
            max_depth: args.max_depth.or(cfg.max_depth),
            min_samples_split: args.min_samples_split.or(cfg.min_samples_split).unwrap_or(d.stopping.min_samples_split),
            min_samples_leaf: args.min_samples_leaf.or(cfg.min_samples_leaf).unwrap_or(d.stopping.min_samples_leaf),
        },
        seed: seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
    })
}

fn fit_options(args: &ForestArgs, cfg: &FileConfig) -> CliResult<FitOptions> {
    let workers = args.workers.or(cfg.workers);
    if workers == Some(0) {
        return Err(Failure::usage("--workers must be at least 1"));
    }
    Ok(FitOptions {
        workers,
        ..FitOptions::default()
    })
}

/// Applies the count transform to every set-sequence column.
fn to_bags(ds: Dataset) -> CliResult<Dataset> {
    let mut ds = ds;
    for i in (0..ds.n_features()).rev() {
        if ds.columns[i].kind == ValueKind::SetSeq {
            ds = bag_of_items(&ds, i)?;
        }
    }
    Ok(ds)
}

fn load_training(data: &Path, bags: bool) -> CliResult<Dataset> {
    let ds = load_manifest(data)?;
    if bags {
        to_bags(ds)
    } else {
        Ok(ds)
    }
}

fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })
}

fn cmd_generate(args: GenerateArgs) -> CliResult<()> {
    let cfg = read_config(args.common.config.as_deref())?;
    let mode: Mode = required(args.mode.or(cfg.mode), "mode")?.parse()?;
    let out = required(args.out.or(cfg.out), "out")?;
    let mut synth = SynthConfig::new(mode, args.common.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED));
    synth.n_examples = args.n_examples.or(cfg.n_examples).unwrap_or(synth.n_examples);
    synth.vocab_size = args.vocab_size.or(cfg.vocab_size).unwrap_or(synth.vocab_size);
    synth.mean_length = args.mean_length.or(cfg.mean_length).unwrap_or(synth.mean_length);
    synth.mean_set_size = args.mean_set_size.or(cfg.mean_set_size).unwrap_or(synth.mean_set_size);
    let bags = args.bag_of_items || cfg.bag_of_items.unwrap_or(false);
    let mut ds = generate(&synth)?;
    if bags {
        ds = to_bags(ds)?;
    }
    let meta = serde_json::json!({ "generator": synth, "bag_of_items": bags });
    let path = write_manifest(&ds, &out, Some(meta))?;
    log::info!("wrote {} examples to {}", ds.n_examples(), path.display());
    Ok(())
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let cfg = read_config(args.common.config.as_deref())?;
    let data = required(args.data.clone().or(cfg.data.clone()), "data")?;
    let out = required(args.out.clone().or(cfg.out.clone()), "out")?;
    let hp = hyperparams(&args.forest, args.common.seed, &cfg)?;
    let opts = fit_options(&args.forest, &cfg)?;
    let ds = load_training(&data, args.forest.bag_of_items || cfg.bag_of_items.unwrap_or(false))?;
    let (model, stats) = fit_with(&ds, &hp, &opts)?;
    log::info!("grew {} trees, {} nodes", model.trees.len(), stats.nodes);
    model.save(&out)?;
    Ok(())
}

/// Vocabulary a count column family was trained on, recovered from the
/// model's `name[item]` column names.
fn trained_vocab(model: &ForestModel, column: &str) -> Vec<String> {
    let prefix = format!("{column}[");
    model
        .columns
        .iter()
        .filter_map(|c| c.name.strip_prefix(&prefix)?.strip_suffix(']').map(str::to_string))
        .collect()
}

fn scoring_columns(model: &ForestModel, columns: Vec<FeatureColumn>) -> CliResult<Vec<FeatureColumn>> {
    let needs_bags = columns.iter().any(|c| c.kind == ValueKind::SetSeq)
        && !model.columns.iter().any(|c| c.kind == ValueKind::SetSeq);
    if !needs_bags {
        return Ok(columns);
    }
    // wrap in a dataset only to reuse the transform; labels are irrelevant
    let n = columns.first().map_or(0, FeatureColumn::len);
    let mut ds = Dataset::from_labels(columns, &vec![""; n]);
    for i in (0..ds.n_features()).rev() {
        if ds.columns[i].kind == ValueKind::SetSeq {
            let vocab = trained_vocab(model, &ds.columns[i].name);
            ds = bag_of_items_with_vocab(&ds, i, &vocab)?;
        }
    }
    Ok(ds.columns)
}

fn cmd_predict(args: PredictArgs) -> CliResult<()> {
    let cfg = read_config(args.common.config.as_deref())?;
    let model_path = required(args.model.or(cfg.model), "model")?;
    let data = required(args.data.or(cfg.data), "data")?;
    let out = required(args.out.or(cfg.out), "out")?;
    let model = ForestModel::load(&model_path)?;
    let (columns, _) = load_columns(&data)?;
    let columns = scoring_columns(&model, columns)?;
    let proba = model.predict_proba(&columns)?;
    let mut csv = String::from("example_index,p_negative,p_positive,predicted\n");
    for (i, p) in proba.iter().enumerate() {
        let class = &model.classes[usize::from(p[1] > p[0])];
        writeln!(csv, "{i},{},{},{}", p[0], p[1], csv_field(class)).expect("writing to a string");
    }
    write_output(&out, &csv)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_cv(args: CvArgs) -> CliResult<()> {
    let cfg = read_config(args.common.config.as_deref())?;
    let data = required(args.data.clone().or(cfg.data.clone()), "data")?;
    let reps = args.reps.or(cfg.reps).unwrap_or(10);
    let folds = args.folds.or(cfg.folds).unwrap_or(2);
    let hp = hyperparams(&args.forest, args.common.seed, &cfg)?;
    let opts = fit_options(&args.forest, &cfg)?;
    let ds = load_training(&data, args.forest.bag_of_items || cfg.bag_of_items.unwrap_or(false))?;
    let (mut report, _) = repeated_cv_with(&ds, &hp, reps, folds, hp.seed, &opts)?;
    report.name = args.name.or(cfg.name).unwrap_or_else(|| dataset_name(&data));
    let json = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    match args.out.or(cfg.out) {
        Some(out) => {
            write_output(&out, &json)?;
            print!("{}", render_report(&report));
        }
        None => print!("{json}"),
    }
    Ok(())
}

/// Directory holding the manifest, which is how generated datasets are named.
fn dataset_name(manifest: &Path) -> String {
    manifest
        .canonicalize()
        .ok()
        .and_then(|p| Some(p.parent()?.file_name()?.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "dataset".into())
}

fn config_summary(hp: &Hyperparams) -> String {
    let mf = match hp.max_features {
        MaxFeatures::Fraction(f) => format!("{f}p"),
        MaxFeatures::Count(k) => k.to_string(),
    };
    let mut s = format!("trees={} mf={mf} pairs={}", hp.max_trees, hp.max_pairs);
    if let Some(d) = hp.stopping.max_depth {
        write!(s, " depth={d}").expect("writing to a string");
    }
    s
}

/// One-row summary table of a cross-validation report.
pub fn render_report(report: &EvalReport) -> String {
    let config = format!("{} cv={}x{}", config_summary(&report.hyperparams), report.reps, report.folds);
    let name_w = report.name.len().max(7);
    let cfg_w = config.len().max(6);
    let mut out = String::new();
    writeln!(out, "{:<name_w$}  {:<cfg_w$}  {:>17}  {:>5}", "dataset", "config", "AUC (mean ± std)", "folds").unwrap();
    writeln!(
        out,
        "{:<name_w$}  {:<cfg_w$}  {:>8.4} ± {:<6.4}  {:>5}",
        report.name,
        config,
        report.mean_auc,
        report.std_auc,
        report.fold_results.len()
    )
    .unwrap();
    out
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
