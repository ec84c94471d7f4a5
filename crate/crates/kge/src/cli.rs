//! Command-line front end: `train`, `eval`, `classify`, `sweep`, `make-toy`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use quatde_core::data::{build_filter_index, relation_stats, Split};
use quatde_core::eval::{corrupt_split, learn_thresholds};
use quatde_core::training::train_with;
use quatde_core::{
    BernoulliStats, Dataset, FilterIndex, Metrics, ModelParams, ModelVariant, Scorer, TableId, TiePolicy,
    TrainConfig,
};
use serde_json::json;
use thiserror::Error;

use crate::checkpoint;
use crate::io::{self, LoadedDataset};
use crate::manifest::{timestamp, ConfigSnapshot, DatasetInfo, MetricsSnapshot, RunManifest};
use crate::parallel;
use crate::report::{self, Breakdown, SweepRow};

pub const CHECKPOINT_FILE: &str = "model.qkge";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("error: {0:#}")]
    Data(anyhow::Error),
    #[error("error: {0:#}")]
    Numeric(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

fn is_numeric(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        cause
            .downcast_ref::<quatde_core::Error>()
            .is_some_and(quatde_core::Error::is_numeric)
    })
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        if is_numeric(&e) {
            Self::Numeric(e)
        } else {
            Self::Data(e)
        }
    }
}

fn usage(message: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("error: {message}"))
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "quatde", version, about = "Quaternion knowledge graph embeddings", args_override_self = true)]
pub struct Cli {
    /// Worker threads for evaluation (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write a checkpoint, training log and manifest.
    Train(TrainArgs),
    /// Filtered link-prediction metrics for a checkpoint.
    Eval(EvalArgs),
    /// Triple classification with thresholds learned on the validation split.
    Classify(ClassifyArgs),
    /// Train one model per embedding dimension and tabulate test metrics.
    Sweep(SweepArgs),
    /// Write the small synthetic graph in the integer layout.
    MakeToy(MakeToyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Quate,
    Quatde,
}

impl From<VariantArg> for ModelVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Quate => ModelVariant::QuatE,
            VariantArg::Quatde => ModelVariant::QuatDE,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BreakdownArg {
    None,
    Relation,
    Category,
    All,
}

impl From<BreakdownArg> for Breakdown {
    fn from(b: BreakdownArg) -> Self {
        match b {
            BreakdownArg::None => Breakdown::None,
            BreakdownArg::Relation => Breakdown::Relation,
            BreakdownArg::Category => Breakdown::Category,
            BreakdownArg::All => Breakdown::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TiesArg {
    Optimistic,
    Pessimistic,
}

impl From<TiesArg> for TiePolicy {
    fn from(t: TiesArg) -> Self {
        match t {
            TiesArg::Optimistic => TiePolicy::Optimistic,
            TiesArg::Pessimistic => TiePolicy::Pessimistic,
        }
    }
}

#[derive(Debug, Args)]
struct HyperArgs {
    #[arg(long, value_enum, ignore_case = true, default_value = "quatde")]
    variant: VariantArg,
    #[arg(long, default_value_t = 3000)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    nbatches: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// L2 regularization weight.
    #[arg(long, default_value_t = 0.1)]
    reg: f64,
    /// Negatives per positive.
    #[arg(long, default_value_t = 10)]
    neg: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Epochs between validation checks.
    #[arg(long, default_value_t = 300)]
    valid_interval: usize,
}

impl HyperArgs {
    fn config(&self, dim: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            nbatches: self.nbatches,
            learning_rate: self.lr,
            lambda: self.reg,
            negatives: self.neg,
            dim,
            valid_interval: self.valid_interval,
            seed: self.seed,
            variant: self.variant.into(),
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output directory for the checkpoint, log and manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, value_enum, default_value = "none")]
    breakdown: BreakdownArg,
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "optimistic")]
    ties: TiesArg,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Seed for the corrupted negatives.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated embedding dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct MakeToyArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> CliResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(stdout, "{}", e.render()).map_err(|e| CliError::Data(e.into()))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Train(a) => cmd_train(&a, stdout),
        Command::Eval(a) => cmd_eval(&a, stdout),
        Command::Classify(a) => cmd_classify(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
        Command::MakeToy(a) => cmd_make_toy(&a, stdout),
    }
}

fn emit(stdout: &mut dyn Write, text: &str) -> CliResult {
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| CliError::Data(e.into()))
}

fn require_dir(path: &Path, flag: &str) -> CliResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(anyhow!("{flag} {}: not a directory", path.display())))
    }
}

fn load(path: &Path) -> CliResult<LoadedDataset> {
    require_dir(path, "--data")?;
    let loaded = io::load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
    let ds = &loaded.dataset;
    log::info!(
        "loaded {}: {} entities, {} relations, {}/{}/{} triples",
        path.display(),
        ds.num_entities(),
        ds.num_relations(),
        ds.train.len(),
        ds.valid.len(),
        ds.test.len()
    );
    Ok(loaded)
}

fn check_params(params: &ModelParams) -> anyhow::Result<()> {
    for id in TableId::ALL {
        if params.table(id).components().iter().any(|c| c.iter().any(|x| !x.is_finite())) {
            return Err(anyhow!(quatde_core::Error::NonFinite(id.name()))).context("checking parameters");
        }
    }
    Ok(())
}

/// Trains on `dataset`, validating with the parallel filtered evaluator.
pub fn fit(dataset: &Dataset, filter: &FilterIndex, config: &TrainConfig) -> CliResult<(ModelParams, quatde_core::TrainLog)> {
    let (params, log) = train_with(dataset, config, |params| {
        let scorer = Scorer::new(params, config.variant)?;
        let m = parallel::metrics(&dataset.valid, &scorer, filter, TiePolicy::Optimistic)?;
        log::info!("valid MRR {:.4} Hit@10 {:.4}", m.mrr, m.hit10);
        Ok(m)
    })
    .map_err(anyhow::Error::from)
    .context("training")?;
    check_params(&params).map_err(CliError::Numeric)?;
    Ok((params, log))
}

fn test_metrics(dataset: &Dataset, filter: &FilterIndex, variant: ModelVariant, params: &ModelParams) -> CliResult<Option<Metrics>> {
    if dataset.test.is_empty() {
        return Ok(None);
    }
    let scorer = Scorer::new(params, variant).map_err(anyhow::Error::from)?;
    let m = parallel::metrics(&dataset.test, &scorer, filter, TiePolicy::Optimistic).map_err(anyhow::Error::from)?;
    Ok(Some(m))
}

fn validate_config(config: &TrainConfig) -> CliResult {
    config.validate().map_err(usage)
}

fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write) -> CliResult {
    let config = a.hyper.config(a.dim);
    validate_config(&config)?;
    if a.out.exists() && !a.out.is_dir() {
        return Err(usage(format!("--out {} exists and is not a directory", a.out.display())));
    }
    let started_at = timestamp();
    let loaded = load(&a.data)?;
    let info = DatasetInfo::describe(&a.data, &loaded)?;
    let dataset = &loaded.dataset;
    let filter = build_filter_index(dataset);

    let (params, log) = fit(dataset, &filter, &config)?;
    let final_metrics = test_metrics(dataset, &filter, config.variant, &params)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let checkpoint_path = a.out.join(CHECKPOINT_FILE);
    let log_path = a.out.join(TRAIN_LOG_FILE);
    checkpoint::save(&checkpoint_path, config.variant, &params).map_err(anyhow::Error::from)?;
    fs::write(&log_path, report::train_log_tsv(&log)).with_context(|| format!("writing {}", log_path.display()))?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ConfigSnapshot::from(&config),
        dataset: info,
        seed: config.seed,
        started_at,
        finished_at: timestamp(),
        checkpoint: checkpoint_path.clone(),
        training_log: log_path,
        best_epoch: log.best_epoch,
        final_metrics: final_metrics.as_ref().map(MetricsSnapshot::from),
    };
    manifest.save(&a.out.join(MANIFEST_FILE))?;

    let mut text = format!("checkpoint\t{}\n", checkpoint_path.display());
    if let Some(m) = final_metrics {
        text.push_str(&format!(
            "test\tmr {:.4}\tmrr {:.6}\thit1 {:.6}\thit3 {:.6}\thit10 {:.6}\n",
            m.mr, m.mrr, m.hit1, m.hit3, m.hit10
        ));
    }
    emit(stdout, &text)
}

fn load_checkpoint(path: &Path, dataset: &Dataset) -> CliResult<checkpoint::Checkpoint> {
    let ck = checkpoint::load(path)
        .map_err(anyhow::Error::from)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    let shape = (ck.params.num_entities(), ck.params.num_relations());
    let expected = (dataset.num_entities(), dataset.num_relations());
    if shape != expected {
        return Err(CliError::Data(anyhow!(
            "checkpoint has {} entities and {} relations but the dataset has {} and {}",
            shape.0,
            shape.1,
            expected.0,
            expected.1
        )));
    }
    check_params(&ck.params).map_err(CliError::Numeric)?;
    Ok(ck)
}

fn cmd_eval(a: &EvalArgs, stdout: &mut dyn Write) -> CliResult {
    let loaded = load(&a.data)?;
    let dataset = &loaded.dataset;
    let ck = load_checkpoint(&a.checkpoint, dataset)?;
    let split = dataset.split(a.split.into());
    if split.is_empty() {
        return Err(CliError::Data(anyhow!("the {} split is empty", Split::from(a.split))));
    }
    let filter = build_filter_index(dataset);
    let stats = relation_stats(dataset).map_err(anyhow::Error::from)?;
    let scorer = Scorer::new(&ck.params, ck.variant).map_err(anyhow::Error::from)?;
    let report = parallel::evaluate(split, &scorer, &filter, Some(&stats), a.ties.into()).map_err(anyhow::Error::from)?;
    let text = match a.format {
        FormatArg::Tsv => report::report_tsv(&report, dataset, a.breakdown.into()),
        FormatArg::Json => {
            serde_json::to_string_pretty(&report::report_json(&report, dataset)).expect("serializable") + "\n"
        }
    };
    emit(stdout, &text)
}

fn cmd_classify(a: &ClassifyArgs, stdout: &mut dyn Write) -> CliResult {
    let loaded = load(&a.data)?;
    let dataset = &loaded.dataset;
    let ck = load_checkpoint(&a.checkpoint, dataset)?;
    if dataset.valid.is_empty() || dataset.test.is_empty() {
        return Err(CliError::Data(anyhow!("classification needs non-empty valid and test splits")));
    }
    let filter = build_filter_index(dataset);
    let stats = relation_stats(dataset).map_err(anyhow::Error::from)?;
    let bernoulli = BernoulliStats::new(&stats, dataset.num_relations());
    let ne = dataset.num_entities();
    let valid_neg = corrupt_split(&dataset.valid, &bernoulli, &filter, ne, a.seed);
    let test_neg = corrupt_split(&dataset.test, &bernoulli, &filter, ne, a.seed.wrapping_add(1));
    let scorer = Scorer::new(&ck.params, ck.variant).map_err(anyhow::Error::from)?;
    let model = learn_thresholds(&dataset.valid, &valid_neg, &scorer).map_err(anyhow::Error::from)?;
    let run = |pos, neg| quatde_core::eval::classify(pos, neg, &model, &scorer).map_err(anyhow::Error::from);
    let valid_acc = run(&dataset.valid, &valid_neg)?;
    let test_acc = run(&dataset.test, &test_neg)?;

    let text = match a.format {
        FormatArg::Tsv => format!(
            "split\tpositives\tnegatives\taccuracy\nvalid\t{}\t{}\t{valid_acc:.6}\ntest\t{}\t{}\t{test_acc:.6}\n",
            dataset.valid.len(),
            valid_neg.len(),
            dataset.test.len(),
            test_neg.len()
        ),
        FormatArg::Json => {
            let thresholds: serde_json::Map<String, serde_json::Value> = model
                .per_relation
                .iter()
                .map(|(&r, &th)| {
                    let name = dataset.relations.name(r).map(str::to_string).unwrap_or_else(|| r.to_string());
                    (name, json!(th))
                })
                .collect();
            let v = json!({
                "valid_accuracy": valid_acc,
                "test_accuracy": test_acc,
                "global_threshold": model.global,
                "per_relation": thresholds,
            });
            serde_json::to_string_pretty(&v).expect("serializable") + "\n"
        }
    };
    emit(stdout, &text)
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> CliResult {
    // Dimension problems are per-point failures; everything else is a usage error.
    validate_config(&a.hyper.config(1))?;
    if let Some(out) = &a.out {
        if out.is_dir() {
            return Err(usage(format!("--out {} is a directory", out.display())));
        }
    }
    let loaded = load(&a.data)?;
    let dataset = &loaded.dataset;
    let filter = build_filter_index(dataset);

    let mut rows = Vec::with_capacity(a.dims.len());
    for &dim in &a.dims {
        let config = a.hyper.config(dim);
        log::info!("sweep: dim {dim}");
        let result = config
            .validate()
            .map_err(|e| e.to_string())
            .and_then(|_| fit(dataset, &filter, &config).map_err(|e| e.to_string()))
            .and_then(|(params, _)| {
                test_metrics(dataset, &filter, config.variant, &params)
                    .map_err(|e| e.to_string())?
                    .ok_or_else(|| "the test split is empty".to_string())
            });
        if let Err(e) = &result {
            log::warn!("sweep: dim {dim} failed: {e}");
        }
        rows.push(SweepRow { dim, result });
    }
    let text = report::sweep_tsv(&rows);
    if let Some(out) = &a.out {
        fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    emit(stdout, &text)?;
    if rows.iter().all(|r| r.result.is_err()) {
        return Err(CliError::Data(anyhow!("every sweep point failed")));
    }
    Ok(())
}

fn cmd_make_toy(a: &MakeToyArgs, stdout: &mut dyn Write) -> CliResult {
    if a.out.exists() && !a.out.is_dir() {
        return Err(usage(format!("--out {} exists and is not a directory", a.out.display())));
    }
    let ds = quatde_core::synthetic::toy_kg(a.seed);
    io::write_integer_dataset(&a.out, &ds)
        .map_err(anyhow::Error::from)
        .with_context(|| format!("writing {}", a.out.display()))?;
    emit(stdout, &format!("wrote {}\n", a.out.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_is_not_an_error() {
        let mut out = Vec::new();
        run(["quatde", "--help"], &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("train"));
    }

    #[test]
    fn usage_errors_exit_one() {
        let mut out = Vec::new();
        for args in [
            vec!["quatde"],
            vec!["quatde", "train", "--data", "x"],
            vec!["quatde", "train", "--data", "x", "--out", "y", "--dim", "ten"],
            vec!["quatde", "eval", "--data", "x", "--checkpoint", "c", "--ties", "random"],
        ] {
            let err = run(args, &mut out).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{err}");
        }
    }

    #[test]
    fn numeric_errors_are_detected() {
        let e = anyhow::Error::from(quatde_core::Error::ZeroNorm {
            squared_norm: 0.0,
            epsilon: 1e-12,
        })
        .context("training");
        assert_eq!(CliError::from(e).exit_code(), 3);
        assert_eq!(CliError::from(anyhow!("missing file")).exit_code(), 2);
    }

    #[test]
    fn variant_flag_ignores_case() {
        let cli = Cli::try_parse_from(["quatde", "train", "--data", "d", "--out", "o", "--variant", "QuatE"]).unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        assert_eq!(ModelVariant::from(a.hyper.variant), ModelVariant::QuatE);
        assert_eq!(a.hyper.config(a.dim), TrainConfig { variant: ModelVariant::QuatE, ..TrainConfig::default() });
    }
}
