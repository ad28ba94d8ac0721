//! `qoe`: feature extraction, scoring and training from the command line.
//!
//! Exit status is 0 on success, 2 for invalid input and 3 for numeric
//! failures such as a singular design.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qoe_core::features::{encode_categoricals, extract_features, FeatureTable};
use qoe_core::learn::pipeline::{train, Learner, TargetTransform, TrainConfig, TrainedModel};
use qoe_core::learn::{sorted_stratified_split, GbmHyper, LassoConfig, Loss, MaxFeatures, SplitRatios};
use qoe_core::pretrained::{builtin, builtin_names};
use qoe_core::session::read_video_meta;
use qoe_core::stats::evaluation_report;
use qoe_core::{Error, StreamingSession};

#[derive(Parser)]
#[command(name = "qoe", version, about = "Streaming-session QoE features, scoring and model training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a feature table from session JSON files.
    Extract {
        /// Session files or directories of `*.json` sessions.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a feature table (or sessions, with `--meta`) with a model.
    Score {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Built-in model name or a model JSON path.
        #[arg(long)]
        model: String,
        /// Treat `--input` as sessions and extract with this metadata.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Assign rows to train/test/validate by sorted stratification.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "mos")]
        target: String,
        #[arg(long, default_value = "8,1,1")]
        ratios: SplitRatios,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a model and write it with its evaluation report.
    Train {
        learner: LearnerKind,
        #[arg(long)]
        input: PathBuf,
        /// Model JSON destination.
        #[arg(long)]
        output: PathBuf,
        /// Report CSV destination; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: TrainArgs,
        #[command(flatten)]
        gbm: GbmArgs,
        #[arg(long, default_value_t = LassoConfig::default().alpha)]
        alpha: f64,
        #[arg(long, default_value_t = LassoConfig::default().max_iter)]
        max_iter: usize,
    },
    /// Evaluate a model against a target column, per partition.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "mos")]
        target: String,
        /// Partition labels written by `split`; every row is `all` otherwise.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Scale the metrics are computed on.
        #[arg(long, value_enum, default_value_t = Scale::Mos)]
        scale: Scale,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a built-in model as JSON.
    ExportModel {
        #[arg(long)]
        model: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rank features of a boosting model by mean decrease in impurity.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerKind {
    Gbm,
    Lasso,
    Ols,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scale {
    Mos,
    Logit,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Huber,
    Squared,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "mos")]
    target: String,
    /// Comma-separated feature columns; all complete columns when omitted.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Fit on MOS instead of its logit.
    #[arg(long)]
    identity_target: bool,
    #[arg(long, default_value = "8,1,1")]
    ratios: SplitRatios,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Name stored in the model file.
    #[arg(long, default_value = "trained")]
    name: String,
}

#[derive(Args)]
struct GbmArgs {
    #[arg(long, default_value_t = 200)]
    n_estimators: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 10)]
    min_samples_split: usize,
    #[arg(long, default_value_t = 6)]
    min_samples_leaf: usize,
    /// `sqrt`, `all` or a count.
    #[arg(long, default_value = "sqrt", value_parser = parse_max_features)]
    max_features: MaxFeatures,
    #[arg(long, value_enum, default_value_t = LossArg::Huber)]
    loss: LossArg,
    #[arg(long, default_value_t = 0.9)]
    huber_quantile: f64,
}

fn parse_max_features(s: &str) -> Result<MaxFeatures, String> {
    match s {
        "sqrt" => Ok(MaxFeatures::Sqrt),
        "all" => Ok(MaxFeatures::All),
        n => n
            .parse::<usize>()
            .ok()
            .filter(|k| *k > 0)
            .map(MaxFeatures::Count)
            .ok_or_else(|| format!("expected `sqrt`, `all` or a positive count, got `{n}`")),
    }
}

impl GbmArgs {
    fn hyper(&self) -> GbmHyper {
        GbmHyper {
            n_estimators: self.n_estimators,
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
            loss: match self.loss {
                LossArg::Huber => Loss::Huber,
                LossArg::Squared => Loss::Squared,
            },
            huber_quantile: self.huber_quantile,
            ..GbmHyper::default()
        }
    }
}

/// An error with the command context it arose in.
struct Failure {
    context: String,
    error: Error,
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<Error>> Context<T> for Result<T, E> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure { context: what(), error: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.context, f.error);
            ExitCode::from(if f.error.is_numeric() { 3 } else { 2 })
        }
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn read_table(path: &Path) -> Result<FeatureTable, Failure> {
    let f = File::open(path).context(|| format!("opening {}", path.display()))?;
    FeatureTable::read_csv(BufReader::new(f)).context(|| format!("reading {}", path.display()))
}

fn session_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Failure { context: "extract".into(), error: Error::Validation("no sessions found".into()) });
    }
    Ok(files)
}

fn extract_table(inputs: &[PathBuf], meta_path: &Path) -> Result<FeatureTable, Failure> {
    let meta_file = File::open(meta_path).context(|| format!("opening {}", meta_path.display()))?;
    let meta = read_video_meta(BufReader::new(meta_file)).context(|| format!("reading {}", meta_path.display()))?;
    let mut table = FeatureTable::default();
    let mut failed = 0usize;
    let mut first_error = None;
    for path in session_files(inputs)? {
        let result = File::open(&path)
            .map_err(Error::from)
            .and_then(|f| StreamingSession::from_reader(BufReader::new(f)))
            .and_then(|s| {
                let m = meta
                    .get(&s.video_id)
                    .ok_or_else(|| Error::Validation(format!("no metadata for video `{}`", s.video_id)))?;
                extract_features(&s, m)
            });
        match result {
            Ok(fv) => {
                let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                table.push(id, encode_categoricals(&fv));
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failed += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        None => Ok(table),
        Some(e) => Err(Failure { context: format!("extract: {failed} session(s) rejected"), error: e }),
    }
}

fn load_model(name_or_path: &str) -> Result<TrainedModel, Failure> {
    if let Some(m) = builtin(name_or_path) {
        return Ok(TrainedModel::Linear(m));
    }
    let path = Path::new(name_or_path);
    if !path.is_file() {
        return Err(Failure {
            context: "model".into(),
            error: Error::Validation(format!(
                "unknown model `{name_or_path}`; built-ins are {} (or pass a model JSON path)",
                builtin_names().join(", ")
            )),
        });
    }
    let doc = fs::read_to_string(path).context(|| format!("reading {}", path.display()))?;
    TrainedModel::from_json_str(&doc).context(|| format!("loading {}", path.display()))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Extract { input, meta, output } => {
            let table = extract_table(&input, &meta)?;
            table.write_csv(sink(output.as_deref())?).context(|| "writing features".into())
        }
        Command::Score { input, model, meta, output } => {
            let model = load_model(&model)?;
            let table = match meta {
                Some(m) => extract_table(&input, &m)?,
                None => match input.as_slice() {
                    [one] => read_table(one)?,
                    _ => {
                        return Err(Failure {
                            context: "score".into(),
                            error: Error::Validation("one feature CSV expected without --meta".into()),
                        })
                    }
                },
            };
            let scores = model.score_table(&table).context(|| format!("scoring with `{}`", model.name()))?;
            let mut w = csv::Writer::from_writer(sink(output.as_deref())?);
            let ctx = || "writing scores".to_string();
            w.write_record(["session_id", "raw_v", "mos"]).context(ctx)?;
            for (id, s) in table.ids.iter().zip(&scores) {
                w.write_record([id.clone(), s.raw_v.to_string(), s.mos.to_string()]).context(ctx)?;
            }
            w.flush().context(ctx)
        }
        Command::Split { input, target, ratios, seed, output } => {
            let table = read_table(&input)?;
            let y: Vec<f64> = table
                .column(&target)
                .context(|| "split".into())?
                .into_iter()
                .zip(&table.ids)
                .map(|(v, id)| v.ok_or_else(|| Error::MissingFeature(format!("{target} (row `{id}`)"))))
                .collect::<Result<_, _>>()
                .context(|| "split".into())?;
            let split = sorted_stratified_split(&y, ratios, seed).context(|| "split".into())?;
            let mut w = csv::Writer::from_writer(sink(output.as_deref())?);
            let ctx = || "writing split".to_string();
            w.write_record(["session_id", "partition"]).context(ctx)?;
            for (id, label) in table.ids.iter().zip(split.labels()) {
                w.write_record([id.as_str(), label]).context(ctx)?;
            }
            w.flush().context(ctx)
        }
        Command::Train { learner, input, output, report, common, gbm, alpha, max_iter } => {
            let table = read_table(&input)?;
            let learner = match learner {
                LearnerKind::Gbm => Learner::Gbm(gbm.hyper()),
                LearnerKind::Lasso => Learner::Lasso(LassoConfig { alpha, max_iter, ..LassoConfig::default() }),
                LearnerKind::Ols => Learner::Ols,
            };
            let cfg = TrainConfig {
                name: common.name,
                learner,
                columns: common.columns,
                target_column: common.target,
                target: if common.identity_target { TargetTransform::Identity } else { TargetTransform::Logit },
                ratios: common.ratios,
                seed: common.seed,
            };
            let outcome = train(&table, &cfg).context(|| "train".into())?;
            for w in outcome.warnings.iter().chain(&outcome.report.notices) {
                eprintln!("warning: {w}");
            }
            fs::write(&output, outcome.model.to_json_string() + "\n")
                .context(|| format!("writing {}", output.display()))?;
            outcome.report.write_csv(sink(report.as_deref())?).context(|| "writing report".into())
        }
        Command::Eval { input, model, target, split, scale, output } => {
            let model = load_model(&model)?;
            let table = read_table(&input)?;
            let ctx = || "eval".to_string();
            let scores = model.score_table(&table).context(ctx)?;
            let truth: Vec<f64> = table
                .column(&target)
                .context(ctx)?
                .into_iter()
                .zip(&table.ids)
                .map(|(v, id)| v.ok_or_else(|| Error::MissingFeature(format!("{target} (row `{id}`)"))))
                .collect::<Result<_, _>>()
                .context(ctx)?;
            let (pred, truth): (Vec<f64>, Vec<f64>) = match scale {
                Scale::Mos => (scores.iter().map(|s| s.mos).collect(), truth),
                Scale::Logit => (
                    scores.iter().map(|s| qoe_core::curve::mos_to_v(s.mos)).collect::<Result<_, _>>().context(ctx)?,
                    truth.iter().map(|q| qoe_core::curve::mos_to_v(*q)).collect::<Result<_, _>>().context(ctx)?,
                ),
            };
            let labels = match split {
                Some(p) => read_labels(&p, &table.ids)?,
                None => vec!["all".to_string(); table.len()],
            };
            let report = evaluation_report(&pred, &truth, &labels).context(ctx)?;
            for n in &report.notices {
                eprintln!("warning: {n}");
            }
            report.write_csv(sink(output.as_deref())?).context(|| "writing report".into())
        }
        Command::ExportModel { model, output } => {
            let model = load_model(&model)?;
            let mut w = sink(output.as_deref())?;
            writeln!(w, "{}", model.to_json_string()).context(|| "writing model".into())?;
            w.flush().context(|| "writing model".into())
        }
        Command::Importance { model, output } => {
            let doc = fs::read_to_string(&model).context(|| format!("reading {}", model.display()))?;
            let TrainedModel::Gbm(m) =
                TrainedModel::from_json_str(&doc).context(|| format!("loading {}", model.display()))?
            else {
                return Err(Failure {
                    context: "importance".into(),
                    error: Error::Validation("importance needs a boosting model".into()),
                });
            };
            let mut ranked = m.importance();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let mut w = csv::Writer::from_writer(sink(output.as_deref())?);
            let ctx = || "writing importance".to_string();
            w.write_record(["rank", "feature", "importance"]).context(ctx)?;
            for (i, (name, v)) in ranked.iter().enumerate() {
                w.write_record([(i + 1).to_string(), name.clone(), v.to_string()]).context(ctx)?;
            }
            w.flush().context(ctx)
        }
    }
}

/// Reads `session_id,partition` labels aligned to `ids`.
fn read_labels(path: &Path, ids: &[String]) -> Result<Vec<String>, Failure> {
    let ctx = || format!("reading {}", path.display());
    let mut rdr = csv::Reader::from_path(path).context(ctx)?;
    let mut by_id = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec.context(ctx)?;
        if rec.len() != 2 {
            return Err(Failure { context: ctx(), error: Error::Parse("expected session_id,partition".into()) });
        }
        by_id.insert(rec[0].to_string(), rec[1].to_string());
    }
    ids.iter()
        .map(|id| {
            by_id
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Validation(format!("no partition label for `{id}`")))
        })
        .collect::<Result<_, _>>()
        .context(ctx)
}
