use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptrag::core::eval::DEFAULT_LINK_THRESHOLD;
use adaptrag::core::{train, Engine, OutcomeStatus, Policy, Stage};
use adaptrag::formats::{load_emr, load_kb, load_predictions, load_reference_emr, load_terminology, load_training, write_jsonl_to};
use adaptrag::{
    annotate_batch, bench, build_classifier, build_gateway, evaluate, load_index, run_batch, save_index, save_model, write_bench_csv,
    write_record_csv, AppConfig, EmrRecord, Error, Result,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::info;
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(name = "adaptrag", version, about = "Completeness-routed retrieval-augmented diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate knowledge-base and/or EMR files
    Ingest {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        emr: Option<PathBuf>,
    },
    /// Chunk and index a knowledge base
    Index {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Label record units by masking, producing training data
    Annotate {
        #[arg(long)]
        emr: PathBuf,
        #[arg(long)]
        kb_index: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training JSONL output
        #[arg(long)]
        out: PathBuf,
        /// Per-unit audit JSONL output
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Train the unit classifier
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Diagnose one record or a batch, writing JSONL traces
    Diagnose {
        #[command(flatten)]
        run: RunArgs,
        /// Batch input (EMR JSONL)
        #[arg(long, conflicts_with = "text")]
        emr: Option<PathBuf>,
        /// Single record text
        #[arg(long, required_unless_present = "emr")]
        text: Option<String>,
        #[arg(long, default_value = "record")]
        id: String,
        /// Overrides the policy implied by the config toggles
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Trace JSONL output (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Batch summary JSON output
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Score predictions against reference diagnoses
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        emr: PathBuf,
        #[arg(long)]
        terminology: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LINK_THRESHOLD)]
        threshold: f64,
        /// Metrics JSON output (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-record CSV output
        #[arg(long)]
        per_record: Option<PathBuf>,
    },
    /// Compare routing policies on the same records
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        emr: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        policy: BenchPolicy,
        /// CSV output (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kb_index: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PolicyArg {
    Adaptive,
    Always,
    Never,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Adaptive => Policy::Adaptive,
            PolicyArg::Always => Policy::Always,
            PolicyArg::Never => Policy::Never,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BenchPolicy {
    Adaptive,
    Always,
    Never,
    All,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io { path: p.into(), source: e })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io { path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf), source: e }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::from).map_err(io_err(path))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { kb, emr } => {
            if kb.is_none() && emr.is_none() {
                return Err(Error::Config("nothing to check: pass --kb and/or --emr".into()));
            }
            let mut report = serde_json::Map::new();
            if let Some(path) = kb {
                report.insert("kb_docs".into(), load_kb(&path)?.len().into());
            }
            if let Some(path) = emr {
                let records = load_emr(&path)?;
                let with_reference = records.iter().filter(|r| r.reference_diagnosis.is_some()).count();
                report.insert("emr_records".into(), records.len().into());
                report.insert("with_reference".into(), with_reference.into());
            }
            write_json(None, &report)
        }
        Command::Index { kb, out, config } => {
            let config = AppConfig::load_or_default(config.as_deref())?;
            let index = config.pipeline.build_index(load_kb(&kb)?).map_err(|e| Error::Invalid(e.to_string()))?;
            save_index(&out, &index)?;
            info!(docs = index.docs.len(), chunks = index.chunks.len(), out = %out.display(), "index written");
            Ok(())
        }
        Command::Annotate { emr, kb_index, config, out, audit } => {
            let config = AppConfig::load_or_default(config.as_deref())?;
            let templates = config.load_templates()?;
            let gateway = build_gateway(&config.gateway)?;
            let index = load_index(&kb_index)?;
            let records = load_reference_emr(&emr)?;
            let run = annotate_batch(&records, gateway.as_ref(), &index, &templates.diag, &config.annotation, config.workers)?;
            if !records.is_empty() && run.reports.is_empty() {
                return Err(Error::Backend(format!("all {} records failed annotation", records.len())));
            }
            adaptrag::formats::write_jsonl(&out, run.training_examples())?;
            if let Some(path) = audit {
                adaptrag::formats::write_jsonl(&path, run.outcomes())?;
            }
            info!(records = run.reports.len(), failed = run.failures.len(), llm_calls = run.llm_calls(), "annotation finished");
            Ok(())
        }
        Command::Train { data, out, config } => {
            let config = AppConfig::load_or_default(config.as_deref())?;
            let examples = load_training(&data)?;
            let model = train(&examples, &config.features, &config.training).map_err(|e| Error::Invalid(e.to_string()))?;
            save_model(&out, &model)?;
            info!(examples = examples.len(), train_accuracy = model.metadata.train_accuracy, "model written");
            Ok(())
        }
        Command::Diagnose { run, emr, text, id, policy, out, summary } => {
            let config = AppConfig::load_or_default(run.config.as_deref())?;
            let templates = config.load_templates()?;
            let gateway = build_gateway(&config.gateway)?;
            let classifier = build_classifier(&config, run.model.as_deref())?;
            let index = load_index(&run.kb_index)?;
            let engine = Engine::new(&config.pipeline, classifier.as_ref(), &index, gateway.as_ref(), &templates)
                .map_err(|e| Error::Config(e.to_string()))?;
            let policy = policy.map_or_else(|| config.pipeline.policy(), Policy::from);
            let records = match (emr, text) {
                (Some(path), _) => load_emr(&path)?,
                (None, Some(text)) => vec![EmrRecord::new(id, text)],
                (None, None) => unreachable!("clap requires --emr or --text"),
            };
            let report = run_batch(&engine, &records, policy, config.workers);
            let out_path = out.as_deref();
            write_jsonl_to(output(out_path)?, &report.outcomes).map_err(io_err(out_path))?;
            if let Some(path) = summary {
                write_json(Some(&path), &report.summary)?;
            }
            if let Some(e) = report.errors.first().filter(|_| report.outcomes.is_empty()) {
                return Err(match e.stage {
                    Stage::Classify => Error::Backend(e.to_string()),
                    _ => Error::Invalid(e.to_string()),
                });
            }
            if !records.is_empty() && report.summary.completed == 0 {
                let detail = report.outcomes.iter().find_map(|o| match &o.status {
                    OutcomeStatus::Failed { error, .. } => Some(error.clone()),
                    OutcomeStatus::Completed => None,
                });
                return Err(Error::Backend(detail.unwrap_or_else(|| "no record completed".into())));
            }
            Ok(())
        }
        Command::Eval { predictions, emr, terminology, threshold, out, per_record } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::Config("--threshold must be in [0, 1]".into()));
            }
            let (report, rows) =
                evaluate(&load_predictions(&predictions)?, &load_reference_emr(&emr)?, &load_terminology(&terminology)?, threshold)?;
            if let Some(path) = per_record {
                let file = File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                write_record_csv(file, &rows).map_err(|e| Error::Io { path, source: e.into() })?;
            }
            write_json(out.as_deref(), &report)
        }
        Command::Bench { run, emr, policy, out } => {
            let config = AppConfig::load_or_default(run.config.as_deref())?;
            let templates = config.load_templates()?;
            let gateway = build_gateway(&config.gateway)?;
            let classifier = build_classifier(&config, run.model.as_deref())?;
            let index = load_index(&run.kb_index)?;
            let engine = Engine::new(&config.pipeline, classifier.as_ref(), &index, gateway.as_ref(), &templates)
                .map_err(|e| Error::Config(e.to_string()))?;
            let policies: Vec<Policy> = match policy {
                BenchPolicy::All => Policy::ALL.to_vec(),
                BenchPolicy::Adaptive => vec![Policy::Adaptive],
                BenchPolicy::Always => vec![Policy::Always],
                BenchPolicy::Never => vec![Policy::Never],
            };
            let rows = bench(&engine, &load_emr(&emr)?, &policies, config.workers);
            let out_path = out.as_deref();
            write_bench_csv(output(out_path)?, &rows).map_err(|e| io_err(out_path)(e.into()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
