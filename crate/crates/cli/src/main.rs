use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand};
use sar_narrator::config::{Mode, Overrides, PipelineConfig};
use sar_narrator::eval::Smoothing;
use sar_narrator::pipeline::{
    run_eval_captions, run_eval_retrieval, Event, Pipeline, PipelineError, RetrievalInput,
};

/// Build SAR image-caption corpora from detection, segmentation and paired
/// optical annotations.
///
/// Settings come from the config file; `--seed`, `--mode` and `--out`
/// override it, and so do SAR_NARRATOR_SEED, SAR_NARRATOR_MODE and
/// SAR_NARRATOR_OUT (flags win over the environment). Live mode reads the
/// API key from SAR_NARRATOR_API_KEY.
#[derive(Parser)]
#[command(name = "sar-narrator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed for splitting and example sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `live` calls the endpoint, `replay` answers from the cassette.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Output directory for all stage artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate every source into samples.jsonl.
    Ingest,
    /// Template captions for the ingested samples.
    Caption,
    /// Rewrite paired captions and fuse proportion captions.
    Rewrite,
    /// Perceptual-hash deduplication of the ingested images.
    Dedup,
    /// Write the manifest from rewritten captions minus duplicates.
    Assemble,
    /// Corpus statistics of the manifest.
    Stats,
    /// Stratified train/test split of the manifest.
    Split,
    /// Every stage in order.
    RunAll,
    /// Score predicted captions against references.
    EvalCaptions {
        /// `{id, candidate}` lines, or full `{id, candidate, references}` items without --refs.
        #[arg(long)]
        pred: PathBuf,
        /// `{id, references}` lines.
        #[arg(long)]
        refs: Option<PathBuf>,
        /// BLEU epsilon smoothing for zero n-gram matches.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also write the report here.
        #[arg(long = "report")]
        report: Option<PathBuf>,
    },
    /// Recall@K and mean recall for image-text retrieval.
    EvalRetrieval {
        /// Image-by-text similarity matrix.
        #[arg(long, conflicts_with_all = ["images", "texts"])]
        matrix: Option<PathBuf>,
        /// Image embeddings, one row per pair.
        #[arg(long, requires = "texts")]
        images: Option<PathBuf>,
        /// Text embeddings, one row per pair.
        #[arg(long, requires = "images")]
        texts: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long = "report")]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::EvalCaptions {
            pred,
            refs,
            epsilon,
            report,
        } => {
            let smoothing = epsilon.map_or(Smoothing::None, Smoothing::Epsilon);
            let result = run_eval_captions(&pred, refs.as_deref(), smoothing)?;
            emit_report(
                &serde_json::to_string_pretty(&result).expect("report serializes"),
                report.as_deref(),
            )
        }
        Command::EvalRetrieval {
            matrix,
            images,
            texts,
            report,
        } => {
            let input = match (matrix, images, texts) {
                (Some(m), _, _) => RetrievalInput::Matrix(m),
                (None, Some(images), Some(texts)) => RetrievalInput::Embeddings { images, texts },
                _ => {
                    return Err(sar_narrator::config::ConfigError::Invalid(
                        "give --matrix or both --images and --texts".into(),
                    )
                    .into())
                }
            };
            let result = run_eval_retrieval(&input)?;
            emit_report(
                &serde_json::to_string_pretty(&result).expect("report serializes"),
                report.as_deref(),
            )
        }
        command => run_stage(command, &cli.common),
    }
}

fn run_stage(command: Command, common: &Common) -> Result<(), PipelineError> {
    let path = common.config.as_deref().ok_or_else(|| {
        sar_narrator::config::ConfigError::Invalid(
            "--config is required for pipeline stages".into(),
        )
    })?;
    let flags = Overrides {
        seed: common.seed,
        mode: common.mode,
        output_dir: common.out.clone(),
    };
    let config = PipelineConfig::load(path, &flags)?;
    let (tx, rx) = mpsc::channel();
    let logger = std::thread::spawn(move || {
        for event in rx {
            match event {
                Event::StageStarted(stage) => log::info!("{stage}: started"),
                Event::Progress { stage, done, total } if done == total || done % 50 == 0 => {
                    log::info!("{stage}: {done}/{total}")
                }
                Event::Progress { .. } => {}
                Event::Warning { stage, message } => log::warn!("{stage}: {message}"),
                Event::StageFinished { stage, summary } => log::info!("{stage}: {summary}"),
            }
        }
    });
    let pipeline = Pipeline::new(config).with_events(tx);
    let result = match command {
        Command::Ingest => pipeline.ingest().map(drop),
        Command::Caption => pipeline.caption_from_disk().map(drop),
        Command::Rewrite => pipeline.rewrite_from_disk().map(drop),
        Command::Dedup => pipeline.dedup_from_disk().map(drop),
        Command::Assemble => pipeline.assemble_from_disk().map(drop),
        Command::Stats => pipeline
            .stats_from_disk()
            .map(|s| print!("{}", s.summary())),
        Command::Split => pipeline.split_from_disk().map(drop),
        Command::RunAll => pipeline.run_all().map(|summary| {
            println!(
                "{} records in {} ({} duplicates dropped, {} train / {} test)",
                summary.manifest.len(),
                pipeline
                    .artifact(sar_narrator::pipeline::MANIFEST_FILE)
                    .display(),
                summary.duplicates_dropped,
                summary.train,
                summary.test
            )
        }),
        Command::EvalCaptions { .. } | Command::EvalRetrieval { .. } => {
            unreachable!("handled by run")
        }
    };
    drop(pipeline);
    let _ = logger.join();
    result
}

fn emit_report(json: &str, path: Option<&Path>) -> Result<(), PipelineError> {
    println!("{json}");
    if let Some(path) = path {
        std::fs::write(path, format!("{json}\n")).map_err(|source| PipelineError::Io {
            stage: sar_narrator::pipeline::Stage::Eval,
            path: path.to_owned(),
            source,
        })?;
    }
    Ok(())
}
