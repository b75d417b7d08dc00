//! Stage orchestration: ingest, caption, rewrite, dedup, assemble, stats
//! and split, each persisting its artifact under the output directory.
//!
//! Every stage can run alone from the previous stage's files, and
//! [`Pipeline::run_all`] chains them in memory while writing the same files.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::Sender;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caption::{a2c_caption, a2c_caption_spatial, sa2c_caption};
use crate::config::{Adapter, ConfigError, Mode, PipelineConfig, SourceConfig};
use crate::corpus::{
    assemble, compute_stats, read_manifest, read_records, split, write_records, CaptionRecord,
    CorpusError, CorpusManifest, CorpusStats, ManifestInfo, Method,
};
use crate::dedup::{dedup_corpus, DedupError, DropEntry};
use crate::eval::{
    evaluate_captions, evaluate_retrieval, join_predictions, parse_caption_items, parse_embeddings,
    parse_similarity_matrix, similarity_from_embeddings, CaptionEvalReport, EvalError,
    RetrievalReport, Smoothing,
};
use crate::ingest::{
    load_mask, mask_samples, parse_caption_tsv, parse_detection_coco, parse_detection_voc,
    parse_paired_tsv, read_samples, validate_sample, write_samples, AnnotatedSample,
    CategoryMapping, IngestError, Payload, ValidationVerdict,
};
use crate::rewrite::{
    read_icl_store, run_jobs, ChatEndpoint, EndpointError, IclExample, ReplayEndpoint, RetryPolicy,
    RewriteError, RewriteJob, RewriteOptions, RuleRewriter,
};

pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const VALIDATION_FILE: &str = "validation.jsonl";
pub const CAPTIONS_FILE: &str = "captions.jsonl";
pub const REWRITTEN_FILE: &str = "rewritten.jsonl";
pub const DEDUP_LEDGER_FILE: &str = "dedup_ledger.jsonl";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const STATS_FILE: &str = "stats.json";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Caption,
    Rewrite,
    Dedup,
    Assemble,
    Stats,
    Split,
    Eval,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Caption => "caption",
            Stage::Rewrite => "rewrite",
            Stage::Dedup => "dedup",
            Stage::Assemble => "assemble",
            Stage::Stats => "stats",
            Stage::Split => "split",
            Stage::Eval => "eval",
        }
    }

    /// Process exit code for a failure in this stage.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Ingest => 3,
            Stage::Caption => 4,
            Stage::Rewrite => 5,
            Stage::Dedup => 6,
            Stage::Assemble => 7,
            Stage::Stats => 8,
            Stage::Split => 9,
            Stage::Eval => 10,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: Stage,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage}: {}: {message}", path.display())]
    Artifact {
        stage: Stage,
        path: PathBuf,
        message: String,
    },
    #[error("caption: sample {id:?}: {message}")]
    Caption { id: String, message: String },
    #[error("rewrite: {0}")]
    Rewrite(#[from] RewriteError),
    #[error("rewrite: {0}")]
    Endpoint(#[from] EndpointError),
    #[error("dedup: {0}")]
    Dedup(#[from] DedupError),
    #[error("{stage}: {source}")]
    Corpus {
        stage: Stage,
        #[source]
        source: CorpusError,
    },
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Config(_) => Stage::Config,
            PipelineError::Io { stage, .. }
            | PipelineError::Artifact { stage, .. }
            | PipelineError::Corpus { stage, .. } => *stage,
            PipelineError::Caption { .. } => Stage::Caption,
            PipelineError::Rewrite(_) | PipelineError::Endpoint(_) => Stage::Rewrite,
            PipelineError::Dedup(_) => Stage::Dedup,
            PipelineError::Eval(_) => Stage::Eval,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage().exit_code()
    }
}

fn io_error(stage: Stage, path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        stage,
        path: path.to_owned(),
        source,
    }
}

fn corpus_error(stage: Stage) -> impl FnOnce(CorpusError) -> PipelineError {
    move |source| PipelineError::Corpus { stage, source }
}

/// Worker and stage notifications, aggregated on one channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    StageStarted(Stage),
    Progress {
        stage: Stage,
        done: usize,
        total: usize,
    },
    Warning {
        stage: Stage,
        message: String,
    },
    StageFinished {
        stage: Stage,
        summary: String,
    },
}

/// One line of the validation report. Adapter failures carry no `id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub source: String,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub samples: Vec<AnnotatedSample>,
    pub entries: Vec<ValidationEntry>,
}

impl IngestReport {
    pub fn dropped(&self) -> usize {
        self.entries.iter().filter(|e| e.verdict != "keep").count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub ingested: usize,
    pub validation_drops: usize,
    pub duplicates_dropped: usize,
    pub manifest: CorpusManifest,
    pub stats: CorpusStats,
    pub train: usize,
    pub test: usize,
}

pub struct Pipeline {
    config: PipelineConfig,
    endpoint: Option<Box<dyn ChatEndpoint>>,
    events: Option<Sender<Event>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self {
            config,
            endpoint: None,
            events: None,
        }
    }

    /// Uses `endpoint` instead of the one the config describes.
    pub fn with_endpoint(mut self, endpoint: Box<dyn ChatEndpoint>) -> Self {
        self.endpoint = Some(endpoint);
        self
    }

    pub fn with_events(mut self, events: Sender<Event>) -> Self {
        self.events = Some(events);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn emit(&self, event: Event) {
        if let Some(tx) = &self.events {
            let _ = tx.send(event);
        }
    }

    fn ensure_output_dir(&self, stage: Stage) -> Result<(), PipelineError> {
        fs::create_dir_all(&self.config.output_dir)
            .map_err(io_error(stage, &self.config.output_dir))
    }

    /// Parses every source and validates each sample. A failing adapter
    /// drops its whole source and is reported; other sources proceed.
    pub fn ingest(&self) -> Result<IngestReport, PipelineError> {
        self.emit(Event::StageStarted(Stage::Ingest));
        self.ensure_output_dir(Stage::Ingest)?;
        let mut samples = Vec::new();
        let mut entries = Vec::new();
        for source in &self.config.sources {
            match load_source(source, &self.config) {
                Ok(found) => {
                    let verdicts = crate::par::map(&found, validate_sample);
                    for (sample, verdict) in found.into_iter().zip(verdicts) {
                        entries.push(ValidationEntry {
                            id: Some(sample.id.clone()),
                            source: source.name.clone(),
                            verdict: if verdict.is_keep() { "keep" } else { "drop" }.into(),
                            reason: match verdict {
                                ValidationVerdict::Keep => None,
                                ValidationVerdict::Drop(r) => Some(r.to_string()),
                            },
                        });
                        if verdict.is_keep() {
                            samples.push(sample);
                        }
                    }
                }
                Err(e) => {
                    self.emit(Event::Warning {
                        stage: Stage::Ingest,
                        message: format!("source {:?} skipped: {e}", source.name),
                    });
                    entries.push(ValidationEntry {
                        id: None,
                        source: source.name.clone(),
                        verdict: "error".into(),
                        reason: Some(e.to_string()),
                    });
                }
            }
        }
        let mut seen = HashSet::new();
        let mut unique = Vec::with_capacity(samples.len());
        for sample in samples {
            if seen.insert(sample.id.clone()) {
                unique.push(sample);
            } else {
                if let Some(entry) = entries
                    .iter_mut()
                    .rev()
                    .find(|e| e.id.as_deref() == Some(sample.id.as_str()) && e.verdict == "keep")
                {
                    entry.verdict = "drop".into();
                    entry.reason = Some("duplicate_id".into());
                }
            }
        }
        let report = IngestReport {
            samples: unique,
            entries,
        };
        self.write_ingest(&report)?;
        self.emit(Event::StageFinished {
            stage: Stage::Ingest,
            summary: format!(
                "{} samples kept, {} dropped",
                report.samples.len(),
                report.dropped()
            ),
        });
        Ok(report)
    }

    fn write_ingest(&self, report: &IngestReport) -> Result<(), PipelineError> {
        let path = self.artifact(SAMPLES_FILE);
        let file = File::create(&path).map_err(io_error(Stage::Ingest, &path))?;
        let mut out = BufWriter::new(file);
        write_samples(&mut out, &report.samples)
            .and_then(|_| out.flush())
            .map_err(io_error(Stage::Ingest, &path))?;
        write_jsonl(
            Stage::Ingest,
            &self.artifact(VALIDATION_FILE),
            &report.entries,
        )
    }

    pub fn read_samples(&self, stage: Stage) -> Result<Vec<AnnotatedSample>, PipelineError> {
        let path = self.artifact(SAMPLES_FILE);
        let file = File::open(&path).map_err(io_error(stage, &path))?;
        read_samples(BufReader::new(file)).map_err(|e| PipelineError::Artifact {
            stage,
            path,
            message: e.to_string(),
        })
    }

    /// Template captions: A2C for detection, SA2C for segmentation, and the
    /// optical caption as-is for paired samples.
    pub fn caption(
        &self,
        samples: &[AnnotatedSample],
    ) -> Result<Vec<CaptionRecord>, PipelineError> {
        self.emit(Event::StageStarted(Stage::Caption));
        self.ensure_output_dir(Stage::Caption)?;
        let mut mappings: HashMap<&str, CategoryMapping> = HashMap::new();
        for s in &self.config.sources {
            if s.adapter == Adapter::Mask {
                mappings.insert(&s.name, self.config.mapping(s)?);
            }
        }
        let caption_cfg = &self.config.caption;
        let records = crate::par::map(samples, |sample| -> Result<CaptionRecord, PipelineError> {
            let fail = |message: String| PipelineError::Caption {
                id: sample.id.clone(),
                message,
            };
            let (caption, method) = match &sample.payload {
                Payload::Detections(objects) if caption_cfg.spatial_enabled => (
                    a2c_caption_spatial(objects, sample.width, sample.height),
                    Method::A2cSpatial,
                ),
                Payload::Detections(objects) => (a2c_caption(objects), Method::A2c),
                Payload::Mask { path, .. } => {
                    let mapping =
                        mappings
                            .get(sample.source_dataset.as_str())
                            .ok_or_else(|| {
                                fail(format!("no mask source named {:?}", sample.source_dataset))
                            })?;
                    let grid = load_mask(path, mapping, caption_cfg.color_tolerance)
                        .map_err(|e| fail(e.to_string()))?;
                    let caption = sa2c_caption(&grid, mapping, caption_cfg.threshold_percent)
                        .map_err(|e| fail(e.to_string()))?;
                    (caption, Method::Sa2c)
                }
                Payload::Paired { optical_caption } => {
                    (optical_caption.trim().to_owned(), Method::PairedRaw)
                }
            };
            Ok(CaptionRecord {
                id: sample.id.clone(),
                image_path: self.config.display_path(&sample.image_path),
                caption,
                raw_caption: None,
                method,
                source_dataset: sample.source_dataset.clone(),
                fallback_used: false,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        let path = self.artifact(CAPTIONS_FILE);
        write_records(&path, &records).map_err(corpus_error(Stage::Caption))?;
        self.emit(Event::StageFinished {
            stage: Stage::Caption,
            summary: format!("{} captions", records.len()),
        });
        Ok(records)
    }

    fn open_endpoint(&self) -> Result<Box<dyn ChatEndpoint>, PipelineError> {
        let r = &self.config.rewrite;
        match r.mode {
            Mode::Replay => {
                let cassette = r.cassette.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("replay mode needs rewrite.cassette".into())
                })?;
                Ok(Box::new(ReplayEndpoint::open(cassette)?))
            }
            Mode::Live => live_endpoint(&self.config),
        }
    }

    fn rewrite_options(&self) -> RewriteOptions {
        let r = &self.config.rewrite;
        RewriteOptions {
            model: r.model.clone(),
            temperature: r.temperature,
            retry: RetryPolicy {
                max_attempts: r.retries,
                base_delay: std::time::Duration::from_millis(r.backoff_ms),
            },
            fallback_enabled: r.fallback_enabled,
            rules: RuleRewriter::new(&r.rules),
        }
    }

    fn icl_store(&self) -> Result<Vec<IclExample>, PipelineError> {
        let Some(path) = &self.config.rewrite.icl_store else {
            return Ok(Vec::new());
        };
        let file = File::open(path).map_err(io_error(Stage::Rewrite, path))?;
        read_icl_store(BufReader::new(file)).map_err(|e| PipelineError::Artifact {
            stage: Stage::Rewrite,
            path: path.clone(),
            message: e.to_string(),
        })
    }

    /// Rewrites paired captions and fuses proportion captions with their
    /// optical captions. Other records pass through unchanged.
    pub fn rewrite(
        &self,
        records: &[CaptionRecord],
        samples: &[AnnotatedSample],
    ) -> Result<Vec<CaptionRecord>, PipelineError> {
        self.emit(Event::StageStarted(Stage::Rewrite));
        self.ensure_output_dir(Stage::Rewrite)?;
        let optical: HashMap<&str, &str> = samples
            .iter()
            .filter_map(|s| match &s.payload {
                Payload::Mask {
                    optical_caption: Some(c),
                    ..
                } if !c.trim().is_empty() => Some((s.id.as_str(), c.as_str())),
                _ => None,
            })
            .collect();
        let seed = self.config.seed;
        let n = self.config.rewrite.n_examples;
        let needs_store = records.iter().any(|r| r.method == Method::PairedRaw) && n > 0;
        let store = if needs_store {
            self.icl_store()?
        } else {
            Vec::new()
        };

        let mut jobs = Vec::new();
        let mut targets = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let job = match r.method {
                Method::PairedRaw => RewriteJob::rewrite(&r.id, &r.caption, &store, n, seed)?,
                Method::Sa2c => match optical.get(r.id.as_str()) {
                    Some(b) => RewriteJob::fusion(&r.id, &r.caption, b, seed)?,
                    None => continue,
                },
                _ => continue,
            };
            jobs.push(job);
            targets.push(i);
        }

        let mut out = records.to_vec();
        if !jobs.is_empty() {
            let opened;
            let endpoint: &dyn ChatEndpoint = match &self.endpoint {
                Some(e) => e.as_ref(),
                None => {
                    opened = self.open_endpoint()?;
                    opened.as_ref()
                }
            };
            let options = self.rewrite_options();
            let done = AtomicUsize::new(0);
            let total = jobs.len();
            let results = run_jobs(
                endpoint,
                &jobs,
                &options,
                self.config.rewrite.max_concurrency,
                &|_| {
                    let d = done.fetch_add(1, Ordering::Relaxed) + 1;
                    self.emit(Event::Progress {
                        stage: Stage::Rewrite,
                        done: d,
                        total,
                    });
                },
            );
            let mut fallbacks = 0;
            for (i, result) in targets.into_iter().zip(results) {
                let outcome = result?;
                let record = &mut out[i];
                record.raw_caption = Some(std::mem::take(&mut record.caption));
                record.caption = outcome.text;
                record.fallback_used = outcome.fallback_used;
                record.method = match record.method {
                    Method::PairedRaw => Method::PairedRewritten,
                    _ => Method::Sa2cFused,
                };
                fallbacks += usize::from(outcome.fallback_used);
            }
            if fallbacks > 0 {
                self.emit(Event::Warning {
                    stage: Stage::Rewrite,
                    message: format!("{fallbacks} of {total} records used the rule rewrite"),
                });
            }
        }
        let path = self.artifact(REWRITTEN_FILE);
        write_records(&path, &out).map_err(corpus_error(Stage::Rewrite))?;
        self.emit(Event::StageFinished {
            stage: Stage::Rewrite,
            summary: format!("{} records sent to the endpoint", jobs.len()),
        });
        Ok(out)
    }

    /// Perceptual-hash deduplication; writes the drop ledger.
    pub fn dedup(
        &self,
        samples: &[AnnotatedSample],
    ) -> Result<(Vec<AnnotatedSample>, Vec<DropEntry>), PipelineError> {
        self.emit(Event::StageStarted(Stage::Dedup));
        self.ensure_output_dir(Stage::Dedup)?;
        let (kept, dropped) = dedup_corpus(samples, &self.config.dedup)?;
        write_jsonl(Stage::Dedup, &self.artifact(DEDUP_LEDGER_FILE), &dropped)?;
        self.emit(Event::StageFinished {
            stage: Stage::Dedup,
            summary: format!("{} kept, {} dropped", kept.len(), dropped.len()),
        });
        Ok((kept, dropped))
    }

    pub fn manifest_info(&self) -> ManifestInfo {
        ManifestInfo {
            created: created_timestamp(self.config.rewrite.mode),
            pipeline_version: PIPELINE_VERSION.into(),
            config_sha256: self.config.fingerprint(),
        }
    }

    /// Manifest of the records whose samples survived deduplication.
    pub fn assemble(
        &self,
        records: &[CaptionRecord],
        dropped: &[DropEntry],
    ) -> Result<CorpusManifest, PipelineError> {
        self.emit(Event::StageStarted(Stage::Assemble));
        self.ensure_output_dir(Stage::Assemble)?;
        let gone: HashSet<&str> = dropped.iter().map(|d| d.dropped_id.as_str()).collect();
        let manifest = assemble(
            records
                .iter()
                .filter(|r| !gone.contains(r.id.as_str()))
                .cloned(),
            &self.manifest_info(),
        )
        .map_err(corpus_error(Stage::Assemble))?;
        manifest
            .write(&self.artifact(MANIFEST_FILE))
            .map_err(corpus_error(Stage::Assemble))?;
        self.emit(Event::StageFinished {
            stage: Stage::Assemble,
            summary: format!("{} records", manifest.len()),
        });
        Ok(manifest)
    }

    pub fn stats(&self, manifest: &CorpusManifest) -> Result<CorpusStats, PipelineError> {
        self.emit(Event::StageStarted(Stage::Stats));
        self.ensure_output_dir(Stage::Stats)?;
        let stats = compute_stats(&manifest.records).map_err(corpus_error(Stage::Stats))?;
        let path = self.artifact(STATS_FILE);
        let mut body = serde_json::to_string_pretty(&stats).expect("stats serialize");
        body.push('\n');
        fs::write(&path, body).map_err(io_error(Stage::Stats, &path))?;
        self.emit(Event::StageFinished {
            stage: Stage::Stats,
            summary: format!(
                "mean caption length {:.1} words",
                stats.mean_caption_length_words
            ),
        });
        Ok(stats)
    }

    pub fn split(
        &self,
        manifest: &CorpusManifest,
    ) -> Result<(CorpusManifest, CorpusManifest), PipelineError> {
        self.emit(Event::StageStarted(Stage::Split));
        self.ensure_output_dir(Stage::Split)?;
        let (train, test) = split(manifest, self.config.split, self.config.seed)
            .map_err(corpus_error(Stage::Split))?;
        train
            .write(&self.artifact(TRAIN_FILE))
            .map_err(corpus_error(Stage::Split))?;
        test.write(&self.artifact(TEST_FILE))
            .map_err(corpus_error(Stage::Split))?;
        self.emit(Event::StageFinished {
            stage: Stage::Split,
            summary: format!("{} train, {} test", train.len(), test.len()),
        });
        Ok((train, test))
    }

    /// ingest, caption, rewrite, dedup, assemble, stats, split.
    pub fn run_all(&self) -> Result<RunSummary, PipelineError> {
        let report = self.ingest()?;
        let captions = self.caption(&report.samples)?;
        let rewritten = self.rewrite(&captions, &report.samples)?;
        let (_, dropped) = self.dedup(&report.samples)?;
        let manifest = self.assemble(&rewritten, &dropped)?;
        let stats = self.stats(&manifest)?;
        let (train, test) = self.split(&manifest)?;
        Ok(RunSummary {
            ingested: report.samples.len(),
            validation_drops: report.dropped(),
            duplicates_dropped: dropped.len(),
            manifest,
            stats,
            train: train.len(),
            test: test.len(),
        })
    }

    pub fn caption_from_disk(&self) -> Result<Vec<CaptionRecord>, PipelineError> {
        let samples = self.read_samples(Stage::Caption)?;
        self.caption(&samples)
    }

    pub fn rewrite_from_disk(&self) -> Result<Vec<CaptionRecord>, PipelineError> {
        let samples = self.read_samples(Stage::Rewrite)?;
        let records =
            read_records(&self.artifact(CAPTIONS_FILE)).map_err(corpus_error(Stage::Rewrite))?;
        self.rewrite(&records, &samples)
    }

    pub fn dedup_from_disk(&self) -> Result<(Vec<AnnotatedSample>, Vec<DropEntry>), PipelineError> {
        let samples = self.read_samples(Stage::Dedup)?;
        self.dedup(&samples)
    }

    pub fn assemble_from_disk(&self) -> Result<CorpusManifest, PipelineError> {
        let records =
            read_records(&self.artifact(REWRITTEN_FILE)).map_err(corpus_error(Stage::Assemble))?;
        let dropped: Vec<DropEntry> =
            read_jsonl(Stage::Assemble, &self.artifact(DEDUP_LEDGER_FILE))?;
        self.assemble(&records, &dropped)
    }

    pub fn read_manifest(&self, stage: Stage) -> Result<CorpusManifest, PipelineError> {
        read_manifest(&self.artifact(MANIFEST_FILE)).map_err(corpus_error(stage))
    }

    pub fn stats_from_disk(&self) -> Result<CorpusStats, PipelineError> {
        let manifest = self.read_manifest(Stage::Stats)?;
        self.stats(&manifest)
    }

    pub fn split_from_disk(&self) -> Result<(CorpusManifest, CorpusManifest), PipelineError> {
        let manifest = self.read_manifest(Stage::Split)?;
        self.split(&manifest)
    }
}

#[cfg(feature = "http")]
fn live_endpoint(config: &PipelineConfig) -> Result<Box<dyn ChatEndpoint>, PipelineError> {
    use crate::rewrite::{HttpEndpoint, RecordingEndpoint};

    let r = &config.rewrite;
    let key = std::env::var(crate::config::API_KEY_ENV).map_err(|_| ConfigError::MissingApiKey)?;
    let http = HttpEndpoint::new(
        &r.base_url,
        key,
        r.requests_per_second,
        std::time::Duration::from_secs(r.timeout_secs),
    );
    Ok(match &r.cassette {
        Some(path) => Box::new(RecordingEndpoint::new(http, path)?),
        None => Box::new(http),
    })
}

#[cfg(not(feature = "http"))]
fn live_endpoint(_config: &PipelineConfig) -> Result<Box<dyn ChatEndpoint>, PipelineError> {
    Err(ConfigError::Invalid("live mode needs the `http` feature".into()).into())
}

/// `SOURCE_DATE_EPOCH` when set; otherwise 0 in replay mode so reruns are
/// byte-identical, and the current time in live mode.
fn created_timestamp(mode: Mode) -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return epoch;
    }
    match mode {
        Mode::Replay => 0,
        Mode::Live => std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}

/// Files as given; directories expand to their `ext` files in name order.
fn expand_paths(paths: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>, IngestError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|source| IngestError::Io {
                    path: p.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension()
                        .is_some_and(|x| x.to_string_lossy().eq_ignore_ascii_case(ext))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_source(
    source: &SourceConfig,
    config: &PipelineConfig,
) -> Result<Vec<AnnotatedSample>, IngestError> {
    let name = source.name.as_str();
    let image_dir = || source.image_dir.clone().unwrap_or_default();
    match source.adapter {
        Adapter::Coco => {
            let mut out = Vec::new();
            for path in expand_paths(&source.paths, "json")? {
                out.extend(parse_detection_coco(&path, name)?);
            }
            Ok(out)
        }
        Adapter::Voc => expand_paths(&source.paths, "xml")?
            .iter()
            .map(|p| parse_detection_voc(p, name))
            .collect(),
        Adapter::Mask => {
            // a readable table up front surfaces mapping mistakes per source
            config
                .mapping(source)
                .map_err(|e| IngestError::InvalidMapping(e.to_string()))?;
            let optical = match &source.optical_captions {
                Some(path) => parse_caption_tsv(path)?.into_iter().collect(),
                None => HashMap::new(),
            };
            let masks = expand_paths(&source.paths, "png")?;
            Ok(mask_samples(&masks, &image_dir(), &optical, name))
        }
        Adapter::PairedTsv => {
            let mut out = Vec::new();
            for path in expand_paths(&source.paths, "tsv")? {
                out.extend(parse_paired_tsv(&path, &image_dir(), name)?);
            }
            Ok(out)
        }
    }
}

fn write_jsonl<T: Serialize>(stage: Stage, path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(io_error(stage, path))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("ledger entry serializes");
        writeln!(out, "{line}").map_err(io_error(stage, path))?;
    }
    out.flush().map_err(io_error(stage, path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(
    stage: Stage,
    path: &Path,
) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_error(stage, path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Artifact {
                stage,
                path: path.to_owned(),
                message: format!("line {}: {e}", n + 1),
            })
        })
        .collect()
}

/// Scores predictions. With `references`, `predictions` holds
/// `{id, candidate}` lines joined by id; otherwise it holds full
/// `{id, candidate, references}` items.
pub fn run_eval_captions(
    predictions: &Path,
    references: Option<&Path>,
    smoothing: Smoothing,
) -> Result<CaptionEvalReport, PipelineError> {
    let read = |p: &Path| fs::read_to_string(p).map_err(io_error(Stage::Eval, p));
    let items = match references {
        Some(refs) => join_predictions(&read(predictions)?, &read(refs)?),
        None => parse_caption_items(&read(predictions)?),
    }
    .map_err(|e| PipelineError::Artifact {
        stage: Stage::Eval,
        path: predictions.to_owned(),
        message: e.to_string(),
    })?;
    Ok(evaluate_captions(&items, smoothing)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetrievalInput {
    /// Image-by-text similarity matrix.
    Matrix(PathBuf),
    /// Paired embeddings; row i of each file belongs to pair i.
    Embeddings { images: PathBuf, texts: PathBuf },
}

pub fn run_eval_retrieval(input: &RetrievalInput) -> Result<RetrievalReport, PipelineError> {
    let read = |p: &Path| {
        fs::read_to_string(p)
            .map_err(io_error(Stage::Eval, p))
            .map(|t| (t, p.to_owned()))
    };
    let artifact = |path: PathBuf| {
        move |e: EvalError| PipelineError::Artifact {
            stage: Stage::Eval,
            path,
            message: e.to_string(),
        }
    };
    let matrix = match input {
        RetrievalInput::Matrix(path) => {
            let (text, p) = read(path)?;
            parse_similarity_matrix(&text).map_err(artifact(p))?
        }
        RetrievalInput::Embeddings { images, texts } => {
            let (a, pa) = read(images)?;
            let (b, pb) = read(texts)?;
            let a = parse_embeddings(&a).map_err(artifact(pa))?;
            let b = parse_embeddings(&b).map_err(artifact(pb))?;
            similarity_from_embeddings(&a, &b)?
        }
    };
    Ok(evaluate_retrieval(&matrix)?)
}
