//! Pipeline configuration: a TOML document plus flag and environment
//! overrides (flag > environment > file).
//!
//! Relative paths in the file resolve against the file's directory; paths
//! given as overrides resolve against the working directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::caption::DEFAULT_THRESHOLD_PERCENT;
use crate::corpus::SplitRatios;
use crate::dedup::DedupPolicy;
use crate::ingest::{MappingEntry, Task};
use crate::rewrite::RuleExtensions;

pub const API_KEY_ENV: &str = "SAR_NARRATOR_API_KEY";
pub const MODE_ENV: &str = "SAR_NARRATOR_MODE";
pub const SEED_ENV: &str = "SAR_NARRATOR_SEED";
pub const OUT_ENV: &str = "SAR_NARRATOR_OUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("live mode needs the {API_KEY_ENV} environment variable")]
    MissingApiKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adapter {
    Coco,
    Voc,
    Mask,
    PairedTsv,
}

impl Adapter {
    pub fn task(self) -> Task {
        match self {
            Adapter::Coco | Adapter::Voc => Task::Detection,
            Adapter::Mask => Task::Segmentation,
            Adapter::PairedTsv => Task::Paired,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub name: String,
    pub task: Task,
    pub adapter: Adapter,
    /// Annotation files, or directories scanned for the adapter's extension.
    pub paths: Vec<PathBuf>,
    /// SAR images for `mask` and `paired_tsv` sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_dir: Option<PathBuf>,
    /// `id<TAB>caption` optical captions for `mask` sources, keyed by mask stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optical_captions: Option<PathBuf>,
    /// Color to category table for `mask` sources.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mapping: Vec<MappingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptionConfig {
    pub threshold_percent: f64,
    pub spatial_enabled: bool,
    /// Per-channel tolerance when matching mask colors.
    pub color_tolerance: u8,
}

impl Default for CaptionConfig {
    fn default() -> Self {
        Self {
            threshold_percent: DEFAULT_THRESHOLD_PERCENT,
            spatial_enabled: true,
            color_tolerance: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Calls the HTTP endpoint, appending exchanges to the cassette if set.
    Live,
    /// Answers from the cassette only.
    Replay,
}

impl std::str::FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "replay" => Ok(Mode::Replay),
            other => Err(ConfigError::Invalid(format!(
                "unknown mode {other:?}, expected live or replay"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewriteConfig {
    pub mode: Mode,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub n_examples: usize,
    pub max_concurrency: usize,
    /// Attempts per request, including the first.
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub requests_per_second: f64,
    pub fallback_enabled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cassette: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icl_store: Option<PathBuf>,
    pub rules: RuleExtensions,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Replay,
            base_url: "https://api.deepseek.com".into(),
            model: "deepseek-chat".into(),
            temperature: 0.0,
            n_examples: crate::rewrite::DEFAULT_ICL_EXAMPLES,
            max_concurrency: 4,
            retries: 3,
            backoff_ms: 500,
            timeout_secs: 60,
            requests_per_second: 5.0,
            fallback_enabled: true,
            cassette: None,
            icl_store: None,
            rules: RuleExtensions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub dedup: DedupPolicy,
    #[serde(default)]
    pub caption: CaptionConfig,
    #[serde(default)]
    pub rewrite: RewriteConfig,
    #[serde(default)]
    pub split: SplitRatios,
    /// Directory of the config file; manifest image paths are relative to it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Values supplied on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    /// Reads, applies overrides from `flags` and the process environment,
    /// resolves paths and validates.
    pub fn load(path: &Path, flags: &Overrides) -> Result<Self, ConfigError> {
        Self::load_with_env(path, flags, |k| std::env::var(k).ok())
    }

    pub fn load_with_env(
        path: &Path,
        flags: &Overrides,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.base_dir = std::path::absolute(base).unwrap_or_else(|_| base.to_owned());
        let base = config.base_dir.clone();
        config.resolve_paths(&base);
        config.apply_overrides(flags, &env)?;
        config.validate()?;
        if config.rewrite.mode == Mode::Live && env(API_KEY_ENV).is_none_or(|k| k.trim().is_empty())
        {
            return Err(ConfigError::MissingApiKey);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        for s in &mut self.sources {
            s.paths.iter_mut().for_each(join);
            s.image_dir.as_mut().map(join);
            s.optical_captions.as_mut().map(join);
        }
        self.rewrite.cassette.as_mut().map(join);
        self.rewrite.icl_store.as_mut().map(join);
    }

    fn apply_overrides(
        &mut self,
        flags: &Overrides,
        env: &impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        if let Some(seed) = flags.seed {
            self.seed = seed;
        } else if let Some(v) = env(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|e| ConfigError::Invalid(format!("{SEED_ENV}={v:?}: {e}")))?;
        }
        if let Some(mode) = flags.mode {
            self.rewrite.mode = mode;
        } else if let Some(v) = env(MODE_ENV) {
            self.rewrite.mode = v.parse()?;
        }
        if let Some(dir) = flags
            .output_dir
            .clone()
            .or_else(|| env(OUT_ENV).map(PathBuf::from))
        {
            self.output_dir = std::path::absolute(&dir).unwrap_or(dir);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.sources.is_empty() {
            return invalid("no sources configured".into());
        }
        let mut names = HashSet::new();
        for s in &self.sources {
            if s.name.trim().is_empty() || s.name.contains('/') {
                return invalid(format!(
                    "source name {:?} must be non-empty and contain no '/'",
                    s.name
                ));
            }
            if !names.insert(&s.name) {
                return invalid(format!("duplicate source name {:?}", s.name));
            }
            if s.adapter.task() != s.task {
                return invalid(format!(
                    "source {:?}: adapter {:?} produces {} samples, not {}",
                    s.name,
                    s.adapter,
                    s.adapter.task(),
                    s.task
                ));
            }
            if s.paths.is_empty() {
                return invalid(format!("source {:?} lists no paths", s.name));
            }
            let needs_images = matches!(s.adapter, Adapter::Mask | Adapter::PairedTsv);
            if needs_images && s.image_dir.is_none() {
                return invalid(format!("source {:?} needs image_dir", s.name));
            }
            if s.adapter == Adapter::Mask && s.mapping.is_empty() {
                return invalid(format!("source {:?} needs a color mapping", s.name));
            }
            if s.adapter == Adapter::Mask {
                crate::ingest::CategoryMapping::try_from(s.mapping.clone())
                    .map_err(|e| ConfigError::Invalid(format!("source {:?}: {e}", s.name)))?;
            }
            if s.adapter != Adapter::Mask && (!s.mapping.is_empty() || s.optical_captions.is_some())
            {
                return invalid(format!(
                    "source {:?}: mapping and optical_captions apply to mask sources only",
                    s.name
                ));
            }
        }
        let t = self.caption.threshold_percent;
        if !(t > 0.0 && t <= 100.0) {
            return invalid(format!(
                "caption.threshold_percent must be in (0, 100], got {t}"
            ));
        }
        self.dedup
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("dedup: {e}")))?;
        self.split
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = &self.rewrite;
        if r.max_concurrency == 0 {
            return invalid("rewrite.max_concurrency must be at least 1".into());
        }
        if r.retries == 0 {
            return invalid("rewrite.retries must be at least 1".into());
        }
        if r.requests_per_second.is_nan() || r.requests_per_second <= 0.0 {
            return invalid("rewrite.requests_per_second must be positive".into());
        }
        if !(0.0..=2.0).contains(&r.temperature) {
            return invalid(format!(
                "rewrite.temperature must be in [0, 2], got {}",
                r.temperature
            ));
        }
        if r.mode == Mode::Replay && r.cassette.is_none() {
            return invalid("replay mode needs rewrite.cassette".into());
        }
        Ok(())
    }

    /// `path` relative to the config directory when it lies inside it, with
    /// `.` and `..` resolved lexically.
    pub fn display_path(&self, path: &Path) -> String {
        let normal = normalize(path);
        let shown = normal
            .strip_prefix(normalize(&self.base_dir))
            .map(Path::to_owned)
            .unwrap_or(normal);
        shown.to_string_lossy().replace('\\', "/")
    }

    /// Hex SHA-256 of the effective configuration. Input paths enter
    /// relative to the config directory and the output directory is left
    /// out, so relocating the checkout or redirecting output keeps the value.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        let relative = |p: &mut PathBuf| *p = PathBuf::from(self.display_path(p));
        c.output_dir = PathBuf::new();
        for s in &mut c.sources {
            s.paths.iter_mut().for_each(relative);
            s.image_dir.as_mut().map(relative);
            s.optical_captions.as_mut().map(relative);
        }
        c.rewrite.cassette.as_mut().map(relative);
        c.rewrite.icl_store.as_mut().map(relative);
        let body = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&body))
    }

    /// Category table of a `mask` source.
    pub fn mapping(
        &self,
        source: &SourceConfig,
    ) -> Result<crate::ingest::CategoryMapping, ConfigError> {
        crate::ingest::CategoryMapping::try_from(source.mapping.clone())
            .map_err(|e| ConfigError::Invalid(format!("source {:?}: {e}", source.name)))
    }

    pub fn source(&self, name: &str) -> Option<&SourceConfig> {
        self.sources.iter().find(|s| s.name == name)
    }
}

fn normalize(path: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}
