//! LLM-backed caption rewriting and fusion with a rule-based fallback.

mod endpoint;
mod icl;
mod prompt;
mod rules;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "http")]
pub use endpoint::HttpEndpoint;
pub use endpoint::{
    CassetteEntry, ChatEndpoint, ChatMessage, ChatRequest, EndpointError, FnEndpoint,
    RecordingEndpoint, ReplayEndpoint, TokenBucket,
};
pub use icl::{job_seed, read_icl_store, select_icl_examples, IclExample};
pub use prompt::{
    build_fusion_prompt, build_rewrite_prompt, PromptKind, PromptTemplate, FUSION, SAR_REWRITE,
};
pub use rules::{
    rule_rewrite, RuleExtensions, RuleRewriter, CAMERA_TERMS, COLOR_WORDS, HEDGE_MARKERS,
    TREE_HEADS,
};

pub const DEFAULT_ICL_EXAMPLES: usize = 3;

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("invalid in-context example: {0}")]
    InvalidExample(String),
    #[error("requested {requested} in-context examples but the store holds {available}")]
    InsufficientExamples { requested: usize, available: usize },
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("endpoint returned an empty completion for {record_id:?}")]
    EmptyCompletion { record_id: String },
    #[error("endpoint failed for {record_id:?} after {attempts} attempt(s): {source}")]
    Endpoint {
        record_id: String,
        attempts: u32,
        #[source]
        source: EndpointError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobInput {
    Rewrite {
        caption: String,
    },
    Fusion {
        caption_a: String,
        caption_b: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteJob {
    pub record_id: String,
    pub input: JobInput,
    pub selected_examples: Vec<IclExample>,
    pub seed: u64,
}

impl RewriteJob {
    /// Rewrite job with `n` examples drawn from `store` under a per-record seed.
    pub fn rewrite(
        record_id: &str,
        caption: &str,
        store: &[IclExample],
        n: usize,
        run_seed: u64,
    ) -> Result<Self, RewriteError> {
        if caption.trim().is_empty() {
            return Err(RewriteError::EmptyInput("caption"));
        }
        let seed = job_seed(run_seed, record_id);
        Ok(Self {
            record_id: record_id.to_owned(),
            input: JobInput::Rewrite {
                caption: caption.to_owned(),
            },
            selected_examples: select_icl_examples(store, n, seed)?,
            seed,
        })
    }

    /// Fusion job; fusion prompts carry no in-context examples.
    pub fn fusion(
        record_id: &str,
        caption_a: &str,
        caption_b: &str,
        run_seed: u64,
    ) -> Result<Self, RewriteError> {
        if caption_a.trim().is_empty() {
            return Err(RewriteError::EmptyInput("caption_a"));
        }
        if caption_b.trim().is_empty() {
            return Err(RewriteError::EmptyInput("caption_b"));
        }
        Ok(Self {
            record_id: record_id.to_owned(),
            input: JobInput::Fusion {
                caption_a: caption_a.to_owned(),
                caption_b: caption_b.to_owned(),
            },
            selected_examples: Vec::new(),
            seed: job_seed(run_seed, record_id),
        })
    }

    pub fn kind(&self) -> PromptKind {
        match self.input {
            JobInput::Rewrite { .. } => PromptKind::SarRewrite,
            JobInput::Fusion { .. } => PromptKind::Fusion,
        }
    }

    pub fn prompt(&self) -> String {
        match &self.input {
            JobInput::Rewrite { caption } => build_rewrite_prompt(caption, &self.selected_examples),
            JobInput::Fusion {
                caption_a,
                caption_b,
            } => build_fusion_prompt(caption_a, caption_b),
        }
    }

    pub fn request(&self, options: &RewriteOptions) -> ChatRequest {
        ChatRequest::user(&options.model, self.prompt(), options.temperature)
    }

    fn fallback(&self, rules: &RuleRewriter) -> String {
        match &self.input {
            JobInput::Rewrite { caption } => rules.rewrite(caption),
            JobInput::Fusion {
                caption_a,
                caption_b,
            } => fallback_fusion(caption_a, &rules.rewrite(caption_b)),
        }
    }
}

/// Leading sentence of the proportion caption followed by the cleaned
/// optical caption.
fn fallback_fusion(caption_a: &str, cleaned_b: &str) -> String {
    let a = caption_a.trim();
    let lead = match a.find(". ") {
        Some(i) => &a[..=i],
        None => a,
    };
    let b = cleaned_b.trim();
    if b.is_empty() {
        return lead.to_owned();
    }
    let mut out = format!("{lead} {b}");
    if !out.ends_with(['.', '!', '?']) {
        out.push('.');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt `attempt` (1-based): `base * 2^(attempt-1)`.
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << (attempt.saturating_sub(1)).min(16))
    }
}

#[derive(Debug, Clone)]
pub struct RewriteOptions {
    pub model: String,
    pub temperature: f64,
    pub retry: RetryPolicy,
    pub fallback_enabled: bool,
    pub rules: RuleRewriter,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        Self {
            model: "deepseek-chat".into(),
            temperature: 0.0,
            retry: RetryPolicy::default(),
            fallback_enabled: true,
            rules: RuleRewriter::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteOutcome {
    pub text: String,
    pub fallback_used: bool,
    pub attempts: u32,
}

/// Sends the job's prompt, retrying transient failures. Exhausted or
/// permanent endpoint failures fall back to the rule rewrite when enabled.
pub fn rewrite_caption<E: ChatEndpoint + ?Sized>(
    endpoint: &E,
    job: &RewriteJob,
    options: &RewriteOptions,
) -> Result<RewriteOutcome, RewriteError> {
    let request = job.request(options);
    let max_attempts = options.retry.max_attempts.max(1);
    let mut attempts = 0;
    let error = loop {
        attempts += 1;
        match endpoint.complete(&request) {
            Ok(text) => {
                let text = text.trim();
                if text.is_empty() {
                    return Err(RewriteError::EmptyCompletion {
                        record_id: job.record_id.clone(),
                    });
                }
                return Ok(RewriteOutcome {
                    text: text.to_owned(),
                    fallback_used: false,
                    attempts,
                });
            }
            Err(e) if e.is_retryable() && attempts < max_attempts => {
                log::debug!("{}: attempt {attempts} failed: {e}", job.record_id);
                std::thread::sleep(options.retry.backoff(attempts));
            }
            Err(e) => break e,
        }
    };
    if options.fallback_enabled {
        log::warn!("{}: using rule rewrite after: {error}", job.record_id);
        return Ok(RewriteOutcome {
            text: job.fallback(&options.rules),
            fallback_used: true,
            attempts,
        });
    }
    Err(RewriteError::Endpoint {
        record_id: job.record_id.clone(),
        attempts,
        source: error,
    })
}

/// Fuses a proportion caption with an optical caption.
pub fn fuse_captions<E: ChatEndpoint + ?Sized>(
    endpoint: &E,
    caption_a: &str,
    caption_b: &str,
    options: &RewriteOptions,
) -> Result<RewriteOutcome, RewriteError> {
    let job = RewriteJob::fusion("", caption_a, caption_b, 0)?;
    rewrite_caption(endpoint, &job, options)
}

/// Runs jobs with at most `max_concurrency` requests in flight. Results come
/// back in job order; `on_done` is called once per finished job.
pub fn run_jobs<E: ChatEndpoint + ?Sized>(
    endpoint: &E,
    jobs: &[RewriteJob],
    options: &RewriteOptions,
    max_concurrency: usize,
    on_done: &(dyn Fn(usize) + Sync),
) -> Vec<Result<RewriteOutcome, RewriteError>> {
    let results: Vec<Mutex<Option<Result<RewriteOutcome, RewriteError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = max_concurrency.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let result = rewrite_caption(endpoint, job, options);
                *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
                on_done(i);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every job is processed")
        })
        .collect()
}
