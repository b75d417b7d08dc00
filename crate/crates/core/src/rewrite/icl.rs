//! In-context example store and seeded selection.

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RewriteError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IclExample {
    pub source_caption: String,
    pub rewritten_caption: String,
}

impl IclExample {
    pub fn new(
        source: impl Into<String>,
        rewritten: impl Into<String>,
    ) -> Result<Self, RewriteError> {
        let example = Self {
            source_caption: source.into(),
            rewritten_caption: rewritten.into(),
        };
        example.check()?;
        Ok(example)
    }

    fn check(&self) -> Result<(), RewriteError> {
        if self.source_caption.trim().is_empty() || self.rewritten_caption.trim().is_empty() {
            return Err(RewriteError::InvalidExample("empty caption".into()));
        }
        if self.source_caption.trim() == self.rewritten_caption.trim() {
            return Err(RewriteError::InvalidExample(format!(
                "rewrite is identical to its source: {:?}",
                self.source_caption
            )));
        }
        Ok(())
    }
}

/// Reads a line-delimited `{source_caption, rewritten_caption}` store.
pub fn read_icl_store<R: BufRead>(input: R) -> Result<Vec<IclExample>, RewriteError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| RewriteError::InvalidExample(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let example: IclExample = serde_json::from_str(&line)
            .map_err(|e| RewriteError::InvalidExample(format!("line {}: {e}", n + 1)))?;
        example
            .check()
            .map_err(|e| RewriteError::InvalidExample(format!("line {}: {e}", n + 1)))?;
        out.push(example);
    }
    Ok(out)
}

/// `n` distinct examples, sampled without replacement; the same
/// `(store, n, seed)` always yields the same selection.
pub fn select_icl_examples(
    store: &[IclExample],
    n: usize,
    seed: u64,
) -> Result<Vec<IclExample>, RewriteError> {
    if n > store.len() {
        return Err(RewriteError::InsufficientExamples {
            requested: n,
            available: store.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, store.len(), n)
        .into_iter()
        .map(|i| store[i].clone())
        .collect())
}

/// Per-record seed, so selection does not depend on processing order.
pub fn job_seed(run_seed: u64, record_id: &str) -> u64 {
    let digest = Sha256::digest(format!("{run_seed}:{record_id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
