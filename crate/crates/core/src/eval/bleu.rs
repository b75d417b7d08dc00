//! BLEU with clipped n-gram precision and the closest-reference brevity
//! penalty.

use std::collections::HashMap;

use super::tokenize::TokenizedCaption;
use super::EvalError;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Smoothing {
    /// A zero precision at any order makes the score zero.
    #[default]
    None,
    /// Zero clipped counts are replaced by `epsilon` (an order with no
    /// candidate n-grams at all gets precision `epsilon`).
    Epsilon(f64),
}

/// Sufficient statistics; merging is associative so corpus scores can be
/// folded in any grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub clipped: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    pub fn from_pair(
        candidate: &TokenizedCaption,
        references: &[TokenizedCaption],
    ) -> Result<Self, EvalError> {
        if references.is_empty() {
            return Err(EvalError::NoReferences);
        }
        let mut stats = BleuStats {
            candidate_len: candidate.len() as u64,
            reference_len: closest_reference_len(candidate.len(), references) as u64,
            ..Default::default()
        };
        for order in 1..=MAX_ORDER {
            let cand = counts(candidate, order);
            let mut max_ref: HashMap<&[String], u64> = HashMap::new();
            for r in references {
                for (gram, c) in counts(r, order) {
                    let slot = max_ref.entry(gram).or_default();
                    *slot = (*slot).max(c);
                }
            }
            let (clipped, total) = cand.iter().fold((0, 0), |(clip, tot), (gram, &c)| {
                (
                    clip + c.min(max_ref.get(gram).copied().unwrap_or(0)),
                    tot + c,
                )
            });
            stats.clipped[order - 1] = clipped;
            stats.total[order - 1] = total;
        }
        Ok(stats)
    }

    pub fn merge(mut self, other: &BleuStats) -> BleuStats {
        for i in 0..MAX_ORDER {
            self.clipped[i] += other.clipped[i];
            self.total[i] += other.total[i];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
        self
    }

    /// BLEU-`max_order` from the accumulated counts.
    pub fn score(&self, max_order: usize, smoothing: Smoothing) -> f64 {
        let max_order = max_order.clamp(1, MAX_ORDER);
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for i in 0..max_order {
            let p = match smoothing {
                Smoothing::None => {
                    if self.clipped[i] == 0 {
                        return 0.0;
                    }
                    self.clipped[i] as f64 / self.total[i] as f64
                }
                Smoothing::Epsilon(eps) => {
                    if self.total[i] == 0 {
                        eps
                    } else if self.clipped[i] == 0 {
                        eps / self.total[i] as f64
                    } else {
                        self.clipped[i] as f64 / self.total[i] as f64
                    }
                }
            };
            log_sum += p.ln();
        }
        let c = self.candidate_len as f64;
        let r = self.reference_len as f64;
        let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
        brevity * (log_sum / max_order as f64).exp()
    }
}

fn counts(caption: &TokenizedCaption, order: usize) -> HashMap<&[String], u64> {
    let mut map = HashMap::new();
    for gram in caption.ngrams(order) {
        *map.entry(gram).or_default() += 1;
    }
    map
}

/// Reference length nearest the candidate's; ties go to the shorter one.
fn closest_reference_len(candidate_len: usize, references: &[TokenizedCaption]) -> usize {
    references
        .iter()
        .map(TokenizedCaption::len)
        .min_by_key(|&len| (len.abs_diff(candidate_len), len))
        .unwrap_or(0)
}

/// Sentence BLEU-`n` without smoothing.
pub fn bleu(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
    n: usize,
) -> Result<f64, EvalError> {
    bleu_with(candidate, references, n, Smoothing::None)
}

pub fn bleu_with(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
    n: usize,
    smoothing: Smoothing,
) -> Result<f64, EvalError> {
    check_order(n)?;
    Ok(BleuStats::from_pair(candidate, references)?.score(n, smoothing))
}

/// Corpus BLEU-`n`: counts pooled over all pairs before taking precisions.
pub fn corpus_bleu(
    pairs: &[(TokenizedCaption, Vec<TokenizedCaption>)],
    n: usize,
    smoothing: Smoothing,
) -> Result<f64, EvalError> {
    check_order(n)?;
    let mut total = BleuStats::default();
    for (candidate, references) in pairs {
        total = total.merge(&BleuStats::from_pair(candidate, references)?);
    }
    Ok(total.score(n, smoothing))
}

fn check_order(n: usize) -> Result<(), EvalError> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(EvalError::KOutOfRange {
            k: n,
            max: MAX_ORDER,
        });
    }
    Ok(())
}
