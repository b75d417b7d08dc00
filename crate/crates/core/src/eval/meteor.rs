//! A reduced METEOR: exact then stem alignment, no synonym stage. Absolute
//! values are not comparable with the reference METEOR implementation.

use super::tokenize::TokenizedCaption;
use super::EvalError;

const FRAG_WEIGHT: f64 = 0.5;
const FRAG_EXPONENT: i32 = 3;

/// Suffix-stripping stemmer: just enough to align "ships"/"ship" and
/// "houses"/"house".
pub fn light_stem(word: &str) -> &str {
    let mut stem = word;
    for suffix in ["ing", "ies", "ed", "es", "ly", "s"] {
        if let Some(rest) = stem.strip_suffix(suffix) {
            if rest.len() >= 3 && !stem.ends_with("ss") {
                stem = rest;
                break;
            }
        }
    }
    match stem.strip_suffix('e') {
        Some(rest) if rest.len() >= 3 => rest,
        _ => stem,
    }
}

pub fn meteor_simplified(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    Ok(references
        .iter()
        .map(|r| score_pair(candidate.tokens(), r.tokens()))
        .fold(0.0, f64::max))
}

fn score_pair(candidate: &[String], reference: &[String]) -> f64 {
    let alignment = align(candidate, reference);
    let matches = alignment.len();
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / candidate.len() as f64;
    let r = matches as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let chunks = count_chunks(&alignment);
    let penalty = FRAG_WEIGHT * (chunks as f64 / matches as f64).powi(FRAG_EXPONENT);
    fmean * (1.0 - penalty)
}

/// Greedy left-to-right alignment, exact stage first. Returns
/// (candidate index, reference index) pairs sorted by candidate index.
fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let stages: [fn(&str, &str) -> bool; 2] =
        [|a, b| a == b, |a, b| light_stem(a) == light_stem(b)];
    for same in stages {
        for (i, word) in candidate.iter().enumerate() {
            if cand_used[i] {
                continue;
            }
            if let Some(j) =
                (0..reference.len()).find(|&j| !ref_used[j] && same(word, &reference[j]))
            {
                cand_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| w[1].0 != w[0].0 + 1 || w[1].1 != w[0].1 + 1)
        .count()
}
