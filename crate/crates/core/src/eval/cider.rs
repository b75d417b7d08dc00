//! Base CIDEr (no length penalty or count clipping): tf-idf n-gram vectors,
//! document frequencies from the reference sets, cosine similarity averaged
//! over references and orders 1..=4, scaled by 10.

use std::collections::HashMap;

use serde::Serialize;

use super::tokenize::TokenizedCaption;
use super::EvalError;

const ORDERS: usize = 4;
const SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiderScores {
    pub per_item: Vec<f64>,
    pub mean: f64,
}

type Counts<'a> = HashMap<&'a [String], f64>;

struct Vectorized {
    weights: Vec<HashMap<Vec<String>, f64>>,
    norms: [f64; ORDERS],
}

pub fn cider(
    candidates: &[TokenizedCaption],
    references: &[Vec<TokenizedCaption>],
) -> Result<CiderScores, EvalError> {
    if candidates.len() != references.len() {
        return Err(EvalError::AlignmentMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    if references.iter().any(Vec::is_empty) {
        return Err(EvalError::NoReferences);
    }

    // document frequency: each item's reference set counts once per n-gram
    let mut df: HashMap<&[String], f64> = HashMap::new();
    for refs in references {
        let mut seen: Vec<&[String]> = Vec::new();
        for r in refs {
            for n in 1..=ORDERS {
                seen.extend(r.ngrams(n));
            }
        }
        seen.sort_unstable();
        seen.dedup();
        for gram in seen {
            *df.entry(gram).or_default() += 1.0;
        }
    }
    let log_corpus = (candidates.len() as f64).ln();

    let per_item: Vec<f64> = crate::par::map(
        &candidates.iter().zip(references).collect::<Vec<_>>(),
        |(cand, refs)| {
            let hyp = vectorize(cand, &df, log_corpus);
            let total: f64 = refs
                .iter()
                .map(|r| {
                    let reference = vectorize(r, &df, log_corpus);
                    (0..ORDERS)
                        .map(|n| cosine(&hyp, &reference, n))
                        .sum::<f64>()
                        / ORDERS as f64
                })
                .sum();
            total / refs.len() as f64 * SCALE
        },
    );
    let mean = per_item.iter().sum::<f64>() / per_item.len() as f64;
    Ok(CiderScores { per_item, mean })
}

fn vectorize(
    caption: &TokenizedCaption,
    df: &HashMap<&[String], f64>,
    log_corpus: f64,
) -> Vectorized {
    let mut weights = Vec::with_capacity(ORDERS);
    let mut norms = [0.0; ORDERS];
    for n in 1..=ORDERS {
        let mut tf: Counts = HashMap::new();
        for gram in caption.ngrams(n) {
            *tf.entry(gram).or_default() += 1.0;
        }
        let w: HashMap<Vec<String>, f64> = tf
            .into_iter()
            .map(|(gram, count)| {
                let doc_freq = df.get(gram).copied().unwrap_or(0.0).max(1.0);
                (gram.to_vec(), count * (log_corpus - doc_freq.ln()))
            })
            .collect();
        norms[n - 1] = w.values().map(|v| v * v).sum::<f64>().sqrt();
        weights.push(w);
    }
    Vectorized { weights, norms }
}

fn cosine(a: &Vectorized, b: &Vectorized, order: usize) -> f64 {
    let (wa, wb) = (&a.weights[order], &b.weights[order]);
    let dot: f64 = wa
        .iter()
        .filter_map(|(gram, x)| wb.get(gram).map(|y| x * y))
        .sum();
    let denom = a.norms[order] * b.norms[order];
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}
