//! Input formats for the evaluation commands.
//!
//! Caption items are JSON lines `{id, candidate, references}`. Matrices and
//! embeddings are plain text: a `rows cols` header followed by row-major
//! whitespace-separated reals.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::retrieval::SimilarityMatrix;
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionEvalItem {
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

pub fn parse_caption_items(text: &str) -> Result<Vec<CaptionEvalItem>, EvalError> {
    parse_jsonl(text)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Prediction {
    id: String,
    candidate: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceSet {
    id: String,
    references: Vec<String>,
}

/// Joins `{id, candidate}` lines with `{id, references}` lines by id, in
/// prediction order.
pub fn join_predictions(
    predictions: &str,
    references: &str,
) -> Result<Vec<CaptionEvalItem>, EvalError> {
    let preds: Vec<Prediction> = parse_jsonl(predictions)?;
    let refs: Vec<ReferenceSet> = parse_jsonl(references)?;
    let mut by_id: HashMap<String, Vec<String>> = HashMap::with_capacity(refs.len());
    for r in refs {
        if by_id.insert(r.id.clone(), r.references).is_some() {
            return Err(EvalError::Parse {
                line: 0,
                message: format!("duplicate reference id {:?}", r.id),
            });
        }
    }
    preds
        .into_iter()
        .enumerate()
        .map(|(n, p)| {
            let references = by_id.remove(&p.id).ok_or_else(|| EvalError::Parse {
                line: n + 1,
                message: format!("prediction {:?} has no references", p.id),
            })?;
            Ok(CaptionEvalItem {
                id: p.id,
                candidate: p.candidate,
                references,
            })
        })
        .collect()
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Header plus values; returns (rows, cols, values).
fn parse_dense(text: &str) -> Result<(usize, usize, Vec<f64>), EvalError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_line, header) = lines.next().ok_or(EvalError::Parse {
        line: 1,
        message: "missing \"rows cols\" header".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| EvalError::Parse {
            line: header_line + 1,
            message: format!("bad header: {e}"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(EvalError::Parse {
            line: header_line + 1,
            message: format!("header must hold two integers, got {}", dims.len()),
        });
    };
    let mut values = Vec::with_capacity(rows * cols);
    for (n, line) in lines {
        for token in line.split_whitespace() {
            values.push(token.parse::<f64>().map_err(|e| EvalError::Parse {
                line: n + 1,
                message: format!("{token:?}: {e}"),
            })?);
        }
    }
    if values.len() != rows * cols {
        return Err(EvalError::Parse {
            line: 0,
            message: format!(
                "header declares {} values, found {}",
                rows * cols,
                values.len()
            ),
        });
    }
    Ok((rows, cols, values))
}

pub fn parse_similarity_matrix(text: &str) -> Result<SimilarityMatrix, EvalError> {
    let (rows, cols, values) = parse_dense(text)?;
    SimilarityMatrix::new(rows, cols, values)
}

/// One embedding vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub count: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

pub fn parse_embeddings(text: &str) -> Result<Embeddings, EvalError> {
    let (count, dim, values) = parse_dense(text)?;
    Ok(Embeddings { count, dim, values })
}

/// Image-by-text dot products.
pub fn similarity_from_embeddings(
    images: &Embeddings,
    texts: &Embeddings,
) -> Result<SimilarityMatrix, EvalError> {
    if images.dim != texts.dim {
        return Err(EvalError::InvalidMatrix(format!(
            "embedding widths differ: {} vs {}",
            images.dim, texts.dim
        )));
    }
    let d = images.dim;
    let mut scores = Vec::with_capacity(images.count * texts.count);
    for i in 0..images.count {
        let a = &images.values[i * d..(i + 1) * d];
        for j in 0..texts.count {
            let b = &texts.values[j * d..(j + 1) * d];
            scores.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
        }
    }
    SimilarityMatrix::new(images.count, texts.count, scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_text_format() {
        let m = parse_similarity_matrix("2 3\n1 0 0\n0 1 0.5\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m.get(1, 2), 0.5);
        // values may wrap lines freely
        let flat = parse_similarity_matrix("2 2\n1 0 0 1").unwrap();
        assert_eq!(flat.get(1, 1), 1.0);
        assert!(parse_similarity_matrix("2 2\n1 0 0").is_err());
        assert!(parse_similarity_matrix("2\n1 0").is_err());
        assert!(parse_similarity_matrix("").is_err());
        assert!(parse_similarity_matrix("1 1\nx").is_err());
    }

    #[test]
    fn embeddings_dot_product() {
        let img = parse_embeddings("2 2\n1 0\n0 1\n").unwrap();
        let txt = parse_embeddings("3 2\n1 1\n0 2\n3 0\n").unwrap();
        let m = similarity_from_embeddings(&img, &txt).unwrap();
        assert_eq!(m.scores(), &[1.0, 0.0, 3.0, 1.0, 2.0, 0.0]);
        let wide = parse_embeddings("1 3\n1 1 1").unwrap();
        assert!(similarity_from_embeddings(&img, &wide).is_err());
    }

    #[test]
    fn joins_by_id() {
        let preds = "{\"id\":\"b\",\"candidate\":\"x\"}\n{\"id\":\"a\",\"candidate\":\"y\"}\n";
        let refs =
            "{\"id\":\"a\",\"references\":[\"y\"]}\n{\"id\":\"b\",\"references\":[\"x\",\"z\"]}\n";
        let items = join_predictions(preds, refs).unwrap();
        assert_eq!(items[0].id, "b");
        assert_eq!(items[0].references.len(), 2);
        assert!(join_predictions("{\"id\":\"c\",\"candidate\":\"x\"}", refs).is_err());
    }
}
