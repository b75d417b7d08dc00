use serde::{Deserialize, Serialize};

use super::EvalError;

/// Dense image-by-text similarity scores. Image `i` pairs with text `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Image query, rank texts along the row.
    I2t,
    /// Text query, rank images down the column.
    T2i,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self, EvalError> {
        if rows == 0 || cols == 0 {
            return Err(EvalError::InvalidMatrix(format!(
                "shape {rows}x{cols} is empty"
            )));
        }
        if scores.len() != rows * cols {
            return Err(EvalError::InvalidMatrix(format!(
                "expected {} scores for {rows}x{cols}, got {}",
                rows * cols,
                scores.len()
            )));
        }
        if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::InvalidMatrix(format!(
                "non-finite score at row {}, col {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, scores })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EvalError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(EvalError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            scores[i * n + i] = 1.0;
        }
        Self::new(n, n, scores).expect("identity matrix is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols + col]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, EvalError> {
        Self::new(
            self.rows,
            self.cols,
            self.scores.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Percentage of queries whose paired item ranks within the top `k`.
///
/// Ranking is by descending score; equal scores rank by ascending index. A
/// query without a paired item (rectangular matrices) counts as a miss.
pub fn recall_at_k(m: &SimilarityMatrix, k: usize, direction: Direction) -> Result<f64, EvalError> {
    let (queries, candidates) = match direction {
        Direction::I2t => (m.rows, m.cols),
        Direction::T2i => (m.cols, m.rows),
    };
    if k == 0 || k > candidates {
        return Err(EvalError::KOutOfRange { k, max: candidates });
    }
    let score = |q: usize, c: usize| match direction {
        Direction::I2t => m.get(q, c),
        Direction::T2i => m.get(c, q),
    };
    let hits = (0..queries)
        .filter(|&q| {
            if q >= candidates {
                return false;
            }
            let target = score(q, q);
            // items ranked ahead of the target
            let ahead = (0..candidates)
                .filter(|&c| {
                    let s = score(q, c);
                    s > target || (s == target && c < q)
                })
                .count();
            ahead < k
        })
        .count();
    Ok(100.0 * hits as f64 / queries as f64)
}

pub const RECALL_KS: [usize; 3] = [1, 5, 10];

/// Mean of the six recalls over both directions and k in {1, 5, 10}.
pub fn mean_recall(m: &SimilarityMatrix) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    for direction in [Direction::I2t, Direction::T2i] {
        for k in RECALL_KS {
            sum += recall_at_k(m, k, direction)?;
        }
    }
    Ok(sum / 6.0)
}
