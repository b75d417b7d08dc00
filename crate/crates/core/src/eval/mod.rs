//! Caption-generation and cross-modal retrieval metrics.
//!
//! Every caption metric consumes [`TokenizedCaption`]s produced by
//! [`tokenize`], so all scores share one preprocessing path.

mod bleu;
mod cider;
mod io;
mod meteor;
mod report;
mod retrieval;
mod rouge;
mod tokenize;

use thiserror::Error;

pub use bleu::{bleu, bleu_with, corpus_bleu, BleuStats, Smoothing};
pub use cider::{cider, CiderScores};
pub use io::{
    join_predictions, parse_caption_items, parse_embeddings, parse_similarity_matrix,
    similarity_from_embeddings, CaptionEvalItem, Embeddings,
};
pub use meteor::{light_stem, meteor_simplified};
pub use report::{evaluate_captions, evaluate_retrieval, CaptionEvalReport, RetrievalReport};
pub use retrieval::{mean_recall, recall_at_k, Direction, SimilarityMatrix};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};
pub use tokenize::{tokenize, TokenizedCaption};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("at least one reference is required")]
    NoReferences,
    #[error("{candidates} candidates but {references} reference sets")]
    AlignmentMismatch {
        candidates: usize,
        references: usize,
    },
    #[error("k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
}
