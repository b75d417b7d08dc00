//! Caption manifest assembly, corpus statistics and train/test splits.

mod manifest;
mod split;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use manifest::{
    assemble, header_path, read_manifest, read_records, write_records, CaptionRecord,
    CorpusManifest, ManifestHeader, ManifestInfo, Method,
};
pub use split::{split, SplitRatios};
pub use stats::{compute_stats, word_count, CorpusStats, HistogramBucket, STOPWORDS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {0:?} has an empty caption")]
    EmptyCaption(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("split ratios must be positive and sum to 1, got ({train}, {test})")]
    InvalidRatios { train: f64, test: f64 },
    #[error("split leaves {train} train and {test} test records")]
    DegenerateSplit { train: usize, test: usize },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
