//! Source adapters that turn heterogeneous annotation files into
//! [`AnnotatedSample`]s, plus the cleaning pass that drops corrupted or
//! annotation-less samples.

mod coco;
mod labels;
mod mask;
mod model;
mod paired;
mod validate;
mod voc;

use std::path::PathBuf;

use thiserror::Error;

pub use coco::{parse_detection_coco, parse_detection_coco_str};
pub use labels::{normalize_label, pluralize, singularize};
pub use mask::{grid_from_rgb, load_mask, mask_samples, CategoryGrid, UNMAPPED};
pub use model::{
    read_samples, sample_from_json, sample_to_json, write_samples, AnnotatedSample, BoundingBox,
    CategoryMapping, DetectionObject, MappingEntry, Payload, Task,
};
pub use paired::{parse_caption_tsv, parse_paired_tsv};
pub use validate::{validate_sample, DropReason, ValidationVerdict};
pub use voc::{parse_detection_voc, parse_detection_voc_str};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: malformed document: {message}", path.display())]
    MalformedDocument { path: PathBuf, message: String },
    #[error("{}: dangling reference: {message}", path.display())]
    DanglingReference { path: PathBuf, message: String },
    #[error("{}: invalid box: {message}", path.display())]
    InvalidBox { path: PathBuf, message: String },
    #[error("{}: unreadable image: {message}", path.display())]
    UnreadableImage { path: PathBuf, message: String },
    #[error("{}: image has no pixels", path.display())]
    EmptyImage { path: PathBuf },
    #[error("invalid category mapping: {0}")]
    InvalidMapping(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
