//! Template captions from structured annotations.
//!
//! Detection boxes go through the annotation-to-caption templates
//! ([`a2c_caption`], [`a2c_caption_spatial`]); segmentation masks go through
//! the proportion templates ([`sa2c_caption`]).

mod a2c;
mod sa2c;
mod spatial;

use thiserror::Error;

pub use a2c::{a2c_caption, a2c_caption_spatial, count_objects_by_class, ClassCount};
pub use sa2c::{category_proportions, sa2c_caption, ProportionEntry, DEFAULT_THRESHOLD_PERCENT};
pub use spatial::{spatial_phrase, SpatialCell};

#[derive(Debug, Error, PartialEq)]
pub enum CaptionError {
    #[error("threshold must lie in (0, 100], got {0}")]
    InvalidThreshold(f64),
    #[error("grid has no cells")]
    EmptyGrid,
}
