//! Caption-generation pipeline for SAR image-text corpora.
//!
//! Annotation sources (detection boxes, segmentation masks, optical captions
//! of co-registered images) are parsed by [`ingest`], turned into template
//! captions by [`caption`], rewritten or fused through a chat-completion
//! model by [`rewrite`], deduplicated by perceptual hash in [`dedup`] and
//! assembled into a manifest by [`corpus`]. [`eval`] scores captioners and
//! retrieval models; [`pipeline`] wires the stages together from a
//! [`config::PipelineConfig`].

pub mod caption;
pub mod config;
pub mod corpus;
pub mod dedup;
pub mod eval;
pub mod ingest;
mod par;
pub mod pipeline;
pub mod rewrite;
