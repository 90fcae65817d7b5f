//! Continual-learning harness for incrementally adapting an image captioner.
//!
//! The crate is organised around the adaptation pipeline:
//!
//! * [`corpus`] ingests COCO-style caption annotations, applies the quality
//!   filter and remaps splits.
//! * [`taskgen`] turns a caption corpus into non-overlapping task clusters by
//!   noun-phrase keyword extraction, embedding averaging and k-means.
//! * [`tokenizer`] provides fixed-vocabulary subword tokenization.
//! * [`augment`] expands training batches with image and text edits.
//! * [`memory`] is the sparse episodic replay store.
//! * [`learner`] defines the pluggable learner contract and a retrieval
//!   reference learner.
//! * [`metrics`] scores captions with BLEU-4, ROUGE-L and CIDEr-D.
//! * [`trainer`] drives pretraining, sequential adaptation and ablations.

pub mod augment;
pub mod corpus;
pub mod error;
pub mod learner;
pub mod memory;
pub mod metrics;
pub mod persist;
pub mod rng;
pub mod synthetic;
pub mod taskgen;
pub mod text;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};
