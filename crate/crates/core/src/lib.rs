//! Curation, staging and evaluation tooling for content-preserving style
//! transfer datasets.
//!
//! The pipeline runs in this order:
//!
//! 1. [`ingest`] scans a dataset into an [`ImageCatalog`] and loads
//!    embedding sidecars and captions.
//! 2. [`triplets`] matches images inside style clusters into
//!    `[style_ref, content_ref, target]` triplets.
//! 3. [`review`] serves the triplets to curators and appends their labels
//!    to a log.
//! 4. [`curriculum`] composes the three stage datasets and the chained
//!    training plan.
//! 5. [`bench`] pairs test styles with test contents, scores results with
//!    [`metrics`] and renders the report table.
//!
//! [`planner`] covers resolutions and prompt templates; [`cli`] wires
//! everything into one binary.

pub mod bench;
pub mod cli;
pub mod config;
pub mod curriculum;
pub mod datamodel;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod metrics;
pub mod planner;
pub mod review;
pub mod sampling;
pub mod triplets;

pub use config::PipelineConfig;
pub use datamodel::{
    CurriculumPlan, EmbeddingKind, EmbeddingVector, ImageKind, ImageRecord, Label, LabelRecord, ScoreRow, ScoreTable,
    Stage, StageDataset, Triplet, TripletSource,
};
pub use error::{Error, Result};
pub use ingest::{EmbeddingStore, ImageCatalog};
pub use metrics::{AestheticHead, MetricConfig};
