use std::path::PathBuf;

use thiserror::Error;

use crate::datamodel::EmbeddingKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing files: {}", .paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles { paths: Vec<PathBuf> },

    #[error("{path}: unreadable image header: {message}")]
    ImageHeader { path: PathBuf, message: String },

    #[error("cluster index names {} image(s) absent from the dataset: {}", .ids.len(), .ids.join(", "))]
    DanglingClusterMembers { ids: Vec<String> },

    #[error("duplicate image id {id:?} ({first} and {second})")]
    DuplicateImage {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },

    #[error("{path}:{line}: duplicate embedding for ({owner_id}, {kind})")]
    DuplicateEmbedding {
        path: PathBuf,
        line: usize,
        owner_id: String,
        kind: EmbeddingKind,
    },

    #[error("{path}:{line}: {kind} embedding has dim {found}, expected {expected}")]
    DimMismatch {
        path: PathBuf,
        line: usize,
        kind: EmbeddingKind,
        expected: usize,
        found: usize,
    },

    #[error("embedding ({owner_id}, {kind}) has non-finite value at index {index}")]
    NonFinite {
        owner_id: String,
        kind: EmbeddingKind,
        index: usize,
    },

    #[error("{} content reference(s) have no caption: {}", .ids.len(), .ids.join(", "))]
    MissingCaptions { ids: Vec<String> },

    #[error("{} target(s) have no asset: {}", .ids.len(), .ids.join(", "))]
    MissingAssets { ids: Vec<String> },

    #[error("catalog has no style clusters")]
    EmptyCatalog,

    #[error("manifest is empty")]
    EmptyManifest,

    #[error("duplicate triplet id {0}")]
    DuplicateTriplet(String),

    #[error("stage-2 requires curated labels: no high-consistency triplets")]
    NoCuratedLabels,

    #[error("stage-3 needs {required} synthetic triplets, only {available} available")]
    InsufficientSynthetic { required: usize, available: usize },

    #[error("stage {stage} init model {found:?} does not match previous output {expected:?}")]
    BrokenChain {
        stage: String,
        expected: String,
        found: String,
    },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("template {0} requires an argument")]
    MissingTemplateArg(&'static str),

    #[error("dimension mismatch: {left} vs {right}")]
    VectorDims { left: usize, right: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("empty vector")]
    EmptyVector,

    #[error("expected {expected} embedding, got {found}")]
    KindMismatch {
        expected: EmbeddingKind,
        found: EmbeddingKind,
    },

    #[error("aesthetic head layer {layer}: {message}")]
    HeadLayer { layer: usize, message: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("test and validation splits overlap on {0:?}")]
    SplitOverlap(String),

    #[error("{} pair(s) lack embeddings or results: {}", .pair_ids.len(), .pair_ids.join(", "))]
    MissingEmbeddings { pair_ids: Vec<String> },

    #[error("report needs at least one table")]
    EmptyReport,

    #[error("unknown triplet id {0}")]
    UnknownTriplet(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag used in structured error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::MissingFiles { .. } => "missing_files",
            Error::ImageHeader { .. } => "image_header",
            Error::DanglingClusterMembers { .. } => "dangling",
            Error::DuplicateImage { .. } => "duplicate_image",
            Error::DuplicateEmbedding { .. } => "duplicate_embedding",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::MissingCaptions { .. } => "missing_captions",
            Error::MissingAssets { .. } => "missing_assets",
            Error::EmptyCatalog => "empty_catalog",
            Error::EmptyManifest => "empty_manifest",
            Error::DuplicateTriplet(_) => "duplicate_triplet",
            Error::NoCuratedLabels => "stage2_labels",
            Error::InsufficientSynthetic { .. } => "insufficient_synthetic",
            Error::BrokenChain { .. } => "broken_chain",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidDimensions(_) => "invalid_dimensions",
            Error::MissingTemplateArg(_) => "missing_template_arg",
            Error::VectorDims { .. } => "vector_dims",
            Error::ZeroVector => "zero_vector",
            Error::EmptyVector => "empty_vector",
            Error::KindMismatch { .. } => "kind_mismatch",
            Error::HeadLayer { .. } => "head_layer",
            Error::DuplicateId(_) => "duplicate_id",
            Error::SplitOverlap(_) => "split_overlap",
            Error::MissingEmbeddings { .. } => "missing_embeddings",
            Error::EmptyReport => "empty_report",
            Error::UnknownTriplet(_) => "unknown_triplet",
            Error::Json(_) => "json",
        }
    }
}
