//! Multimodal deception classification: audio feature extraction, modality
//! fusion, four classifier families built from first principles, k-fold
//! evaluation, and model-agnostic explanations. Everything is deterministic
//! under a single seed.

pub mod audio;
pub mod classical;
pub mod conv1d;
pub mod error;
pub mod eval;
pub mod explain;
pub mod gcn;
pub mod ingest;
pub mod math;
pub mod model;
pub mod pipeline;
pub mod select;
