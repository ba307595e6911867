//! Entity typing over knowledge graphs with random-walk embeddings.
//!
//! The pipeline runs in stages: N-Triples are parsed into a [`graph::KnowledgeGraph`],
//! walk corpora are generated ([`walks`]), skip-gram embeddings are trained on
//! them ([`embed`]), embedding variants are fused into per-entity features
//! ([`represent`]), and neural classifiers predict flat, multi-label or
//! hierarchical types ([`classify`]), scored by [`eval`]. [`pipeline`] wires
//! the stages together with on-disk memoization.

pub mod graph;
pub mod util;
pub mod walks;
pub mod embed;
pub mod vectors;
pub mod represent;
pub mod classify;
pub mod eval;
pub mod pipeline;
