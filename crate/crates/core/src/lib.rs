//! Hierarchical significant words language models (HSWLM).
//!
//! Every entity in a tree-structured corpus gets a sparse term distribution
//! that is separable from its siblings (horizontal separation) and from its
//! ancestors and descendants (vertical separation). Estimation alternates a
//! top-down specification pass and a bottom-up generalization pass, each
//! built from repeated EM parsimonization of an entity model against one or
//! more background models.
//!
//! The numeric core ([`langmodel`], [`parsimony`], [`hswlm`]) is generic over
//! the probability scalar through [`Probability`]; the aliases at the crate
//! root fix it to `f64`, which is what the evaluation kit and CLI use.

pub mod corpus;
pub mod evalkit;
pub mod fmt;
pub mod hswlm;
pub mod langmodel;
pub mod parsimony;
mod scalar;

pub use crate::corpus::{
    filter_short_leaves, parse_hierarchy, tokenize, Corpus, CorpusError, Document,
    DocumentRecord, Entity, Hierarchy, HierarchyError, NodeId,
};
pub use crate::hswlm::{
    estimate_hswlm, generalization_pass, initialize, specification_pass, EstimationConfig,
    EstimationError, EstimationTrace, PruneFallback, Stage, TraceRecord,
};
pub use crate::langmodel::{js_divergence, l1_distance, mixture, mle_entity, ModelError};
pub use crate::parsimony::{combine_backgrounds, parsimonize, ParsimonyError};
pub use crate::scalar::Probability;

/// Sparse term distribution over `f64`.
pub type LanguageModel = langmodel::SparseLm<f64>;
/// Per-entity models over `f64`.
pub type Models = langmodel::ModelSet<f64>;
/// Parsimonization settings over `f64`.
pub type ParsimonyConfig = parsimony::ParsimonyConfig<f64>;
/// Full estimation settings over `f64`.
pub type Config = hswlm::EstimationConfig<f64>;
/// Estimation trace over `f64`.
pub type Trace = hswlm::EstimationTrace<f64>;

/// Single-precision variants, mostly useful for memory-bound corpora.
pub mod f32 {
    pub type LanguageModel = crate::langmodel::SparseLm<f32>;
    pub type Models = crate::langmodel::ModelSet<f32>;
    pub type ParsimonyConfig = crate::parsimony::ParsimonyConfig<f32>;
    pub type Config = crate::hswlm::EstimationConfig<f32>;
}
