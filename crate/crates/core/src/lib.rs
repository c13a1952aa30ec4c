//! Location-free scene graphs: representation, token-sequence codec,
//! instance matching and recall-based evaluation.
//!
//! Nodes are identified by a class label and a per-class instance index
//! only. Comparing a prediction to ground truth therefore needs an instance
//! alignment first; see [`matcher`].

pub mod codec;
pub mod error;
pub mod graph;
pub mod io;
pub mod matcher;
pub mod metrics;
pub mod retrieval;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{ClassId, Direction, EntityInstance, NeighborTuple, PredicateId, Quintuple, SceneGraph, Vocabulary};
pub use matcher::{
    apply_mapping, exhaustive_match, first_order_match, hts_match, overlap_score, InstanceMapping, MatchConfig,
};
