//! Learning-to-search AMR parsing.
//!
//! Sentences are segmented into spans, each span gets a concept, one concept
//! is chosen as root, and every ordered concept pair gets a relation or
//! NO-EDGE. The three policies are trained jointly with SEARN over
//! cost-sensitive linear scorers.

mod binio;
pub mod candidates;
pub mod classifier;
pub mod corpus;
pub mod features;
pub mod graph;
pub mod learner;
pub mod eval;
pub mod postprocess;
pub mod cli;
