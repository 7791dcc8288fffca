//! Relational-similarity features for treatment-initiation prediction.
//!
//! The pipeline: a visit-level event log is turned into role-specific
//! bipartite clinician-patient graphs; the top eigenvectors of each graph's
//! symmetrically normalized adjacency yield a low-dimensional embedding whose
//! patient rows become dense "relational similarity" features; those features
//! are appended to a sparse bag-of-words baseline and evaluated with a
//! class-weighted logistic model under a time-aware split.
//!
//! Modules mirror the stages: [`graph`] (event log and graph construction),
//! [`sparse`]/[`dense`]/[`eigen`] (linear algebra), [`features`] (embedding
//! extraction), [`cohort`]/[`synth`] (intervals, labels, covariates, data
//! generation), [`model`]/[`metrics`] (training and evaluation), and
//! [`config`]/[`pipeline`] (CLI plumbing).

pub mod cohort;
pub mod config;
pub mod dense;
pub mod eigen;
pub mod error;
pub mod features;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
