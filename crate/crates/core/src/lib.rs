//! Training-free debiasing over embedding matrices.
//!
//! A bias subspace is fitted from counterfactual pairs, then removed either by
//! orthogonal projection (optionally only for samples whose bias score is below
//! a fitted threshold) or by a closed-form calibrated projection. Fairness
//! metrics and constraint audits operate on the resulting flags and counts.

pub mod calibration;
pub mod cli;
pub mod constraints;
pub mod embedding;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod prompts;
pub mod reference;
pub mod selection;
pub mod subspace;
pub mod synthgen;

pub use embedding::{EmbeddingMatrix, Group, LabelRecord};
pub use error::{Error, ErrorClass, Result};
