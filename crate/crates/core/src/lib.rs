//! Sparse AND-OR interaction extraction from black-box scalar models.
//!
//! A model is probed on all `2^n` masked variants of one sample, giving a
//! [`ValueTable`]. [`extract`] decomposes that table into AND and OR
//! interaction effects whose logical model reproduces every masked output.
//! The remaining modules summarize interactions by order, fit spindle and
//! decay shapes to those summaries, and measure train/test generalization.

// Negated comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod error;
pub mod experiments;
pub mod extract;
pub mod generalization;
pub mod interaction;
pub mod lattice;
pub mod parametric;
pub mod stats;
pub mod table;
pub mod zoo;

pub use distribution::{
    compute_z, delta_distribution, delta_stage, normalize, order_distribution, OrderDistribution,
};
pub use error::{Error, ErrorClass, Result};
pub use extract::{extract, matching_error, ExtractConfig, Extraction, SplitParams, StepRule, TraceLog};
pub use generalization::{jaccard, orderwise_jaccard, overall_jaccard, InteractionDistribution, InteractionVector, Universe};
pub use interaction::{max_order, salient_filter, InteractionSet};
pub use lattice::{
    mobius_and, mobius_or, reconstruct, trigger_matrix, zeta_and, zeta_or, InteractionKind, LatticeVector, SubsetMask,
};
pub use parametric::{
    build_m_matrix, decay_eval, decay_predict, disentangle, fit_spindle, spindle_eval, DecayParams, DisentangleResult,
    FitGrid, SpindleParams,
};
pub use table::{log_odds, ValueTable};
pub use zoo::{SyntheticModel, TinyNet};
