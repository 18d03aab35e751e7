//! Lazy probabilistic programming over an infinite tree of uniform randomness.
//!
//! Probability computations ([`Prob`]) read uniforms from a lazily
//! materialized rose tree; measure computations ([`Meas`]) also accumulate a
//! log-weight. Inference runs Metropolis-Hastings-Green chains that mutate the
//! tree, either at every site or at a single consumed site.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod inference;
pub mod meas;
pub mod models;
pub mod prob;
pub mod processes;
pub mod tree;

pub use error::{PplError, Result};
pub use inference::{irreducible_mix, lwis, mh, KernelSpec, MhConfig};
pub use meas::{
    normal_log_pdf, normal_pdf, run_prior, run_weighted, sample, score, score_log, LogWeight, Meas,
    MeasBlock, RunFailure, RunRecord,
};
pub use prob::{
    bernoulli, beta, categorical, exponential, iid, memoize_keyed, memoize_nat, normal, pure,
    unfold, uniform, Deferred, MemoKey, Prob, ProbBlock, RandFn, RealFn, Stream,
};
pub use processes::{
    dirichlet_process, gp, poisson_pp, rbf, rescale, splice, splice_prob, stick_breaking, to_prob,
    wiener, Covariance, PointStream, StickWeights,
};
pub use tree::{AccessLog, NodePath, OverrideStore, ProposalContext, TreeHandle};
