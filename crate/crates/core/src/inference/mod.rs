//! Samplers: likelihood-weighted importance sampling and
//! Metropolis-Hastings-Green chains over the tree.

mod lwis;
mod mhg;

pub use lwis::{lwis, Lwis};
pub use mhg::{
    acceptance_probability, irreducible_mix, mh, mhg_step, propose_all_sites, propose_single_site,
    ChainState, ChainStats, KernelChoice, KernelSpec, MhConfig, MhRun, MhSample, Proposal,
    StepOutcome, DEFAULT_INIT_ATTEMPTS,
};
