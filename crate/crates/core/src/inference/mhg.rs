use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PplError, Result};
use crate::meas::{run_prior, run_weighted, LogWeight, Meas, RunFailure, RunRecord};
use crate::tree::{derive_seed, AccessLog, OverrideStore, ProposalContext};

/// Start-state attempts before [`ChainState::init`] gives up.
pub const DEFAULT_INIT_ATTEMPTS: usize = 1000;

const INIT_TAG: u64 = 0x1417;
const RUN_TAG: u64 = 0x7e7e;
const TARGET_TAG: u64 = 0x7a6e;
const CHAIN_TAG: u64 = 0xc4a1;
const MIXTURE_WEIGHT_TOL: f64 = 1e-9;

/// Proposal kernel of a chain.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    /// Resample every node independently with probability `p`.
    AllSites(f64),
    /// Resample one node chosen uniformly from the sites the current run read.
    SingleSite,
    /// Pick a component with a constant probability, then propose with it.
    Mixture(Vec<(f64, KernelSpec)>),
}

impl KernelSpec {
    pub fn all_sites(p: f64) -> Result<Self> {
        let k = KernelSpec::AllSites(p);
        k.validate()?;
        Ok(k)
    }

    pub fn mixture(components: Vec<(f64, KernelSpec)>) -> Result<Self> {
        let k = KernelSpec::Mixture(components);
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(1)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        match self {
            KernelSpec::AllSites(p) => {
                if !(0.0..=1.0).contains(p) {
                    return Err(PplError::param("p", *p, "must lie in [0, 1]"));
                }
                Ok(())
            }
            KernelSpec::SingleSite => Ok(()),
            KernelSpec::Mixture(cs) => {
                if depth > 2 {
                    return Err(PplError::InvalidArgument(
                        "kernel mixtures nest at most two levels deep".into(),
                    ));
                }
                if cs.is_empty() {
                    return Err(PplError::InvalidArgument("empty kernel mixture".into()));
                }
                let mut total = 0.0;
                for (w, k) in cs {
                    if !(w.is_finite() && *w > 0.0) {
                        return Err(PplError::param("mixture weight", *w, "must be positive"));
                    }
                    total += w;
                    k.validate_at(depth + 1)?;
                }
                if (total - 1.0).abs() > MIXTURE_WEIGHT_TOL {
                    return Err(PplError::param("mixture weights", total, "must sum to 1"));
                }
                Ok(())
            }
        }
    }
}

/// `r` times the independence kernel plus `1 - r` times `AllSites(p)`.
pub fn irreducible_mix(r: f64, p: f64) -> Result<KernelSpec> {
    if !(r > 0.0 && r < 1.0) {
        return Err(PplError::param("r", r, "must lie in (0, 1)"));
    }
    KernelSpec::mixture(vec![
        (r, KernelSpec::AllSites(1.0)),
        (1.0 - r, KernelSpec::AllSites(p)),
    ])
}

/// The leaf kernel a step actually used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelChoice {
    AllSites(f64),
    SingleSite,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainStats {
    pub steps: u64,
    pub accepted: u64,
    /// Proposals whose run failed; each counts as a rejection.
    pub errors: u64,
    pub psd_warnings: u64,
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

/// Current point of a chain: the overrides for every site the current run
/// read, and that run's record.
pub struct ChainState<A> {
    overrides: Arc<OverrideStore>,
    record: RunRecord<A>,
    step_index: u64,
    rng_seed: u64,
    rng: ChaCha8Rng,
    stats: ChainStats,
}

impl<A: 'static> ChainState<A> {
    /// Start from a prior run with positive weight, retrying on fresh trees up
    /// to `max_attempts` times.
    pub fn init(m: &Meas<A>, seed: u64, max_attempts: usize) -> Result<Self> {
        let init_seed = derive_seed(seed, INIT_TAG);
        let mut last_error = None;
        let mut any_ok = false;
        for k in 0..max_attempts {
            let run_seed = derive_seed(init_seed, k as u64);
            match run_prior(m, run_seed) {
                Ok(rec) if !rec.log_weight.is_zero() => {
                    return Ok(ChainState {
                        overrides: Arc::new(OverrideStore::from_log(&rec.access)),
                        record: rec,
                        step_index: 0,
                        rng_seed: run_seed,
                        rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, CHAIN_TAG)),
                        stats: ChainStats::default(),
                    });
                }
                Ok(_) => any_ok = true,
                Err(f) => last_error = Some(f.error),
            }
        }
        match last_error {
            Some(e) if !any_ok => Err(e),
            _ => Err(PplError::InitFailed(max_attempts)),
        }
    }
}

impl<A> ChainState<A> {
    pub fn overrides(&self) -> &OverrideStore {
        &self.overrides
    }

    pub fn record(&self) -> &RunRecord<A> {
        &self.record
    }

    pub fn result(&self) -> &A {
        &self.record.result
    }

    pub fn log_weight(&self) -> LogWeight {
        self.record.log_weight
    }

    pub fn access(&self) -> &AccessLog {
        &self.record.access
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Base seed of the run that produced the current record.
    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn stats(&self) -> &ChainStats {
        &self.stats
    }
}

/// A candidate run and its log acceptance ratio.
#[derive(Clone, Debug)]
pub struct Proposal<A> {
    pub candidate: RunRecord<A>,
    pub log_ratio: f64,
    /// Base seed used for sites neither run had read.
    pub run_seed: u64,
}

fn weight_log_ratio(current: LogWeight, candidate: LogWeight) -> f64 {
    if candidate.is_zero() {
        f64::NEG_INFINITY
    } else if current.is_zero() {
        f64::INFINITY
    } else {
        candidate.ln() - current.ln()
    }
}

/// Rerun the model with every node resampled with probability `p`.
pub fn propose_all_sites<A: 'static>(
    m: &Meas<A>,
    state: &ChainState<A>,
    p: f64,
    epoch: u64,
) -> std::result::Result<Proposal<A>, RunFailure> {
    let run_seed = derive_seed(epoch, RUN_TAG);
    let candidate = run_weighted(
        m,
        run_seed,
        Arc::clone(&state.overrides),
        ProposalContext::AllSites { p, epoch },
    )?;
    let log_ratio = weight_log_ratio(state.record.log_weight, candidate.log_weight);
    Ok(Proposal {
        candidate,
        log_ratio,
        run_seed,
    })
}

/// Rerun the model with one uniformly chosen consumed site resampled. The
/// ratio carries the site-count correction `ln |S| - ln |S'|`.
pub fn propose_single_site<A: 'static>(
    m: &Meas<A>,
    state: &ChainState<A>,
    epoch: u64,
) -> std::result::Result<Proposal<A>, RunFailure> {
    let reads = state.record.access.reads();
    if reads.is_empty() {
        return Err(RunFailure {
            error: PplError::NoSites,
            access: AccessLog::new(),
        });
    }
    let n = reads.len();
    let idx = ((derive_seed(epoch, TARGET_TAG) as u128 * n as u128) >> 64) as usize;
    let target = reads[idx].0.clone();
    let run_seed = derive_seed(epoch, RUN_TAG);
    let candidate = run_weighted(
        m,
        run_seed,
        Arc::clone(&state.overrides),
        ProposalContext::SingleSite { target, epoch },
    )?;
    let sites_after = candidate.access.len();
    let log_ratio = if sites_after == 0 {
        f64::NEG_INFINITY
    } else {
        let correction = (n as f64).ln() - (sites_after as f64).ln();
        weight_log_ratio(state.record.log_weight, candidate.log_weight) + correction
    };
    Ok(Proposal {
        candidate,
        log_ratio,
        run_seed,
    })
}

/// `min(1, exp(log_ratio))`, with a zero-weight candidate never accepted and a
/// zero-weight current state always left.
pub fn acceptance_probability(current: LogWeight, candidate: LogWeight, log_ratio: f64) -> f64 {
    if candidate.is_zero() || log_ratio.is_nan() {
        0.0
    } else if current.is_zero() || log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// What happened in one step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub accepted: bool,
    pub acceptance_prob: f64,
    pub kernel: KernelChoice,
    /// Component indices chosen at each mixture level.
    pub components: Vec<usize>,
    pub error: Option<PplError>,
}

fn choose(kernel: &KernelSpec, rng: &mut ChaCha8Rng, path: &mut Vec<usize>) -> KernelChoice {
    match kernel {
        KernelSpec::AllSites(p) => KernelChoice::AllSites(*p),
        KernelSpec::SingleSite => KernelChoice::SingleSite,
        KernelSpec::Mixture(cs) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = cs.len() - 1;
            for (i, (w, _)) in cs.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            path.push(pick);
            choose(&cs[pick].1, rng, path)
        }
    }
}

/// One Metropolis-Hastings-Green transition.
pub fn mhg_step<A: 'static>(
    m: &Meas<A>,
    state: &mut ChainState<A>,
    kernel: &KernelSpec,
) -> StepOutcome {
    let epoch = state.rng.next_u64();
    let mut components = Vec::new();
    let choice = choose(kernel, &mut state.rng, &mut components);
    let proposal = match choice {
        KernelChoice::AllSites(p) => propose_all_sites(m, state, p, epoch),
        KernelChoice::SingleSite => propose_single_site(m, state, epoch),
    };
    let u: f64 = state.rng.random();
    state.step_index += 1;
    state.stats.steps += 1;
    match proposal {
        Err(failure) => {
            state.stats.errors += 1;
            StepOutcome {
                accepted: false,
                acceptance_prob: 0.0,
                kernel: choice,
                components,
                error: Some(failure.error),
            }
        }
        Ok(prop) => {
            state.stats.psd_warnings += prop.candidate.psd_warnings;
            let a = acceptance_probability(
                state.record.log_weight,
                prop.candidate.log_weight,
                prop.log_ratio,
            );
            let accepted = u < a;
            if accepted {
                state.overrides = Arc::new(OverrideStore::from_log(&prop.candidate.access));
                state.record = prop.candidate;
                state.rng_seed = prop.run_seed;
                state.stats.accepted += 1;
            }
            StepOutcome {
                accepted,
                acceptance_prob: a,
                kernel: choice,
                components,
                error: None,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MhConfig {
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub init_attempts: usize,
}

impl MhConfig {
    pub fn new(steps: u64, burn_in: u64, thin: u64, seed: u64) -> Self {
        MhConfig {
            steps,
            burn_in,
            thin,
            seed,
            init_attempts: DEFAULT_INIT_ATTEMPTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(PplError::InvalidArgument("steps must be at least 1".into()));
        }
        if self.burn_in >= self.steps {
            return Err(PplError::InvalidArgument(format!(
                "burn-in {} must be below steps {}",
                self.burn_in, self.steps
            )));
        }
        if self.thin == 0 {
            return Err(PplError::InvalidArgument("thin must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of samples the chain emits.
    pub fn emitted(&self) -> u64 {
        (self.steps - self.burn_in) / self.thin
    }
}

/// One emitted chain sample.
#[derive(Clone, Debug)]
pub struct MhSample<A> {
    pub value: A,
    pub log_weight: LogWeight,
    /// Whether the step that produced this sample accepted its proposal.
    pub accepted: bool,
    /// Distinct sites the current run read.
    pub sites: usize,
    /// 1-based index of the step after which the sample was taken.
    pub step: u64,
}

/// A running chain; iterate to get post-burn-in, thinned samples.
pub struct MhRun<A> {
    model: Meas<A>,
    kernel: KernelSpec,
    config: MhConfig,
    state: ChainState<A>,
}

/// Metropolis-Hastings-Green sampling of `m`.
pub fn mh<A: Clone + 'static>(
    m: &Meas<A>,
    kernel: &KernelSpec,
    config: MhConfig,
) -> Result<MhRun<A>> {
    config.validate()?;
    kernel.validate()?;
    let state = ChainState::init(m, config.seed, config.init_attempts)?;
    Ok(MhRun {
        model: m.clone(),
        kernel: kernel.clone(),
        config,
        state,
    })
}

impl<A> MhRun<A> {
    pub fn state(&self) -> &ChainState<A> {
        &self.state
    }

    pub fn stats(&self) -> &ChainStats {
        &self.state.stats
    }

    pub fn config(&self) -> &MhConfig {
        &self.config
    }
}

impl<A: Clone + 'static> Iterator for MhRun<A> {
    type Item = MhSample<A>;

    fn next(&mut self) -> Option<MhSample<A>> {
        while self.state.step_index < self.config.steps {
            let outcome = mhg_step(&self.model, &mut self.state, &self.kernel);
            let t = self.state.step_index;
            if t > self.config.burn_in && (t - self.config.burn_in).is_multiple_of(self.config.thin)
            {
                return Some(MhSample {
                    value: self.state.record.result.clone(),
                    log_weight: self.state.record.log_weight,
                    accepted: outcome.accepted,
                    sites: self.state.record.access.len(),
                    step: t,
                });
            }
        }
        None
    }
}
