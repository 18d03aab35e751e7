//! Unnormalized measures: probability computations that also multiply a
//! weight, accumulated in log space.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::sync::Arc;

use crate::error::{PplError, Result};
use crate::prob::Prob;
use crate::tree::{AccessLog, OverrideStore, ProposalContext, TreeHandle};

/// Natural log of a non-negative weight; `-inf` is weight zero.
///
/// Never NaN. Zero absorbs under combination, even against `+inf`.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct LogWeight(f64);

impl LogWeight {
    /// Weight one.
    pub const ONE: LogWeight = LogWeight(0.0);
    /// Weight zero.
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);

    /// From a log-domain value. NaN is rejected.
    pub fn from_ln(x: f64) -> Result<Self> {
        if x.is_nan() {
            return Err(PplError::InvalidScore(x));
        }
        Ok(LogWeight(x))
    }

    /// From a weight `r >= 0`.
    pub fn from_weight(r: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(PplError::InvalidScore(r));
        }
        Ok(LogWeight(r.ln()))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl Add for LogWeight {
    type Output = LogWeight;

    fn add(self, rhs: LogWeight) -> LogWeight {
        if self.is_zero() || rhs.is_zero() {
            LogWeight::ZERO
        } else {
            LogWeight(self.0 + rhs.0)
        }
    }
}

impl AddAssign for LogWeight {
    fn add_assign(&mut self, rhs: LogWeight) {
        *self = *self + rhs;
    }
}

impl fmt::Debug for LogWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogWeight({})", self.0)
    }
}

impl fmt::Display for LogWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

type MeasFn<A> = dyn Fn(&TreeHandle, &mut LogWeight) -> Result<A> + Send + Sync;

/// An unnormalized measure over `A`.
pub struct Meas<A>(Arc<MeasFn<A>>);

impl<A> Clone for Meas<A> {
    fn clone(&self) -> Self {
        Meas(Arc::clone(&self.0))
    }
}

impl<A> fmt::Debug for Meas<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Meas(..)")
    }
}

impl<A: 'static> Meas<A> {
    pub fn new(
        f: impl Fn(&TreeHandle, &mut LogWeight) -> Result<A> + Send + Sync + 'static,
    ) -> Self {
        Meas(Arc::new(f))
    }

    pub fn run(&self, h: &TreeHandle, weight: &mut LogWeight) -> Result<A> {
        (self.0)(h, weight)
    }

    pub fn bind<B: 'static>(&self, f: impl Fn(A) -> Meas<B> + Send + Sync + 'static) -> Meas<B> {
        let m = self.clone();
        Meas::new(move |h, w| {
            let (first, rest) = h.split();
            let a = m.run(&first, w)?;
            f(a).run(&rest, w)
        })
    }

    /// Apply `f` to the result, on the same handle.
    pub fn map<B: 'static>(&self, f: impl Fn(A) -> B + Send + Sync + 'static) -> Meas<B> {
        let m = self.clone();
        Meas::new(move |h, w| m.run(h, w).map(&f))
    }

    /// Direct-style sequencing; every block operation is one `bind` step.
    pub fn block(f: impl Fn(&mut MeasBlock) -> Result<A> + Send + Sync + 'static) -> Self {
        Meas::new(move |h, w| {
            let mut block = MeasBlock {
                handle: h.clone(),
                weight: *w,
            };
            let out = f(&mut block);
            *w = block.weight;
            out
        })
    }
}

impl<A: Clone + Send + Sync + 'static> Meas<A> {
    pub fn pure(x: A) -> Self {
        Meas::new(move |_, _| Ok(x.clone()))
    }
}

/// Cursor for [`Meas::block`].
pub struct MeasBlock {
    handle: TreeHandle,
    weight: LogWeight,
}

impl MeasBlock {
    fn advance(&mut self) -> TreeHandle {
        let (first, rest) = self.handle.split();
        self.handle = rest;
        first
    }

    pub fn sample<T: 'static>(&mut self, p: &Prob<T>) -> Result<T> {
        let h = self.advance();
        p.run(&h)
    }

    pub fn score(&mut self, r: f64) -> Result<()> {
        self.advance();
        self.weight += LogWeight::from_weight(r)?;
        Ok(())
    }

    pub fn score_log(&mut self, ln_r: f64) -> Result<()> {
        self.advance();
        self.weight += LogWeight::from_ln(ln_r)?;
        Ok(())
    }

    pub fn run<T: 'static>(&mut self, m: &Meas<T>) -> Result<T> {
        let h = self.advance();
        m.run(&h, &mut self.weight)
    }
}

/// Regard a probability computation as a measure; adds nothing to the weight.
pub fn sample<A: 'static>(p: &Prob<A>) -> Meas<A> {
    let p = p.clone();
    Meas::new(move |h, _| p.run(h))
}

/// Multiply the weight by `r >= 0`. Reads no tree nodes.
pub fn score(r: f64) -> Meas<()> {
    match LogWeight::from_weight(r) {
        Ok(lw) => Meas::new(move |_, w| {
            *w += lw;
            Ok(())
        }),
        Err(e) => Meas::new(move |_, _| Err(e.clone())),
    }
}

/// Multiply the weight by `exp(ln_r)`. Equivalent to `score(ln_r.exp())`
/// without underflow.
pub fn score_log(ln_r: f64) -> Meas<()> {
    match LogWeight::from_ln(ln_r) {
        Ok(lw) => Meas::new(move |_, w| {
            *w += lw;
            Ok(())
        }),
        Err(e) => Meas::new(move |_, _| Err(e.clone())),
    }
}

/// One complete execution of a measure on one tree.
#[derive(Clone, Debug)]
pub struct RunRecord<A> {
    pub result: A,
    pub log_weight: LogWeight,
    /// Nodes read while the run executed. Reads made later through values the
    /// run returned (for example evaluating a returned random function) are
    /// not included.
    pub access: AccessLog,
    /// Gaussian-process conditional variances that came out below `-1e-6`
    /// before clamping.
    pub psd_warnings: u64,
}

/// A run that failed, with the nodes it had read before failing.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: PplError,
    pub access: AccessLog,
}

/// Execute `m` once on the tree given by `(seed, overrides, proposal)`.
pub fn run_weighted<A: 'static>(
    m: &Meas<A>,
    seed: u64,
    overrides: Arc<OverrideStore>,
    proposal: ProposalContext,
) -> std::result::Result<RunRecord<A>, RunFailure> {
    let h = TreeHandle::new_run(seed, overrides, proposal);
    let mut w = LogWeight::ONE;
    match m.run(&h, &mut w) {
        Ok(result) => Ok(RunRecord {
            result,
            log_weight: w,
            access: h.take_log(),
            psd_warnings: h.psd_warnings(),
        }),
        Err(error) => Err(RunFailure {
            error,
            access: h.take_log(),
        }),
    }
}

/// Run on a fresh tree with no overrides.
pub fn run_prior<A: 'static>(
    m: &Meas<A>,
    seed: u64,
) -> std::result::Result<RunRecord<A>, RunFailure> {
    run_weighted(
        m,
        seed,
        Arc::new(OverrideStore::new()),
        ProposalContext::None,
    )
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Gaussian density `exp(-(x - mu)^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`.
pub fn normal_pdf(mu: f64, sigma: f64, x: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(PplError::param("sigma", sigma, "must be > 0"));
    }
    let z = (x - mu) / sigma;
    Ok((-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
}

/// Natural log of [`normal_pdf`].
pub fn normal_log_pdf(mu: f64, sigma: f64, x: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(PplError::param("sigma", sigma, "must be > 0"));
    }
    let z = (x - mu) / sigma;
    Ok(-0.5 * z * z - sigma.ln() - LN_SQRT_2PI)
}
