use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PplError, Result};
use crate::meas::{run_prior, Meas};
use crate::tree::derive_seed;

const RESAMPLE_TAG: u64 = 0x1a15;

/// Weighted prior runs, resampled in proportion to weight.
///
/// Iterating yields an infinite stream of results.
pub struct Lwis<A> {
    results: Vec<A>,
    log_weights: Vec<f64>,
    cumulative: Vec<f64>,
    rng: ChaCha8Rng,
}

/// Run `m` on `n` independent trees (seeds derived from `seed` by index) and
/// prepare to resample the results by weight.
pub fn lwis<A: 'static>(n: usize, m: &Meas<A>, seed: u64) -> Result<Lwis<A>> {
    if n == 0 {
        return Err(PplError::InvalidArgument(
            "lwis needs at least one run".into(),
        ));
    }
    let mut results = Vec::with_capacity(n);
    let mut log_weights = Vec::with_capacity(n);
    for i in 0..n {
        let rec = run_prior(m, derive_seed(seed, i as u64)).map_err(|f| f.error)?;
        results.push(rec.result);
        log_weights.push(rec.log_weight.ln());
    }
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(PplError::DegenerateMeasure(n));
    }
    let mut total = 0.0;
    let cumulative = log_weights
        .iter()
        .map(|lw| {
            total += (lw - max).exp();
            total
        })
        .collect();
    Ok(Lwis {
        results,
        log_weights,
        cumulative,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, RESAMPLE_TAG)),
    })
}

impl<A> Lwis<A> {
    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn results(&self) -> &[A] {
        &self.results
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Self-normalized importance estimate of `E[f]`.
    pub fn expectation(&self, f: impl Fn(&A) -> f64) -> f64 {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (a, lw) in self.results.iter().zip(&self.log_weights) {
            if *lw == f64::NEG_INFINITY {
                continue;
            }
            let w = (lw - max).exp();
            num += w * f(a);
            den += w;
        }
        num / den
    }

    /// Effective sample size of the weights, `(sum w)^2 / sum w^2`.
    pub fn ess(&self) -> f64 {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let (s, s2) = self.log_weights.iter().fold((0.0, 0.0), |(s, s2), lw| {
            let w = (lw - max).exp();
            (s + w, s2 + w * w)
        });
        s * s / s2
    }

    fn draw_index(&mut self) -> usize {
        let total = *self.cumulative.last().expect("at least one run");
        let u = self.rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.results.len() - 1)
    }
}

impl<A: Clone> Iterator for Lwis<A> {
    type Item = A;

    fn next(&mut self) -> Option<A> {
        let i = self.draw_index();
        Some(self.results[i].clone())
    }
}
