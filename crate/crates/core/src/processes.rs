//! Nonparametric building blocks: Poisson point processes, stick-breaking and
//! the Dirichlet process, splicing random functions at change points, and
//! Gaussian processes evaluated by one-point conditioning.

use std::collections::HashMap;
use std::sync::Arc;

use log::warn;
use parking_lot::Mutex;

use crate::dist::normal_quantile;
use crate::error::{PplError, Result};
use crate::prob::{beta, exponential, iid, Prob, RandFn, RealFn, Stream};
use crate::tree::TreeHandle;

/// Points of a process on the non-negative reals, lazily generated.
///
/// Element 0 is the anchor `0.0`; the process points are elements `1, 2, ...`.
/// Finite point sets are padded with `+inf`.
#[derive(Clone, Debug)]
pub struct PointStream(Stream<f64>);

impl PointStream {
    /// Anchor followed by `points`, which must be strictly increasing and
    /// positive.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let mut last = 0.0;
        for &p in &points {
            if !(p > last) {
                return Err(PplError::InvalidArgument(format!(
                    "change points must be positive and strictly increasing, got {p} after {last}"
                )));
            }
            last = p;
        }
        Ok(PointStream(Stream::from_fn(move |n| {
            Ok(match n {
                0 => 0.0,
                n => points.get(n - 1).copied().unwrap_or(f64::INFINITY),
            })
        })))
    }

    /// Element `n`; element 0 is the anchor.
    pub fn get(&self, n: usize) -> Result<f64> {
        self.0.get(n)
    }

    /// Number of process points (anchor excluded) strictly below `x`.
    pub fn count_below(&self, x: f64) -> Result<usize> {
        if x == f64::INFINITY {
            return Err(PplError::InvalidArgument(
                "cannot count points below +inf".into(),
            ));
        }
        let mut j = 0;
        while self.0.get(j + 1)? < x {
            j += 1;
        }
        Ok(j)
    }

    /// Process points in the half-open window `(0, t]`.
    pub fn points_up_to(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for n in 1.. {
            let p = self.0.get(n)?;
            if p > t {
                break;
            }
            out.push(p);
        }
        Ok(out)
    }

    pub fn stream(&self) -> &Stream<f64> {
        &self.0
    }
}

/// Homogeneous Poisson point process: cumulative sums of iid exponential gaps,
/// anchored at 0.
pub fn poisson_pp(rate: f64) -> Prob<PointStream> {
    if !(rate > 0.0) {
        return Prob::fail(PplError::param("rate", rate, "must be > 0"));
    }
    iid(&exponential(rate)).map(|steps| PointStream(steps.scan(0.0, |acc, gap| acc + gap)))
}

#[derive(Clone, Copy, Debug)]
struct Stick {
    weight: f64,
    partial: f64,
    remainder: f64,
}

/// Stick weights `v_0, v_1, ...` with cached partial sums.
#[derive(Clone, Debug)]
pub struct StickWeights(Stream<Stick>);

impl StickWeights {
    /// Weights taken from an arbitrary stream of non-negative values whose
    /// partial sums stay at most 1.
    pub fn from_stream(vs: Stream<f64>) -> Self {
        StickWeights(Stream::sequential(0.0f64, move |partial: &mut f64, n| {
            let weight = vs.get(n)?;
            *partial += weight;
            Ok(Stick {
                weight,
                partial: *partial,
                remainder: 1.0 - *partial,
            })
        }))
    }

    /// Finite weight list followed by zeros.
    pub fn from_values(vs: Vec<f64>) -> Self {
        Self::from_stream(Stream::from_fn(move |n| {
            Ok(vs.get(n).copied().unwrap_or(0.0))
        }))
    }

    /// `v_n`.
    pub fn get(&self, n: usize) -> Result<f64> {
        Ok(self.0.get(n)?.weight)
    }

    /// `v_0 + ... + v_n`, summed left to right.
    pub fn partial_sum(&self, n: usize) -> Result<f64> {
        Ok(self.0.get(n)?.partial)
    }

    /// Unbroken length after `n + 1` sticks. For stick-breaking this is the
    /// product `(1 - r_0) ... (1 - r_n)`.
    pub fn remainder(&self, n: usize) -> Result<f64> {
        Ok(self.0.get(n)?.remainder)
    }
}

/// Stick-breaking weights for a Dirichlet process with concentration `alpha`:
/// `v_k = r_k (1 - r_0) ... (1 - r_{k-1})` with `r_i ~ Beta(1, alpha)`.
///
/// Each `v_k` is clamped to `1 - (v_0 + ... + v_{k-1})`, so the floating-point
/// partial sums never exceed 1.
pub fn stick_breaking(alpha: f64) -> Prob<StickWeights> {
    if !(alpha > 0.0) {
        return Prob::fail(PplError::param("alpha", alpha, "must be > 0"));
    }
    iid(&beta(1.0, alpha)).map(|rs| {
        StickWeights(Stream::sequential(
            (1.0f64, 0.0f64),
            move |st: &mut (f64, f64), n| {
                let (rest, partial) = *st;
                let r = rs.get(n)?;
                let weight = (r * rest).min(1.0 - partial).max(0.0);
                let remainder = rest * (1.0 - r);
                *st = (remainder, partial + weight);
                Ok(Stick {
                    weight,
                    partial: partial + weight,
                    remainder,
                })
            },
        ))
    })
}

/// Upper bound on sticks inspected by [`to_prob`].
pub const MAX_STICKS: usize = 10_000_000;

/// Draw an index from stick weights: the least `n` whose partial sum through
/// `v_n` exceeds a uniform draw. Forces only the needed prefix.
pub fn to_prob(vs: &StickWeights) -> Prob<usize> {
    let vs = vs.clone();
    Prob::new(move |h| {
        let u = h.read_root();
        for n in 0..MAX_STICKS {
            if vs.partial_sum(n)? > u {
                return Ok(n);
            }
        }
        Err(PplError::StickOverflow(MAX_STICKS))
    })
}

/// Dirichlet process with concentration `alpha` and base distribution
/// `base`. The outer draw fixes sticks and atoms; each inner draw picks an
/// atom by [`to_prob`].
pub fn dirichlet_process<A: Clone + Send + Sync + 'static>(
    alpha: f64,
    base: &Prob<A>,
) -> Prob<Prob<A>> {
    let base = base.clone();
    Prob::block(move |b| {
        let vs = b.draw(&stick_breaking(alpha))?;
        let atoms = b.draw(&iid(&base))?;
        let pick = to_prob(&vs);
        Ok(pick.try_map(move |n| atoms.get(n)))
    })
}

/// Splice functions at change points: `x` is sent to `fs[j]`, where `j` is
/// the number of process points strictly below `x`.
pub fn splice(xs: &PointStream, fs: &Stream<RealFn>) -> RealFn {
    let xs = xs.clone();
    let fs = fs.clone();
    RandFn::new(move |x: f64| {
        let j = xs.count_below(x)?;
        fs.get(j)?.call(x)
    })
}

/// Draw change points from `pp` and an iid stream of pieces from `fp`, then
/// splice.
pub fn splice_prob(pp: &Prob<PointStream>, fp: &Prob<RealFn>) -> Prob<RealFn> {
    let pp = pp.clone();
    let fp = fp.clone();
    Prob::block(move |b| {
        let xs = b.draw(&pp)?;
        let fs = b.draw(&iid(&fp))?;
        Ok(splice(&xs, &fs))
    })
}

/// `x ↦ f(2x)`.
pub fn rescale(fp: &Prob<RealFn>) -> Prob<RealFn> {
    fp.map(|f| f.precompose(|x: f64| 2.0 * x))
}

/// Covariance function of a Gaussian process.
pub type Covariance = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Radial basis kernel `variance * exp(-(x - y)^2 / (2 lengthscale^2))`.
pub fn rbf(variance: f64, lengthscale: f64) -> Result<Covariance> {
    if !(variance > 0.0) {
        return Err(PplError::param("variance", variance, "must be > 0"));
    }
    if !(lengthscale > 0.0) {
        return Err(PplError::param("lengthscale", lengthscale, "must be > 0"));
    }
    let denom = 2.0 * lengthscale * lengthscale;
    Ok(Arc::new(move |x, y| {
        let d = x - y;
        variance * (-d * d / denom).exp()
    }))
}

/// Brownian-motion covariance `min(s, t)` on `t >= 0`.
pub fn wiener() -> Covariance {
    Arc::new(|s: f64, t: f64| s.min(t))
}

/// Conditional variances at or below this are treated as zero: the draw is
/// the conditional mean and the point adds no correction term.
pub const GP_DEGENERATE_VARIANCE: f64 = 1e-12;
/// Conditional variances below this (before clamping) raise a warning.
pub const GP_PSD_WARNING: f64 = -1e-6;
/// A point whose conditional variance is at most this fraction of `k(x, x)`
/// is still drawn from its conditional, but later queries do not condition
/// on it.
pub const GP_CONDITIONING_FLOOR: f64 = 1e-6;

struct Conditioned {
    x: f64,
    y: f64,
    /// `a_l(x)` for every earlier point `l`.
    coeffs: Vec<f64>,
    /// Conditional standard deviation at the time of the draw; 0 if later
    /// queries ignore the point.
    sd: f64,
    /// `y` minus the conditional mean at the time of the draw.
    resid: f64,
}

struct GpState {
    points: Vec<Conditioned>,
    by_x: HashMap<u64, usize>,
}

fn x_key(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

impl GpState {
    fn query(&mut self, x0: f64, base: &TreeHandle, mean: &RealFn, k: &Covariance) -> Result<f64> {
        let key = x_key(x0);
        if let Some(&i) = self.by_x.get(&key) {
            return Ok(self.points[i].y);
        }
        // Cholesky-style coefficients: after conditioning on points 0..n,
        // k_n(u, v) = k(u, v) - sum_i a_i(u) a_i(v) and
        // m_n(u) = m(u) + sum_i a_i(u) resid_i / sd_i.
        let mut coeffs = Vec::with_capacity(self.points.len());
        let mut cond_mean = mean.call(x0)?;
        let prior_var = k(x0, x0);
        let mut var = prior_var;
        for p in &self.points {
            if p.sd == 0.0 {
                coeffs.push(0.0);
                continue;
            }
            let cross: f64 = p.coeffs.iter().zip(&coeffs).map(|(a, b)| a * b).sum();
            let a = (k(p.x, x0) - cross) / p.sd;
            cond_mean += a * p.resid / p.sd;
            var -= a * a;
            coeffs.push(a);
        }
        if var < GP_PSD_WARNING {
            warn!("gaussian process conditional variance {var} at x = {x0}; clamping to 0");
            base.warn_psd();
        }
        let var = var.max(0.0);
        let node = base.child(self.points.len() as u64);
        let u = node.read_root();
        let (y, sd) = if var <= GP_DEGENERATE_VARIANCE {
            (cond_mean, 0.0)
        } else {
            let sd = var.sqrt();
            (cond_mean + sd * normal_quantile(u), sd)
        };
        let sd = if var <= GP_CONDITIONING_FLOOR * prior_var {
            0.0
        } else {
            sd
        };
        self.by_x.insert(key, self.points.len());
        self.points.push(Conditioned {
            x: x0,
            y,
            coeffs,
            sd,
            resid: y - cond_mean,
        });
        Ok(y)
    }
}

/// Gaussian process with mean `mean` and covariance `k`.
///
/// The returned function draws each new query from the current conditional
/// normal, conditions on the result, and memoizes it. Query `n` reads exactly
/// one node, child `n` of the handle.
pub fn gp(mean: &RealFn, k: &Covariance) -> Prob<RealFn> {
    let mean = mean.clone();
    let k = Arc::clone(k);
    Prob::new(move |h| {
        let base = h.clone();
        let mean = mean.clone();
        let k = Arc::clone(&k);
        let state = Mutex::new(GpState {
            points: Vec::new(),
            by_x: HashMap::new(),
        });
        Ok(RandFn::new(move |x: f64| {
            state.lock().query(x, &base, &mean, &k)
        }))
    })
}
