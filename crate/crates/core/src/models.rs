//! Example models: regression with linear, piecewise-linear and
//! Gaussian-process priors, Dirichlet-process clustering, and small models
//! with known posteriors.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::dist::normal_quantile;
use crate::error::{PplError, Result};
use crate::meas::{normal_log_pdf, normal_pdf, Meas};
use crate::prob::{bernoulli, iid, memoize_keyed, normal, uniform, Prob, RandFn, RealFn};
use crate::processes::{dirichlet_process, gp, poisson_pp, rbf, splice_prob};
use crate::tree::{base_value, NodePath};

/// A named list of `(x, y)` observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset2D {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Dataset2D {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        if let Some((x, y)) = points
            .iter()
            .find(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(PplError::Dataset(format!("non-finite point ({x}, {y})")));
        }
        Ok(Dataset2D {
            name: name.into(),
            points,
        })
    }

    /// Parse CSV with header `x,y`.
    pub fn from_csv_reader(name: impl Into<String>, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| PplError::Dataset(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(PplError::Dataset(format!(
                "expected header `x,y`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize::<(f64, f64)>() {
            points.push(row.map_err(|e| PplError::Dataset(e.to_string()))?);
        }
        Self::new(name, points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file =
            File::open(path).map_err(|e| PplError::Dataset(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_csv_reader(name, file)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Seed of the bundled regression data.
pub const BUNDLED_SEED: u64 = 2021;
/// Noise standard deviation of the bundled regression data.
pub const BUNDLED_NOISE: f64 = 0.3;

const BUNDLED_CSV: &str = include_str!("../data/regression9.csv");

/// Ground truth behind the bundled data: linear pieces joined at 3 and 6.
pub fn bundled_truth(x: f64) -> f64 {
    if x < 3.0 {
        0.5 + 0.4 * x
    } else if x < 6.0 {
        1.7 + 2.0 * (x - 3.0)
    } else {
        7.7 - 0.8 * (x - 6.0)
    }
}

/// Regenerate the bundled data: `x = 1, ..., 9` and
/// `y = truth(x) + 0.3 z` with `z` a standard normal drawn from the tree at
/// seed [`BUNDLED_SEED`].
pub fn generate_bundled_dataset() -> Dataset2D {
    let points = (0..9u64)
        .map(|i| {
            let x = (i + 1) as f64;
            let z = normal_quantile(base_value(BUNDLED_SEED, &NodePath::new(vec![i])));
            (x, bundled_truth(x) + BUNDLED_NOISE * z)
        })
        .collect();
    Dataset2D {
        name: "regression9".into(),
        points,
    }
}

/// The synthetic 9-point regression dataset shipped with the crate.
pub fn bundled_regression_dataset() -> Dataset2D {
    Dataset2D::from_csv_reader("regression9", BUNDLED_CSV.as_bytes())
        .expect("bundled dataset parses")
}

/// One-dimensional observations for the clustering demo.
pub fn bundled_cluster_data() -> Vec<f64> {
    vec![-2.3, -1.9, -2.6, -2.0, 1.7, 2.2, 2.0, 1.8, 5.4, 5.0]
}

/// `f(x) = a x + b` with `a, b ~ N(0, 3)`.
pub fn linear_prior() -> Prob<RealFn> {
    Prob::block(|b| {
        let a = b.draw(&normal(0.0, 3.0))?;
        let c = b.draw(&normal(0.0, 3.0))?;
        Ok(RandFn::total(move |x: f64| a * x + c))
    })
}

/// Draw `f` from `prior` and score every datum by `N(d; f(x), sigma)`.
///
/// Scores are added in log space so that tight likelihoods do not underflow.
pub fn regress<X: Clone + Send + Sync + 'static>(
    sigma: f64,
    prior: &Prob<RandFn<X, f64>>,
    data: Vec<(X, f64)>,
) -> Meas<RandFn<X, f64>> {
    if !(sigma > 0.0) {
        let err = PplError::param("sigma", sigma, "must be > 0");
        return Meas::new(move |_, _| Err(err.clone()));
    }
    let prior = prior.clone();
    Meas::block(move |b| {
        let f = b.sample(&prior)?;
        for (x, d) in &data {
            let fx = f.call(x.clone())?;
            b.score_log(normal_log_pdf(fx, sigma, *d)?)?;
        }
        Ok(f)
    })
}

/// [`regress`] on a [`Dataset2D`].
pub fn regress_dataset(sigma: f64, prior: &Prob<RealFn>, data: &Dataset2D) -> Meas<RealFn> {
    regress(sigma, prior, data.points.clone())
}

/// Poisson rate of change points in [`piecewise_linear_prior`].
pub const PIECEWISE_RATE: f64 = 0.2;

/// Linear pieces spliced at the points of a rate-0.2 Poisson process.
pub fn piecewise_linear_prior() -> Prob<RealFn> {
    splice_prob(&poisson_pp(PIECEWISE_RATE), &linear_prior())
}

/// Linear mean plus an `rbf(1, 1)` Gaussian process around it.
pub fn gp_with_linear_prior() -> Prob<RealFn> {
    let k = rbf(1.0, 1.0).expect("valid kernel");
    linear_prior().bind(move |f| gp(&f, &k))
}

/// Dirichlet-process clustering: each datum gets a parameter from one draw of
/// `dp(alpha, base)`, and is scored by `likelihood(datum, parameter)`.
pub fn dp_cluster<P, D>(
    alpha: f64,
    base: &Prob<P>,
    likelihood: impl Fn(&D, &P) -> f64 + Send + Sync + 'static,
    data: Vec<D>,
) -> Meas<Vec<(D, P)>>
where
    P: Clone + Send + Sync + 'static,
    D: Clone + Send + Sync + 'static,
{
    let dp = dirichlet_process(alpha, base);
    Meas::block(move |b| {
        let p = b.sample(&dp)?;
        let xs = b.sample(&iid(&p))?;
        let mut tagged = Vec::with_capacity(data.len());
        for (i, d) in data.iter().enumerate() {
            let x = xs.get(i)?;
            b.score(likelihood(d, &x))?;
            tagged.push((d.clone(), x));
        }
        Ok(tagged)
    })
}

/// Known observation noise of [`cluster_demo`].
pub const CLUSTER_NOISE: f64 = 0.5;

/// 1D clustering with base `N(0, 3)` and likelihood `N(d; position, 0.5)`.
pub fn cluster_demo(alpha: f64, data: Vec<f64>) -> Meas<Vec<(f64, f64)>> {
    dp_cluster(
        alpha,
        &normal(0.0, 3.0),
        |d: &f64, p: &f64| normal_pdf(*p, CLUSTER_NOISE, *d).unwrap_or(0.0),
        data,
    )
}

/// Cluster positions through memoization: a DP over uniform labels, with
/// `x` and `y` coordinates attached to labels by memoized `N(0, 3)` draws.
pub fn memoized_cluster_positions(alpha: f64) -> Prob<Prob<(f64, f64)>> {
    let labels = dirichlet_process(alpha, &uniform());
    let coord = memoize_keyed(|_: &f64| normal(0.0, 3.0));
    Prob::block(move |b| {
        let p = b.draw(&labels)?;
        let xpos = b.draw(&coord)?;
        let ypos = b.draw(&coord)?;
        Ok(p.try_map(move |r| Ok((xpos.call(r)?, ypos.call(r)?))))
    })
}

/// Cluster positions from a DP whose base is two independent `N(0, 3)`
/// coordinates.
pub fn dp_positions(alpha: f64) -> Prob<Prob<(f64, f64)>> {
    let base = Prob::block(|b| {
        let x = b.draw(&normal(0.0, 3.0))?;
        let y = b.draw(&normal(0.0, 3.0))?;
        Ok((x, y))
    });
    dirichlet_process(alpha, &base)
}

/// `x ~ Bernoulli(0.5)`, weight 2 if `x` else 1. Posterior `P(x) = 2/3`.
pub fn two_point() -> Meas<bool> {
    Meas::block(|b| {
        let x = b.sample(&bernoulli(0.5))?;
        b.score(if x { 2.0 } else { 1.0 })?;
        Ok(x)
    })
}

/// `theta ~ N(0, 1)` observed once as `d ~ N(theta, 1)`. Posterior
/// `N(d / 2, 1 / sqrt 2)`.
pub fn normal_normal(d: f64) -> Meas<f64> {
    Meas::block(move |b| {
        let theta = b.sample(&normal(0.0, 1.0))?;
        b.score(normal_pdf(theta, 1.0, d)?)?;
        Ok(theta)
    })
}

/// Uniform prior on a coin's bias, then `successes` heads and `failures`
/// tails. Posterior `Beta(1 + successes, 1 + failures)`.
pub fn beta_bernoulli(successes: u32, failures: u32) -> Meas<f64> {
    Meas::block(move |b| {
        let theta = b.sample(&uniform())?;
        for _ in 0..successes {
            b.score(theta)?;
        }
        for _ in 0..failures {
            b.score(1.0 - theta)?;
        }
        Ok(theta)
    })
}

/// A boolean latent whose branches read different numbers of sites:
/// `true` reads one extra normal, `false` reads three. Each extra draw is
/// scored by the standard normal density, and the `false` branch carries an
/// extra weight of 10, so `P(true) = 1 / (1 + 10 / (4 pi))`.
pub fn site_switch() -> Meas<bool> {
    Meas::block(|b| {
        let flag = b.sample(&bernoulli(0.5))?;
        let extra = if flag { 1 } else { 3 };
        for _ in 0..extra {
            let y = b.sample(&normal(0.0, 1.0))?;
            b.score(normal_pdf(0.0, 1.0, y)?)?;
        }
        if !flag {
            b.score(10.0)?;
        }
        Ok(flag)
    })
}

/// Exact posterior probability of `true` under [`site_switch`].
pub fn site_switch_posterior() -> f64 {
    1.0 / (1.0 + 10.0 / (4.0 * std::f64::consts::PI))
}

/// Mode centres of [`bimodal`].
pub const BIMODAL_MODES: (f64, f64) = (-3.0, 3.0);

/// `theta ~ N(0, 3)` weighted by an equal mixture of `N(-3, 0.4)` and
/// `N(3, 0.4)`: a posterior with two well separated modes.
pub fn bimodal() -> Meas<f64> {
    Meas::block(|b| {
        let theta = b.sample(&normal(0.0, 3.0))?;
        let w = 0.5 * normal_pdf(BIMODAL_MODES.0, 0.4, theta)?
            + 0.5 * normal_pdf(BIMODAL_MODES.1, 0.4, theta)?;
        b.score(w)?;
        Ok(theta)
    })
}
