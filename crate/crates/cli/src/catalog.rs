use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use lazyppl::models::{self, Dataset2D};
use lazyppl::{Meas, RealFn};

/// Observation noise for the linear and piecewise regressions.
pub const REGRESSION_SIGMA: f64 = 0.1;
/// Observation noise for the GP regression.
pub const GP_SIGMA: f64 = 0.3;
/// Concentration of the clustering demo.
pub const CLUSTER_ALPHA: f64 = 1.0;
pub const NORMAL_NORMAL_OBS: f64 = 2.0;
pub const COIN_FLIPS: (u32, u32) = (7, 3);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    /// Named real-valued outputs per sample.
    Scalar(&'static [&'static str]),
    /// A random function, written as draws on a grid.
    Function,
}

#[derive(Debug, PartialEq, Eq)]
pub struct ModelInfo {
    pub id: &'static str,
    pub description: &'static str,
    pub inputs: &'static str,
    pub uses_dataset: bool,
    pub output: Output,
}

pub const MODELS: &[ModelInfo] = &[
    ModelInfo {
        id: "two-point",
        description: "fair coin weighted 2 on heads; P(heads) = 2/3",
        inputs: "none",
        uses_dataset: false,
        output: Output::Scalar(&["value"]),
    },
    ModelInfo {
        id: "normal-normal",
        description: "theta ~ N(0,1), one observation 2 ~ N(theta,1); posterior N(1, 0.707)",
        inputs: "none",
        uses_dataset: false,
        output: Output::Scalar(&["theta"]),
    },
    ModelInfo {
        id: "beta-bernoulli",
        description: "uniform coin bias after 7 heads, 3 tails; posterior Beta(8,4)",
        inputs: "none",
        uses_dataset: false,
        output: Output::Scalar(&["theta"]),
    },
    ModelInfo {
        id: "site-switch",
        description: "boolean whose branches read 1 or 3 extra sites; P(true) = 0.557",
        inputs: "none",
        uses_dataset: false,
        output: Output::Scalar(&["value"]),
    },
    ModelInfo {
        id: "bimodal",
        description: "N(0,3) prior weighted toward modes at -3 and 3",
        inputs: "none",
        uses_dataset: false,
        output: Output::Scalar(&["theta"]),
    },
    ModelInfo {
        id: "linear-regression",
        description: "random line, Gaussian noise sd 0.1",
        inputs: "dataset (x,y CSV; bundled if omitted), grid",
        uses_dataset: true,
        output: Output::Function,
    },
    ModelInfo {
        id: "piecewise-regression",
        description: "piecewise-linear function, Poisson change points at rate 0.2, noise sd 0.1",
        inputs: "dataset (x,y CSV; bundled if omitted), grid",
        uses_dataset: true,
        output: Output::Function,
    },
    ModelInfo {
        id: "gp-regression",
        description: "random line plus RBF Gaussian process, noise sd 0.3",
        inputs: "dataset (x,y CSV; bundled if omitted), grid",
        uses_dataset: true,
        output: Output::Function,
    },
    ModelInfo {
        id: "dp-cluster",
        description: "Dirichlet process (alpha 1) mixture of N(mu, 0.5) on 10 bundled points",
        inputs: "none",
        uses_dataset: false,
        output: Output::Scalar(&[
            "clusters", "mu_0", "mu_1", "mu_2", "mu_3", "mu_4", "mu_5", "mu_6", "mu_7", "mu_8",
            "mu_9",
        ]),
    },
];

pub fn find(id: &str) -> Option<&'static ModelInfo> {
    MODELS.iter().find(|m| m.id == id)
}

pub fn cmd_list(out: &mut dyn Write) -> io::Result<()> {
    for m in MODELS {
        writeln!(out, "{}\t{}\tinputs: {}", m.id, m.description, m.inputs)?;
    }
    Ok(())
}

/// A model ready to sample.
#[derive(Clone)]
pub enum Built {
    Scalar(Meas<Vec<f64>>),
    Function(Meas<RealFn>),
}

fn indicator(b: bool) -> Vec<f64> {
    vec![if b { 1.0 } else { 0.0 }]
}

pub fn load_dataset(path: Option<&Path>) -> anyhow::Result<Dataset2D> {
    match path {
        None => Ok(models::bundled_regression_dataset()),
        Some(p) => {
            Dataset2D::from_csv_path(p).with_context(|| format!("reading dataset {}", p.display()))
        }
    }
}

pub fn build(info: &ModelInfo, dataset: Option<&Dataset2D>) -> Built {
    let data = || {
        dataset
            .cloned()
            .unwrap_or_else(models::bundled_regression_dataset)
    };
    match info.id {
        "two-point" => Built::Scalar(models::two_point().map(indicator)),
        "normal-normal" => Built::Scalar(models::normal_normal(NORMAL_NORMAL_OBS).map(|t| vec![t])),
        "beta-bernoulli" => {
            Built::Scalar(models::beta_bernoulli(COIN_FLIPS.0, COIN_FLIPS.1).map(|t| vec![t]))
        }
        "site-switch" => Built::Scalar(models::site_switch().map(indicator)),
        "bimodal" => Built::Scalar(models::bimodal().map(|t| vec![t])),
        "linear-regression" => Built::Function(models::regress_dataset(
            REGRESSION_SIGMA,
            &models::linear_prior(),
            &data(),
        )),
        "piecewise-regression" => Built::Function(models::regress_dataset(
            REGRESSION_SIGMA,
            &models::piecewise_linear_prior(),
            &data(),
        )),
        "gp-regression" => Built::Function(models::regress_dataset(
            GP_SIGMA,
            &models::gp_with_linear_prior(),
            &data(),
        )),
        "dp-cluster" => Built::Scalar(
            models::cluster_demo(CLUSTER_ALPHA, models::bundled_cluster_data()).map(|tagged| {
                let mut distinct: Vec<u64> = tagged.iter().map(|(_, mu)| mu.to_bits()).collect();
                distinct.sort_unstable();
                distinct.dedup();
                let mut row = vec![distinct.len() as f64];
                row.extend(tagged.iter().map(|(_, mu)| *mu));
                row
            }),
        ),
        other => unreachable!("model `{other}` is in the catalog but has no builder"),
    }
}
