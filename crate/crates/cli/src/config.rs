use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lazyppl::{irreducible_mix, KernelSpec};

use crate::catalog::{self, ModelInfo, Output};
use crate::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "lazyppl",
    version,
    about = "Run lazyppl models and inspect their samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run an MCMC chain on a bundled model.
    Run(RunArgs),
    /// Print the model catalog.
    List,
    /// Diagnostics for every column of a samples file.
    Diag(DiagArgs),
}

#[derive(Args, Debug)]
pub struct DiagArgs {
    /// Samples file, CSV with a header row or JSON written with `--format json`.
    pub file: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    AllSites,
    SingleSite,
    Mix,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Model id, see `lazyppl list`.
    pub model: String,
    #[arg(long, value_enum, default_value = "all-sites", env = "LAZYPPL_KERNEL")]
    pub kernel: KernelKind,
    /// Per-site resample probability of the all-sites kernel.
    #[arg(long, default_value_t = 0.5, env = "LAZYPPL_P")]
    pub p: f64,
    /// Weight of the resample-everything component in `--kernel mix`.
    #[arg(long, default_value_t = 0.2, env = "LAZYPPL_MIX_R")]
    pub mix_r: f64,
    #[arg(long, default_value_t = 10_000, env = "LAZYPPL_STEPS")]
    pub steps: u64,
    #[arg(long, default_value_t = 1_000, env = "LAZYPPL_BURN_IN")]
    pub burn_in: u64,
    #[arg(long, default_value_t = 1, env = "LAZYPPL_THIN")]
    pub thin: u64,
    #[arg(long, default_value_t = 0, env = "LAZYPPL_SEED")]
    pub seed: u64,
    /// CSV with header `x,y`; regression models use the bundled data without it.
    #[arg(long, env = "LAZYPPL_DATASET")]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, env = "LAZYPPL_GRID_MIN")]
    pub grid_min: f64,
    #[arg(long, default_value_t = 10.0, env = "LAZYPPL_GRID_MAX")]
    pub grid_max: f64,
    #[arg(long, default_value_t = 101, env = "LAZYPPL_GRID_POINTS")]
    pub grid_points: usize,
    /// Posterior function draws written to the grid file.
    #[arg(long, default_value_t = 20, env = "LAZYPPL_DRAWS")]
    pub draws: usize,
    #[arg(long, default_value = "samples.csv", env = "LAZYPPL_OUTPUT")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "csv", env = "LAZYPPL_FORMAT")]
    pub format: Format,
    /// Independent chains, run in parallel with derived seeds.
    #[arg(long, default_value_t = 1, env = "LAZYPPL_CHAINS")]
    pub chains: usize,
}

/// Grid on which posterior function draws are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub draws: usize,
}

impl Grid {
    pub fn xs(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }
}

/// A validated `run` request.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: &'static ModelInfo,
    pub kernel: KernelSpec,
    pub kernel_label: String,
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    /// Set for function-valued models only.
    pub grid: Option<Grid>,
    pub output: PathBuf,
    pub format: Format,
    pub chains: usize,
}

impl RunConfig {
    pub fn emitted(&self) -> u64 {
        (self.steps - self.burn_in) / self.thin
    }
}

impl RunArgs {
    pub fn into_config(self) -> Result<RunConfig, Failure> {
        let model = catalog::find(&self.model).ok_or_else(|| {
            Failure::config(format!(
                "unknown model `{}`; try `lazyppl list`",
                self.model
            ))
        })?;
        let (kernel, kernel_label) = match self.kernel {
            KernelKind::AllSites => (
                KernelSpec::all_sites(self.p),
                format!("all-sites(p={})", self.p),
            ),
            KernelKind::SingleSite => (Ok(KernelSpec::SingleSite), "single-site".to_string()),
            KernelKind::Mix => (
                irreducible_mix(self.mix_r, self.p),
                format!("mix(r={}, p={})", self.mix_r, self.p),
            ),
        };
        let kernel = kernel.map_err(|e| Failure::config(format!("kernel: {e}")))?;
        if self.burn_in >= self.steps {
            return Err(Failure::config(format!(
                "steps ({}) must exceed burn-in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Failure::config("thin must be at least 1"));
        }
        if (self.steps - self.burn_in) / self.thin == 0 {
            return Err(Failure::config(
                "no samples would be emitted; lower --thin or --burn-in",
            ));
        }
        if self.chains == 0 {
            return Err(Failure::config("chains must be at least 1"));
        }
        if self.dataset.is_some() && !model.uses_dataset {
            return Err(Failure::config(format!(
                "model `{}` takes no dataset",
                model.id
            )));
        }
        let grid = match model.output {
            Output::Function => {
                if self.grid_points < 2 {
                    return Err(Failure::config("grid-points must be at least 2"));
                }
                if !(self.grid_min.is_finite()
                    && self.grid_max.is_finite()
                    && self.grid_min < self.grid_max)
                {
                    return Err(Failure::config(
                        "grid-min must be below grid-max, both finite",
                    ));
                }
                if self.draws == 0 {
                    return Err(Failure::config("draws must be at least 1"));
                }
                let emitted = (self.steps - self.burn_in) / self.thin;
                if self.draws as u64 > emitted {
                    return Err(Failure::config(format!(
                        "{} draws requested but the chain emits only {emitted} samples",
                        self.draws
                    )));
                }
                Some(Grid {
                    min: self.grid_min,
                    max: self.grid_max,
                    points: self.grid_points,
                    draws: self.draws,
                })
            }
            Output::Scalar(_) => None,
        };
        Ok(RunConfig {
            model,
            kernel,
            kernel_label,
            steps: self.steps,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            dataset: self.dataset,
            grid,
            output: self.output,
            format: self.format,
            chains: self.chains,
        })
    }
}
