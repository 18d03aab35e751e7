use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use lazyppl::inference::{ChainStats, MhRun};
use lazyppl::tree::derive_seed;
use lazyppl::{mh, Meas, MhConfig};

use crate::catalog::{self, Built, Output};
use crate::config::{Grid, RunConfig};
use crate::diag;
use crate::output::{self, ChainSummary, ColumnSummary, SitesStats, Summary, Table};
use crate::Failure;

/// What one chain produced.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub seed: u64,
    pub table: Table,
    /// Output values per retained sample: scalar outputs, or one function
    /// draw on the grid.
    pub values: Vec<Vec<f64>>,
    pub sites: Vec<usize>,
    pub stats: ChainStats,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub summary_path: PathBuf,
    pub chain_paths: Vec<PathBuf>,
}

/// Seed of chain `c`.
pub fn chain_seed(seed: u64, c: usize) -> u64 {
    derive_seed(seed, c as u64)
}

fn start<A: Clone + 'static>(m: &Meas<A>, cfg: &RunConfig, seed: u64) -> Result<MhRun<A>, Failure> {
    mh(
        m,
        &cfg.kernel,
        MhConfig::new(cfg.steps, cfg.burn_in, cfg.thin, seed),
    )
    .with_context(|| format!("initialising chain with seed {seed}"))
    .map_err(Failure::Runtime)
}

fn run_scalar(
    m: &Meas<Vec<f64>>,
    names: &[&str],
    cfg: &RunConfig,
    seed: u64,
) -> Result<ChainOutput, Failure> {
    let mut run = start(m, cfg, seed)?;
    let mut columns = vec![
        "step".to_string(),
        "log_weight".into(),
        "sites".into(),
        "accepted".into(),
    ];
    columns.extend(names.iter().map(|n| n.to_string()));
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut sites = Vec::new();
    for s in run.by_ref() {
        let mut row = vec![
            s.step as f64,
            s.log_weight.ln(),
            s.sites as f64,
            f64::from(u8::from(s.accepted)),
        ];
        row.extend_from_slice(&s.value);
        rows.push(row);
        values.push(s.value);
        sites.push(s.sites);
    }
    Ok(ChainOutput {
        seed,
        table: Table { columns, rows },
        values,
        sites,
        stats: run.stats().clone(),
    })
}

/// Emission indices of the retained draws, spread evenly and ending at the
/// last sample.
pub fn draw_indices(emitted: u64, draws: usize) -> Vec<u64> {
    (1..=draws as u64)
        .map(|k| k * emitted / draws as u64 - 1)
        .collect()
}

fn run_function(
    m: &Meas<lazyppl::RealFn>,
    grid: &Grid,
    cfg: &RunConfig,
    seed: u64,
) -> Result<ChainOutput, Failure> {
    let xs = grid.xs();
    let keep = draw_indices(cfg.emitted(), grid.draws);
    let mut run = start(m, cfg, seed)?;
    let mut values = Vec::with_capacity(grid.draws);
    let mut sites = Vec::new();
    let mut next = keep.iter().peekable();
    for (i, s) in run.by_ref().enumerate() {
        sites.push(s.sites);
        if next.peek() == Some(&&(i as u64)) {
            next.next();
            let ys = xs
                .iter()
                .map(|&x| s.value.call(x))
                .collect::<lazyppl::Result<Vec<f64>>>()
                .with_context(|| format!("evaluating draw at step {}", s.step))
                .map_err(Failure::Runtime)?;
            values.push(ys);
        }
    }
    let mut columns = vec!["x".to_string()];
    columns.extend((0..values.len()).map(|d| format!("draw_{d}")));
    let rows = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            std::iter::once(x)
                .chain(values.iter().map(|ys| ys[i]))
                .collect()
        })
        .collect();
    Ok(ChainOutput {
        seed,
        table: Table { columns, rows },
        values,
        sites,
        stats: run.stats().clone(),
    })
}

pub fn run_chain(built: &Built, cfg: &RunConfig, seed: u64) -> Result<ChainOutput, Failure> {
    match (built, cfg.model.output, &cfg.grid) {
        (Built::Scalar(m), Output::Scalar(names), _) => run_scalar(m, names, cfg, seed),
        (Built::Function(m), Output::Function, Some(grid)) => run_function(m, grid, cfg, seed),
        _ => unreachable!("catalog entry and builder disagree"),
    }
}

fn column_summaries(cfg: &RunConfig, chains: &[ChainOutput]) -> Vec<ColumnSummary> {
    let all: Vec<&Vec<f64>> = chains.iter().flat_map(|c| &c.values).collect();
    let width = all.first().map_or(0, |v| v.len());
    let grid_xs = cfg.grid.as_ref().map(Grid::xs);
    (0..width)
        .map(|j| {
            let col: Vec<f64> = all.iter().map(|v| v[j]).collect();
            let (name, x) = match (&grid_xs, cfg.model.output) {
                (Some(xs), _) => (format!("f({})", xs[j]), Some(xs[j])),
                (None, Output::Scalar(names)) => (names[j].to_string(), None),
                (None, Output::Function) => unreachable!(),
            };
            ColumnSummary {
                name,
                x,
                mean: diag::mean(&col),
                sd: diag::sd(&col),
            }
        })
        .collect()
}

pub fn summarize(
    cfg: &RunConfig,
    chains: &[ChainOutput],
    paths: &[PathBuf],
    wall_time_ms: u64,
) -> Summary {
    let steps: u64 = chains.iter().map(|c| c.stats.steps).sum();
    let accepted: u64 = chains.iter().map(|c| c.stats.accepted).sum();
    let sites: Vec<usize> = chains
        .iter()
        .flat_map(|c| c.sites.iter().copied())
        .collect();
    Summary {
        model: cfg.model.id.to_string(),
        kernel: cfg.kernel_label.clone(),
        seed: cfg.seed,
        steps: cfg.steps,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        acceptance_rate: if steps == 0 {
            0.0
        } else {
            accepted as f64 / steps as f64
        },
        n_samples: sites.len() as u64,
        error_count: chains.iter().map(|c| c.stats.errors).sum(),
        psd_warnings: chains.iter().map(|c| c.stats.psd_warnings).sum(),
        wall_time_ms,
        columns: column_summaries(cfg, chains),
        distinct_sites_stats: SitesStats {
            min: sites.iter().copied().min().unwrap_or(0),
            max: sites.iter().copied().max().unwrap_or(0),
            mean: if sites.is_empty() {
                0.0
            } else {
                sites.iter().sum::<usize>() as f64 / sites.len() as f64
            },
        },
        chains: chains
            .iter()
            .zip(paths)
            .map(|(c, p)| ChainSummary {
                file: p
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                seed: c.seed,
                acceptance_rate: c.stats.acceptance_rate(),
                n_samples: c.sites.len() as u64,
                error_count: c.stats.errors,
            })
            .collect(),
    }
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport, Failure> {
    let started = Instant::now();
    let dataset = if cfg.model.uses_dataset {
        Some(catalog::load_dataset(cfg.dataset.as_deref()).map_err(Failure::Config)?)
    } else {
        None
    };
    let built = catalog::build(cfg.model, dataset.as_ref());
    let outputs: Vec<Result<ChainOutput, Failure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| {
                let built = &built;
                scope.spawn(move || run_chain(built, cfg, chain_seed(cfg.seed, c)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Failure::runtime("chain thread panicked")))
            })
            .collect()
    });
    let chains = outputs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let chain_paths: Vec<PathBuf> = (0..cfg.chains)
        .map(|c| output::chain_path(&cfg.output, cfg.format, cfg.chains, c))
        .collect();
    for (chain, path) in chains.iter().zip(&chain_paths) {
        std::fs::write(path, chain.table.render(cfg.format))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Runtime)?;
    }
    let wall = started.elapsed().as_millis() as u64;
    let summary = summarize(cfg, &chains, &chain_paths, wall);
    let summary_path = output::summary_path(&cfg.output);
    let mut text =
        serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.into()))?;
    text.push('\n');
    std::fs::write(&summary_path, text)
        .with_context(|| format!("writing {}", summary_path.display()))
        .map_err(Failure::Runtime)?;
    Ok(RunReport {
        summary,
        summary_path,
        chain_paths,
    })
}
