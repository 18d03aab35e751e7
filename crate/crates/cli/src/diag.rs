use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

use crate::output::Table;
use crate::Failure;

pub const MAX_LAG: usize = 50;

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Quantiles {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ColumnDiag {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    /// `None` with fewer than two values.
    pub sd: Option<f64>,
    pub quantiles: Quantiles,
    /// Autocorrelation at lags `1..=min(50, n - 1)`; empty for a constant column.
    pub acf: Vec<f64>,
    pub ess: f64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub file: String,
    pub n_rows: usize,
    pub columns: Vec<ColumnDiag>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation, `n - 1` denominator.
pub fn sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Autocorrelation of a column with nonzero spread.
struct Acf {
    centred: Vec<f64>,
    denom: f64,
}

impl Acf {
    fn new(xs: &[f64]) -> Option<Self> {
        let m = mean(xs);
        let centred: Vec<f64> = xs.iter().map(|x| x - m).collect();
        let denom: f64 = centred.iter().map(|c| c * c).sum();
        (denom > 0.0).then_some(Acf { centred, denom })
    }

    fn at(&self, lag: usize) -> f64 {
        let c = &self.centred;
        c[..c.len() - lag]
            .iter()
            .zip(&c[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.denom
    }
}

/// Effective sample size from Geyer's initial positive sequence: sums of
/// adjacent autocorrelation pairs are accumulated while they stay positive.
/// Antithetic columns can exceed `n`; the estimate is capped at `n log10 n`.
pub fn ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    let Some(acf) = Acf::new(xs) else {
        return n as f64;
    };
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = if m == 0 { 1.0 } else { acf.at(2 * m) } + acf.at(2 * m + 1);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        m += 1;
    }
    let cap = n as f64 * (n as f64).log10().max(1.0);
    if tau <= 0.0 {
        cap
    } else {
        (n as f64 / tau).min(cap)
    }
}

pub fn column_diag(name: &str, xs: &[f64]) -> ColumnDiag {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let acf = Acf::new(xs)
        .map(|a| (1..=MAX_LAG.min(xs.len() - 1)).map(|k| a.at(k)).collect())
        .unwrap_or_default();
    ColumnDiag {
        name: name.to_string(),
        n: xs.len(),
        mean: mean(xs),
        sd: sd(xs),
        quantiles: Quantiles {
            p5: quantile(&sorted, 0.05),
            p25: quantile(&sorted, 0.25),
            p50: quantile(&sorted, 0.5),
            p75: quantile(&sorted, 0.75),
            p95: quantile(&sorted, 0.95),
        },
        acf,
        ess: ess(xs),
    }
}

fn read_csv(path: &Path) -> anyhow::Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .with_context(|| format!("row {}: `{f}` is not a number", i + 1))
            })
            .collect::<anyhow::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

pub fn read_table(path: &Path) -> anyhow::Result<Table> {
    let table = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_reader(BufReader::new(File::open(path)?))?
    } else {
        read_csv(path)?
    };
    if table.columns.is_empty() {
        bail!("no columns");
    }
    if table.rows.is_empty() {
        bail!("no rows");
    }
    if let Some(i) = table
        .rows
        .iter()
        .position(|r| r.len() != table.columns.len())
    {
        bail!(
            "row {} has {} fields, header has {}",
            i + 1,
            table.rows[i].len(),
            table.columns.len()
        );
    }
    Ok(table)
}

pub fn diagnose(file: &str, table: &Table) -> Diagnostics {
    let columns = table
        .columns
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let xs: Vec<f64> = table.rows.iter().map(|r| r[j]).collect();
            column_diag(name, &xs)
        })
        .collect();
    Diagnostics {
        file: file.to_string(),
        n_rows: table.rows.len(),
        columns,
    }
}

pub fn cmd_diag(path: &Path) -> Result<Diagnostics, Failure> {
    let table = read_table(path)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Config)?;
    Ok(diagnose(&path.display().to_string(), &table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column() {
        let d = column_diag("c", &[4.0; 30]);
        assert_eq!(d.sd, Some(0.0));
        assert_eq!(d.ess, 30.0);
        assert!(d.acf.is_empty());
        assert_eq!(d.quantiles.p5, 4.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs: Vec<f64> = (0..=100).map(f64::from).collect();
        let d = column_diag("x", &xs);
        assert_eq!(d.quantiles.p25, 25.0);
        assert_eq!(d.quantiles.p95, 95.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(d.mean, 50.0);
    }

    #[test]
    fn ar1_ess_matches_theory() {
        // x_t = phi x_{t-1} + e_t has tau = (1 + phi) / (1 - phi)
        let phi: f64 = 0.8;
        let n = 200_000;
        let mut state = 12345u64;
        let mut x = 0.0;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let mut unif = || {
                state = lazyppl::tree::derive_seed(state, 1);
                ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
            };
            let (u1, u2) = (unif(), unif());
            let e = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            x = phi * x + e;
            xs.push(x);
        }
        let expected = n as f64 * (1.0 - phi) / (1.0 + phi);
        let got = ess(&xs);
        assert!(
            (got / expected - 1.0).abs() < 0.1,
            "ess {got}, expected {expected}"
        );
        let d = column_diag("x", &xs);
        assert_eq!(d.acf.len(), MAX_LAG);
        assert!((d.acf[0] - phi).abs() < 0.01);
        assert!((d.acf[1] - phi * phi).abs() < 0.01);
    }

    #[test]
    fn alternating_series_is_capped() {
        let xs: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(ess(&xs), 200.0);
    }
}
