use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Format;

/// Column-named rows of numbers; the shape of every samples file.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Comma separated, `\n` line ends, shortest round-trip float text.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                write!(s, "{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => {
                let mut s = serde_json::to_string(self).expect("finite table");
                s.push('\n');
                s
            }
        }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub name: String,
    /// Grid location, for function-valued models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct SitesStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub file: String,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub n_samples: u64,
    pub error_count: u64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Summary {
    pub model: String,
    pub kernel: String,
    pub seed: u64,
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub acceptance_rate: f64,
    pub n_samples: u64,
    pub error_count: u64,
    pub psd_warnings: u64,
    pub wall_time_ms: u64,
    pub columns: Vec<ColumnSummary>,
    pub distinct_sites_stats: SitesStats,
    pub chains: Vec<ChainSummary>,
}

fn stem(output: &Path) -> String {
    output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "samples".to_string())
}

/// Samples file of chain `c`: the output path itself for a single chain,
/// `<stem>.chain<c>.<ext>` otherwise.
pub fn chain_path(output: &Path, format: Format, chains: usize, c: usize) -> PathBuf {
    if chains == 1 {
        output.to_path_buf()
    } else {
        output.with_file_name(format!("{}.chain{c}.{}", stem(output), format.extension()))
    }
}

pub fn summary_path(output: &Path) -> PathBuf {
    output.with_file_name(format!("{}.summary.json", stem(output)))
}
