//! Command-line flags, the matching config-file layout and their merge.
//!
//! Every flag has a field of the same name in the config section of its
//! subcommand. A flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use degen_core::report::RunReport;
use degen_core::Error;
use serde::{Deserialize, Serialize};

/// Only this variable is read from the environment.
pub const THREADS_ENV: &str = "DEGEN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "degen", version, about = "WL-degenerate point-cloud pairs: generation, testing, certification")]
pub struct Cli {
    /// TOML config file, or a JSON report whose embedded config is replayed.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; overrides the config file and the environment.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a degenerate pair (or a catalog pair), certify it, write XYZ files and a report.
    Generate(GenerateArgs),
    /// Compare two structure files under distance or angular WL refinement.
    WlTest(WlTestArgs),
    /// Draw certified pairs from the construction manifold.
    Sample(SampleArgs),
    /// Check the tensor-model incompatibility on the r+/r- clouds.
    Appendixb(AppendixbArgs),
    /// Lowest RMSE reachable on degenerate pairs from their energies.
    Floor(FloorArgs),
}

macro_rules! merge_fields {
    ($hi:ident, $lo:ident; opt: $($o:ident),*; vec: $($v:ident),*) => {{
        $( if $hi.$o.is_none() { $hi.$o = $lo.$o; } )*
        $( if $hi.$v.is_empty() { $hi.$v = $lo.$v; } )*
        $hi
    }};
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateArgs {
    /// Period along x, Å.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub cy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub cz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub wy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub wz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub vx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub vy: Option<f64>,
    /// Species of the C, W and V classes, e.g. `O,H,H`.
    #[arg(long)]
    pub labels: Option<String>,
    /// Extra W-type pair `y,z[,label]`; repeatable.
    #[arg(long = "extra-w", allow_hyphen_values = true)]
    pub extra_w: Vec<String>,
    /// Extra V-type pair `x,y[,label]`; repeatable.
    #[arg(long = "extra-v", allow_hyphen_values = true)]
    pub extra_v: Vec<String>,
    #[arg(long)]
    pub min_asymmetry: Option<f64>,
    /// Fold onto a ring of P cells.
    #[arg(long)]
    pub fold: Option<usize>,
    /// Extra periods `py,pz`; `-` leaves an axis open.
    #[arg(long)]
    pub periodize: Option<String>,
    /// Emit a builtin catalog pair instead of a constructed one.
    #[arg(long)]
    pub catalog: Option<String>,
    /// Skip certification.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub unchecked: Option<bool>,
    /// Output files `plus.xyz,minus.xyz`; defaults to names inside --out-dir.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Report path; defaults to `report.json` inside --out-dir.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl GenerateArgs {
    pub fn merge(mut self, lo: Self) -> Self {
        merge_fields!(self, lo;
            opt: p, cy, cz, wy, wz, vx, vy, labels, min_asymmetry, fold, periodize, catalog, unchecked, out, out_dir, report;
            vec: extra_w, extra_v)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WlTestArgs {
    /// The two structure files.
    pub files: Vec<PathBuf>,
    /// Neighbors within this radius, Å.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// k nearest neighbors (ties included).
    #[arg(long)]
    pub knn: Option<usize>,
    /// Fully connected graph (finite structures only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full: Option<bool>,
    /// Quantization bin for squared distances, Å².
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Use a shared tolerant codebook with this tolerance instead of bins, Å².
    #[arg(long)]
    pub tol: Option<f64>,
    /// Angular (three-body) refinement.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub angular: Option<bool>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl WlTestArgs {
    pub fn merge(mut self, lo: Self) -> Self {
        merge_fields!(self, lo;
            opt: cutoff, knn, full, bin_width, tol, angular, iters, report;
            vec: files)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with parameter intervals, e.g. `c_z = [0.25, 1.5]`.
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub unchecked: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SampleArgs {
    pub fn merge(mut self, lo: Self) -> Self {
        merge_fields!(self, lo; opt: count, seed, ranges, max_attempts, unchecked, out; vec:)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppendixbArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl AppendixbArgs {
    pub fn merge(mut self, lo: Self) -> Self {
        merge_fields!(self, lo; opt: trials, seed, report; vec:)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloorArgs {
    /// Text file with one `E+ E-` pair per line, eV.
    #[arg(long)]
    pub energies: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl FloorArgs {
    pub fn merge(mut self, lo: Self) -> Self {
        merge_fields!(self, lo; opt: energies, report; vec:)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wl_test: Option<WlTestArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub appendixb: Option<AppendixbArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<FloorArgs>,
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let report: RunReport = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: not a run report: {e}", path.display())))?;
        let cfg = serde_json::from_value(report.config)
            .map_err(|e| Error::InvalidInput(format!("{}: bad embedded config: {e}", path.display())))?;
        return Ok(cfg);
    }
    toml::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
        .with_context(|| "reading config file")
}

/// Flag, then environment, then config file.
pub fn resolve_threads(flag: Option<usize>, file: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{THREADS_ENV}={v} is not a thread count")))?;
            Ok(Some(n))
        }
        _ => Ok(file),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let flags = GenerateArgs {
            p: Some(5.0),
            ..Default::default()
        };
        let file: ConfigFile = toml::from_str("[generate]\np = 4.0\ncz = 0.5\nextra_w = [\"1,2\"]\n").unwrap();
        let merged = flags.merge(file.generate.unwrap());
        assert_eq!(merged.p, Some(5.0));
        assert_eq!(merged.cz, Some(0.5));
        assert_eq!(merged.extra_w, vec!["1,2".to_string()]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ConfigFile>("[generate]\nperiod = 4.0\n").is_err());
    }
}
