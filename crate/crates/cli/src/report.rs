//! Report writers. Every JSON artifact carries a schema version and a
//! provenance block (config echo, master seed, artifact version) so a run
//! can be reproduced byte-for-byte from its own output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use swcal::hh::HhEntry;
use swcal::metrics::TrialStats;
use swcal::prob::ProbMatrix;
use swcal::simcalib::SupportHistogram;

use crate::config::RunConfig;

/// Stable top-level schema version of all JSON reports.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub artifact_version: String,
    pub seed: u64,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn float(v: f64) -> String {
    // shortest round-trip representation keeps reports byte-reproducible
    format!("{v}")
}

/// `id,q0,...,q{K-1}[,support]` rows for calibrated test outputs.
pub fn write_calibrated_csv(
    path: &Path,
    ids: &[String],
    probs: &ProbMatrix,
    supports: Option<&[f64]>,
) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let k = probs.n_classes();
    let mut header = String::from("id");
    for c in 0..k {
        header.push_str(&format!(",q{c}"));
    }
    if supports.is_some() {
        header.push_str(",support");
    }
    writeln!(file, "{header}")?;
    for (i, id) in ids.iter().enumerate() {
        let mut line = id.clone();
        for v in probs.row(i) {
            line.push(',');
            line.push_str(&float(*v));
        }
        if let Some(s) = supports {
            line.push(',');
            line.push_str(&float(s[i]));
        }
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// `id,hh,neighborhood_size,brier_f,brier_g` rows.
pub fn write_hh_csv(path: &Path, ids: &[String], entries: &[HhEntry]) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "id,hh,neighborhood_size,brier_f,brier_g")?;
    for (id, e) in ids.iter().zip(entries) {
        writeln!(
            file,
            "{id},{},{},{},{}",
            float(e.hh),
            e.neighborhood_size,
            float(e.brier_f),
            float(e.brier_g)
        )?;
    }
    Ok(())
}

/// `id,support,rotated` rows.
pub fn write_support_csv(path: &Path, ids: &[String], supports: &[f64], rotated: &[bool]) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "id,support,rotated")?;
    for ((id, s), r) in ids.iter().zip(supports).zip(rotated) {
        writeln!(file, "{id},{},{}", float(*s), u8::from(*r))?;
    }
    Ok(())
}

/// `bin_left,bin_right,count_unshifted,count_shifted` rows.
pub fn write_support_histogram_csv(path: &Path, hist: &SupportHistogram) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "bin_left,bin_right,count_unshifted,count_shifted")?;
    for (i, w) in hist.edges.windows(2).enumerate() {
        writeln!(
            file,
            "{},{},{},{}",
            float(w[0]),
            float(w[1]),
            hist.count_unshifted[i],
            hist.count_shifted[i]
        )?;
    }
    Ok(())
}

/// One aggregated benchmark row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub calibrator: String,
    pub cal_size: usize,
    pub brier: TrialStats,
    pub accuracy: TrialStats,
    /// Average of per-trial mean HH values, when the HH diagnostic ran.
    pub mean_hh: Option<f64>,
    /// True when this calibrator's mean Brier is within one standard error
    /// of the best calibrator at the same calibration size.
    pub best_within_1se: bool,
}

/// Full benchmark report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub provenance: Provenance,
    pub model: String,
    pub rows: Vec<BenchRow>,
}

/// Flat CSV view of a benchmark report.
pub fn write_bench_csv(path: &Path, report: &BenchReport) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(
        file,
        "model,calibrator,cal_size,trials,brier_mean,brier_se,accuracy_mean,accuracy_se,mean_hh,best_within_1se,single_trial"
    )?;
    for row in &report.rows {
        writeln!(
            file,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.model,
            row.calibrator,
            row.cal_size,
            row.brier.values.len(),
            float(row.brier.mean),
            float(row.brier.se),
            float(row.accuracy.mean),
            float(row.accuracy.se),
            row.mean_hh.map(float).unwrap_or_default(),
            u8::from(row.best_within_1se),
            u8::from(row.brier.single_trial),
        )?;
    }
    Ok(())
}
