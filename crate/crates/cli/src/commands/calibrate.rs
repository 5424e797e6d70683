//! `calibrate`: fit the chosen calibrators on the calibration split and
//! write calibrated test predictions.

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use serde::Serialize;

use swcal::metrics::{accuracy, brier};

use crate::config::RunConfig;
use crate::pipeline::{load_dataset, prepare_trial, resolve_model, run_calibrators};
use crate::report::{write_calibrated_csv, write_json, Provenance};

#[derive(Serialize)]
struct CalibratorSummary {
    brier: f64,
    accuracy: f64,
    output_csv: String,
}

#[derive(Serialize)]
struct CalibrateSummary {
    provenance: Provenance,
    model: String,
    cal_size: usize,
    n_test: usize,
    uncalibrated: CalibratorSummary,
    calibrators: BTreeMap<String, CalibratorSummary>,
    mean_hh: Option<f64>,
}

pub fn cmd_calibrate(config: &RunConfig) -> Result<()> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let ds = load_dataset(config)?;
    let oracle = resolve_model(config)?;
    let trial = 0;
    let data = prepare_trial(config, &ds, &oracle, trial)?;

    // the largest configured calibration size (or the whole pool)
    let subsets = data.calibration_subsets(config, trial)?;
    let (cal_size, cal, cal_probs) = subsets.into_iter().last().expect("at least one subset");

    let cell = run_calibrators(config, trial, cal_size, &cal, &cal_probs, &data.test, &data.test_probs)?;

    let labels = data.test.labels();
    let uncal_csv = config.out_dir.join("calibrated_uncal.csv");
    write_calibrated_csv(&uncal_csv, data.test.ids(), &data.test_probs, None)?;
    let uncalibrated = CalibratorSummary {
        brier: brier(&data.test_probs, labels)?,
        accuracy: accuracy(&data.test_probs, labels)?,
        output_csv: uncal_csv.display().to_string(),
    };

    let mut calibrators = BTreeMap::new();
    for (name, probs) in &cell.calibrated {
        let path = config.out_dir.join(format!("calibrated_{name}.csv"));
        let supports = if name == "swc" || name == "swc-hh" {
            cell.supports.as_deref()
        } else {
            None
        };
        write_calibrated_csv(&path, data.test.ids(), probs, supports)?;
        calibrators.insert(
            name.clone(),
            CalibratorSummary {
                brier: brier(probs, labels)?,
                accuracy: accuracy(probs, labels)?,
                output_csv: path.display().to_string(),
            },
        );
    }

    let summary = CalibrateSummary {
        provenance: Provenance::new(config),
        model: oracle.name(),
        cal_size,
        n_test: data.test.len(),
        uncalibrated,
        calibrators,
        mean_hh: cell.mean_hh,
    };
    write_json(&config.out_dir.join("calibrate_summary.json"), &summary)?;
    eprintln!(
        "calibrated {} test items with {} calibrator(s); summary in {}",
        data.test.len(),
        cell.calibrated.len(),
        config.out_dir.join("calibrate_summary.json").display()
    );
    Ok(())
}
