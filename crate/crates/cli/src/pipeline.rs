//! Shared machinery: dataset resolution, per-trial splits, model
//! predictions, and calibrator fitting/application.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};

use swcal::calib_global::{CalibrationMap, GlobalCalibratorKind};
use swcal::dataio::{
    load_dataset_csv, load_predictions_csv, make_moons, nested_calibration_sets, split, Dataset,
    PredictionSet, SplitSpec,
};
use swcal::hh::{build_prob_index, hidden_heterogeneity_batch, mean_hh, HhEntry, HhParams};
use swcal::model::{Classifier, TrainedModel};
use swcal::prob::ProbMatrix;
use swcal::refmodels::{fit_gnb, fit_logit};
use swcal::rng::derive_seed;
use swcal::simcalib::{
    build_similarity_model, calibration_support_batch, sba_calibrate, swc_calibrate_batch,
    swc_hh_calibrate_batch,
};
use swcal::trees::{fit_forest, fit_tree, MaxFeatures, TreeParams};

use crate::config::{BuiltinModel, CalibratorKind, DataSource, ModelSource, RunConfig};

/// Trees in the built-in random-forest reference classifier.
pub const RF_REFERENCE_TREES: usize = 200;

/// `min_samples_leaf` of the built-in decision-tree reference classifier.
pub const DT_MIN_SAMPLES_LEAF: usize = 10;

/// Loads or synthesizes the full dataset named by the config.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    match &config.data {
        DataSource::Moons { n, noise } => {
            let seed = derive_seed(config.seed, "moons", 0);
            Ok(make_moons(*n, *noise, seed)?)
        }
        DataSource::Csv { path, label_column } => load_dataset_csv(path, label_column)
            .with_context(|| format!("loading dataset {}", path.display())),
    }
}

/// The prediction source, resolved once per run.
pub enum ModelOracle {
    Builtin(BuiltinModel),
    External(PredictionSet),
}

pub fn resolve_model(config: &RunConfig) -> Result<ModelOracle> {
    match &config.model {
        ModelSource::Builtin(kind) => Ok(ModelOracle::Builtin(*kind)),
        ModelSource::Predictions { path } => {
            let preds = load_predictions_csv(path)
                .with_context(|| format!("loading predictions {}", path.display()))?;
            Ok(ModelOracle::External(preds))
        }
    }
}

impl ModelOracle {
    pub fn name(&self) -> String {
        match self {
            ModelOracle::Builtin(kind) => kind.name().to_string(),
            ModelOracle::External(_) => "external".to_string(),
        }
    }
}

/// Fits one of the built-in reference classifiers.
pub fn fit_builtin(kind: BuiltinModel, train: &Dataset, seed: u64) -> Result<TrainedModel> {
    Ok(match kind {
        BuiltinModel::Dt => TrainedModel::DecisionTree(fit_tree(
            train,
            &TreeParams {
                min_samples_leaf: DT_MIN_SAMPLES_LEAF,
                max_features: MaxFeatures::All,
                ccp_alpha: 0.0,
                seed,
            },
        )?),
        BuiltinModel::Rf => TrainedModel::Forest(fit_forest(train, RF_REFERENCE_TREES, seed)?),
        BuiltinModel::Gnb => TrainedModel::GaussianNb(fit_gnb(train)?),
        BuiltinModel::Logit => TrainedModel::LinearLogit(fit_logit(train, 1e-4, 500, 1e-6)?),
    })
}

/// One trial's splits with the model's predictions for them.
pub struct TrialData {
    pub train: Dataset,
    pub test: Dataset,
    pub pool: Dataset,
    pub test_probs: ProbMatrix,
    /// Pool predictions keyed by id, for realignment to nested subsets.
    pub pool_preds: PredictionSet,
}

/// Splits the dataset for one trial and produces predictions for the test
/// set and calibration pool.
pub fn prepare_trial(
    config: &RunConfig,
    ds: &Dataset,
    oracle: &ModelOracle,
    trial: usize,
) -> Result<TrialData> {
    let trial_seed = config.trial_seed(trial);
    let n_pool = ds
        .len()
        .checked_sub(config.n_train + config.n_test)
        .filter(|&p| p > 0)
        .ok_or_else(|| {
            anyhow!(
                "dataset has {} items, need more than n_train {} + n_test {}",
                ds.len(),
                config.n_train,
                config.n_test
            )
        })?;
    if let Some(&max) = config.cal_sizes.last() {
        if max > n_pool {
            bail!("largest calibration size {max} exceeds the pool of {n_pool} items");
        }
    }
    let spec = SplitSpec {
        n_train: config.n_train,
        n_test: config.n_test,
        n_cal_pool: n_pool,
        seed: derive_seed(trial_seed, "split", 0),
    };
    let (train, test, pool) = split(ds, &spec)?;

    let (test_probs, pool_probs) = match oracle {
        ModelOracle::Builtin(kind) => {
            let model = fit_builtin(*kind, &train, derive_seed(trial_seed, kind.name(), 0))
                .with_context(|| format!("fitting model {} (trial {trial})", kind.name()))?;
            (model.predict_matrix(&test)?, model.predict_matrix(&pool)?)
        }
        ModelOracle::External(preds) => (preds.aligned_to(&test)?, preds.aligned_to(&pool)?),
    };
    let pool_preds = PredictionSet {
        ids: pool.ids().to_vec(),
        probs: pool_probs,
    };
    Ok(TrialData { train, test, pool, test_probs, pool_preds })
}

impl TrialData {
    /// Nested calibration subsets (with their predictions) of the pool.
    /// An empty size list yields the whole pool as the single subset.
    pub fn calibration_subsets(
        &self,
        config: &RunConfig,
        trial: usize,
    ) -> Result<Vec<(usize, Dataset, ProbMatrix)>> {
        let trial_seed = config.trial_seed(trial);
        let sizes: Vec<usize> = if config.cal_sizes.is_empty() {
            vec![self.pool.len()]
        } else {
            config.cal_sizes.clone()
        };
        let sets = if sizes == [self.pool.len()] {
            vec![self.pool.clone()]
        } else {
            nested_calibration_sets(&self.pool, &sizes, derive_seed(trial_seed, "nested", 0))?
        };
        sizes
            .into_iter()
            .zip(sets)
            .map(|(size, cal)| {
                let probs = self.pool_preds.aligned_to(&cal)?;
                Ok((size, cal, probs))
            })
            .collect()
    }
}

/// Everything produced by running the configured calibrators on one
/// (trial, calibration subset) cell.
pub struct CellOutput {
    /// Calibrated test predictions per calibrator name.
    pub calibrated: BTreeMap<String, ProbMatrix>,
    /// Per-test-item calibration support (present when a similarity model
    /// was built).
    pub supports: Option<Vec<f64>>,
    /// Per-test-item HH entries (present when SWC-HH ran).
    pub hh_entries: Option<Vec<HhEntry>>,
    pub mean_hh: Option<f64>,
}

/// Fits every configured calibrator on the calibration subset and applies
/// it to the test set.
pub fn run_calibrators(
    config: &RunConfig,
    trial: usize,
    cal_size: usize,
    cal: &Dataset,
    cal_probs: &ProbMatrix,
    test: &Dataset,
    test_probs: &ProbMatrix,
) -> Result<CellOutput> {
    let trial_seed = config.trial_seed(trial);
    let k = cal_probs.n_classes();

    let needs_sim = config.calibrators.iter().any(|c| matches!(c, CalibratorKind::Swc | CalibratorKind::SwcHh));
    let sim_model = if needs_sim {
        Some(build_similarity_model(
            cal,
            cal_probs,
            derive_seed(trial_seed, "rfprox", cal_size as u64),
        )?)
    } else {
        None
    };

    let needs_hh = config.calibrators.iter().any(|c| c.needs_hh());
    let hh_entries = if needs_hh {
        let index = build_prob_index(cal_probs, cal.ids())?;
        let params = HhParams {
            radius: config.radius,
            ..HhParams::new(derive_seed(trial_seed, "hh", cal_size as u64))
        };
        Some(hidden_heterogeneity_batch(&index, test_probs, cal, cal_probs, &params)?)
    } else {
        None
    };

    let mut calibrated = BTreeMap::new();
    for kind in &config.calibrators {
        let probs = match kind {
            CalibratorKind::Platt => {
                if k != 2 {
                    bail!("platt requires a binary problem (K = {k}); use temp instead");
                }
                CalibrationMap::fit(GlobalCalibratorKind::Platt, cal_probs, cal.labels())?
                    .apply_matrix(test_probs)?
            }
            CalibratorKind::Temp => {
                CalibrationMap::fit(GlobalCalibratorKind::Temperature, cal_probs, cal.labels())?
                    .apply_matrix(test_probs)?
            }
            CalibratorKind::Hist => {
                CalibrationMap::fit(GlobalCalibratorKind::Histogram, cal_probs, cal.labels())?
                    .apply_matrix(test_probs)?
            }
            CalibratorKind::Isotonic => {
                CalibrationMap::fit(GlobalCalibratorKind::Isotonic, cal_probs, cal.labels())?
                    .apply_matrix(test_probs)?
            }
            CalibratorKind::Sba10 | CalibratorKind::Sbaw10 => {
                let weighted = matches!(kind, CalibratorKind::Sbaw10);
                let rows: Vec<Vec<f64>> = (0..test.len())
                    .map(|i| {
                        sba_calibrate(cal, cal_probs, test.row(i), test_probs.row(i), 10, weighted)
                    })
                    .collect::<swcal::Result<_>>()?;
                ProbMatrix::from_rows(rows, k)?
            }
            CalibratorKind::Swc => {
                let model = sim_model.as_ref().expect("similarity model built above");
                swc_calibrate_batch(model, test, test_probs)?
            }
            CalibratorKind::SwcHh => {
                let model = sim_model.as_ref().expect("similarity model built above");
                let hh: Vec<f64> = hh_entries
                    .as_ref()
                    .expect("hh computed above")
                    .iter()
                    .map(|e| e.hh)
                    .collect();
                swc_hh_calibrate_batch(model, test, test_probs, &hh)?
            }
        };
        calibrated.insert(kind.name().to_string(), probs);
    }

    let supports = match &sim_model {
        Some(model) => Some(calibration_support_batch(model, test, test_probs)?),
        None => None,
    };
    let mean = match &hh_entries {
        Some(entries) => Some(mean_hh(entries)?),
        None => None,
    };

    Ok(CellOutput {
        calibrated,
        supports,
        hh_entries,
        mean_hh: mean,
    })
}

/// The K-appropriate default calibrator list: the conventional global map
/// (Platt for binary, temperature for multi-class) plus SWC.
pub fn default_calibrators(n_classes: usize) -> Vec<CalibratorKind> {
    if n_classes == 2 {
        vec![CalibratorKind::Platt, CalibratorKind::Swc]
    } else {
        vec![CalibratorKind::Temp, CalibratorKind::Swc]
    }
}
