//! The common probabilistic-classifier interface and the versioned model
//! file envelope.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::prob::ProbMatrix;
use crate::refmodels::{GaussianNb, LinearLogit};
use crate::trees::{BaggedEnsemble, DecisionTree, Forest};

/// A fitted classifier that outputs a probability distribution over classes.
pub trait Classifier {
    fn n_classes(&self) -> usize;

    fn n_features(&self) -> usize;

    /// Probability vector for a single feature row; sums to 1.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Predictions for every row of a dataset, in item order.
    fn predict_matrix(&self, ds: &Dataset) -> Result<ProbMatrix> {
        if ds.n_features() != self.n_features() {
            return Err(Error::invalid(format!(
                "dataset has {} features, model expects {}",
                ds.n_features(),
                self.n_features()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..ds.len())
            .map(|i| self.predict_proba(ds.row(i)))
            .collect::<Result<_>>()?;
        Ok(ProbMatrix::from_rows_unchecked(rows, self.n_classes()))
    }
}

/// Any of the built-in trained models, for serialization and dynamic
/// dispatch in the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    DecisionTree(DecisionTree),
    BaggedEnsemble(BaggedEnsemble),
    Forest(Forest),
    GaussianNb(GaussianNb),
    LinearLogit(LinearLogit),
}

impl Classifier for TrainedModel {
    fn n_classes(&self) -> usize {
        match self {
            TrainedModel::DecisionTree(m) => m.n_classes(),
            TrainedModel::BaggedEnsemble(m) => m.n_classes(),
            TrainedModel::Forest(m) => m.n_classes(),
            TrainedModel::GaussianNb(m) => m.n_classes(),
            TrainedModel::LinearLogit(m) => m.n_classes(),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            TrainedModel::DecisionTree(m) => m.n_features(),
            TrainedModel::BaggedEnsemble(m) => m.n_features(),
            TrainedModel::Forest(m) => m.n_features(),
            TrainedModel::GaussianNb(m) => m.n_features(),
            TrainedModel::LinearLogit(m) => m.n_features(),
        }
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            TrainedModel::DecisionTree(m) => m.predict_proba(x),
            TrainedModel::BaggedEnsemble(m) => m.predict_proba(x),
            TrainedModel::Forest(m) => m.predict_proba(x),
            TrainedModel::GaussianNb(m) => m.predict_proba(x),
            TrainedModel::LinearLogit(m) => m.predict_proba(x),
        }
    }
}

/// Current model file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned JSON envelope for model files. Seeds and hyperparameters are
/// embedded in the model payloads themselves, so a saved file is enough to
/// reproduce the fit.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: TrainedModel,
}

/// Writes a model as versioned JSON.
pub fn save_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Loads a model file, rejecting unknown format versions.
pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported model format version {}",
            file.format_version
        )));
    }
    Ok(file.model)
}
