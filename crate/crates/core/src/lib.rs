//! Similarity-weighted classifier calibration.
//!
//! This crate implements post-hoc calibration of probabilistic classifiers:
//!
//! - **Global maps** (`calib_global`): Platt scaling, temperature scaling,
//!   equal-mass histogram binning, and isotonic regression — one transform
//!   `Φ: Δ_{K-1} → Δ_{K-1}` applied to every prediction.
//! - **Hidden-heterogeneity diagnostic** (`hh`): per-item detection of
//!   subpopulations that receive near-identical predicted probabilities yet
//!   have different true class distributions, scored as the clipped Brier
//!   improvement a locally trained ensemble achieves inside a Hellinger
//!   neighborhood of the prediction simplex.
//! - **Similarity-weighted calibration** (`simcalib`): SWC and SWC-HH,
//!   which replace a prediction with similarity-weighted calibration-set
//!   label frequencies using a random-forest proximity kernel over the
//!   augmented space `[x, p̂]`, plus the SBA-10/SBAW-10 nearest-neighbor
//!   baselines and per-item calibration support for shift detection.
//! - **Supervised machinery** (`trees`): CART decision trees with minimal
//!   cost-complexity pruning, bagged ensembles tuned by out-of-bag Brier
//!   score, and random forests with leaf-proximity queries.
//! - **Reference classifiers** (`refmodels`): Gaussian naive Bayes and a
//!   multinomial logistic model for end-to-end demos.
//! - **Data plumbing** (`dataio`) and **metrics** (`metrics`).
//!
//! All stochastic routines take explicit 64-bit seeds and are deterministic
//! across platforms. With the default `parallel` feature, per-item work is
//! distributed with rayon; the sequential build produces identical results.

pub mod calib_global;
pub mod dataio;
pub mod error;
pub mod hh;
pub mod metrics;
pub mod model;
pub mod prob;
pub mod refmodels;
pub mod rng;
pub mod simcalib;
pub mod trees;

mod par;

pub use error::{Error, Result};
pub use prob::ProbMatrix;
