//! Loading portfolio models from JSON files.
//!
//! Schema (all fields required unless noted):
//!
//! ```json
//! {
//!   "dimension": 4,
//!   "mixing": {"type": "gig", "lambda": -1.689, "chi": 1.380, "psi": 4.509e-5},
//!   "mu":    [0.1, 0.2, 0.3, 0.4],
//!   "gamma": [0.0, 0.0, 0.0, 0.0],
//!   "sigma": [[1.0, 0.0, 0.0, 0.0], ...],
//!   "labels": ["BA", "AXP", "XOM", "CVX"]
//! }
//! ```
//!
//! `mixing.type` is `"gig"` (fields `lambda`, `chi`, `psi`) or
//! `"degenerate"` (field `theta0`). `sigma` is row-major. `labels` is
//! optional and defaults to `X1..Xn`.
//!
//! JSON syntax and type errors surface as [`Error::Parse`] with the file
//! position; schema and model violations surface as [`Error::InvalidModel`]
//! naming the offending field.

use crate::error::{Error, Result};
use crate::mixing::MixingModel;
use crate::nmvm::MultivariateNmvm;
use nalgebra::DMatrix;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    dimension: usize,
    mixing: MixingSpec,
    mu: Vec<f64>,
    gamma: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum MixingSpec {
    Gig { lambda: f64, chi: f64, psi: f64 },
    Degenerate { theta0: f64 },
}

/// A validated model together with its component labels.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: MultivariateNmvm,
    pub labels: Vec<String>,
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read model file {}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::InvalidModel(msg) => Error::InvalidModel(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates model-file text.
pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let n = file.dimension;
    if n == 0 {
        return Err(Error::InvalidModel(
            "field `dimension` must be at least 1".into(),
        ));
    }
    check_length("mu", file.mu.len(), n)?;
    check_length("gamma", file.gamma.len(), n)?;
    check_length("sigma (rows)", file.sigma.len(), n)?;
    for (i, row) in file.sigma.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidModel(format!(
                "field `sigma` row {i} has {} entries, expected dimension {n}",
                row.len()
            )));
        }
    }
    let labels = match file.labels {
        Some(labels) => {
            check_length("labels", labels.len(), n)?;
            for (i, label) in labels.iter().enumerate() {
                if label.is_empty() {
                    return Err(Error::InvalidModel(format!(
                        "field `labels` entry {i} is empty"
                    )));
                }
                if label.contains([',', '"', '\n', '\r']) {
                    return Err(Error::InvalidModel(format!(
                        "field `labels` entry {i} ({label:?}) contains characters \
                         that would corrupt CSV output"
                    )));
                }
            }
            let mut seen = std::collections::HashSet::new();
            for label in &labels {
                if !seen.insert(label) {
                    return Err(Error::InvalidModel(format!(
                        "field `labels` contains duplicate {label:?}"
                    )));
                }
            }
            labels
        }
        None => (1..=n).map(|i| format!("X{i}")).collect(),
    };
    let mixing = match file.mixing {
        MixingSpec::Gig { lambda, chi, psi } => MixingModel::gig(lambda, chi, psi)?,
        MixingSpec::Degenerate { theta0 } => MixingModel::degenerate(theta0)?,
    };
    let flat: Vec<f64> = file.sigma.iter().flatten().copied().collect();
    let sigma = DMatrix::from_row_slice(n, n, &flat);
    let model = MultivariateNmvm::new(file.mu, file.gamma, sigma, mixing)?;
    Ok(LoadedModel { model, labels })
}

fn check_length(field: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::InvalidModel(format!(
            "field `{field}` has {got} entries, expected dimension {expected}"
        )));
    }
    Ok(())
}
