//! Distilling an arbitrary base model into an xNN from its predictions.
//!
//! The base model is never called. The caller supplies probe features and the
//! base model's predictions at those probes, and the student is fitted to the
//! predictions as if they were the response.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, XnnError};
use crate::model::{XnnConfig, XnnModel};
use crate::train::{fit, split_indices, FitReport, TrainConfig};

/// Column holding base-model predictions in a probe file.
pub const BASE_PREDICTION_COLUMN: &str = "base_prediction";

/// Agreement between the surrogate and the base model on the holdout probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub surrogate_mse: f64,
    /// `1 - surrogate_mse / var(base predictions)`, with population variance.
    pub r_squared: f64,
    pub n_probe: usize,
}

/// `1 - mse / variance`. A constant target scores 1 when it is matched
/// exactly and 0 otherwise.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> f64 {
    let n = targets.len().max(1) as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let mse = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    if var > 0.0 {
        1.0 - mse / var
    } else if mse == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Fidelity of `model` to `base_predictions` on the given rows of the probe set.
pub fn fidelity(
    model: &XnnModel,
    probe_features: &Array2<f64>,
    base_predictions: &[f64],
    rows: &[usize],
) -> Result<FidelityReport> {
    let x = Array2::from_shape_fn((rows.len(), probe_features.ncols()), |(i, j)| {
        probe_features[[rows[i], j]]
    });
    let targets: Vec<f64> = rows.iter().map(|&r| base_predictions[r]).collect();
    let pred = model.predict_batch(x.view(), true)?;
    let surrogate_mse = crate::train::mse(&pred, Array1::from(targets.clone()).view());
    Ok(FidelityReport {
        surrogate_mse,
        r_squared: r_squared(&pred, &targets),
        n_probe: rows.len(),
    })
}

/// Fits a surrogate xNN to base-model predictions and measures its fidelity
/// on the holdout split used during fitting (the training split when there is
/// no holdout).
pub fn distill(
    probe_features: &Array2<f64>,
    base_predictions: &[f64],
    xcfg: &XnnConfig,
    tcfg: &TrainConfig,
) -> Result<(XnnModel, FidelityReport, FitReport)> {
    let n = probe_features.nrows();
    if base_predictions.len() != n {
        return Err(XnnError::dimension("base predictions", n, base_predictions.len()));
    }
    if n < 2 {
        return Err(XnnError::Argument("distillation needs at least two probes".into()));
    }
    let data = Dataset::from_arrays(
        probe_features.clone(),
        Array1::from(base_predictions.to_vec()),
        BASE_PREDICTION_COLUMN,
    )?;
    let (model, report) = fit(&data, xcfg, tcfg)?;
    let (train, holdout) = split_indices(n, tcfg.holdout_fraction, tcfg.shuffle_seed);
    let rows = if holdout.is_empty() { train } else { holdout };
    let fidelity = fidelity(&model, probe_features, base_predictions, &rows)?;
    Ok((model, fidelity, report))
}
