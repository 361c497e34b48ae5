//! Fitting an xNN: standardization, the holdout split, adaptive-moment
//! mini-batch updates and L1 shrinkage of the projection and combination
//! weights.
//!
//! The L1 penalty `lambda_beta |beta|_1 + lambda_gamma |gamma|_1` never enters
//! the gradient. After every adaptive-moment update the two penalized groups go
//! through a soft-threshold, which leaves exact zeros behind. `mu` and all
//! subnetwork weights and biases are never shrunk.

mod standardize;

pub use standardize::{standardize_fit, StandardizationParams};

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, XnnError};
use crate::explain;
use crate::model::{init_model, ForwardCache, Gradients, XnnConfig, XnnModel};
use crate::rng::SeededRng;

pub(crate) use standardize::mse;

/// How the soft-threshold is scaled for each coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxScaling {
    /// Threshold `learning_rate * lambda` for every coordinate.
    Uniform,
    /// Threshold `learning_rate * lambda / (sqrt(v_hat) + eps)`, the proximal
    /// step in the metric the adaptive update itself uses.
    Preconditioned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// L1 strength on the projection coefficients.
    pub lambda_beta: f64,
    /// L1 strength on the ridge-function weights.
    pub lambda_gamma: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Share of rows held out for early stopping, in `[0, 1)`.
    pub holdout_fraction: f64,
    /// Epochs without holdout improvement before stopping.
    pub patience: usize,
    pub shuffle_seed: u64,
    pub prox_scaling: ProxScaling,
    /// Epochs at the start of a fit during which no shrinkage is applied.
    pub penalty_warmup_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 2000,
            lambda_beta: 1e-3,
            lambda_gamma: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            holdout_fraction: 0.2,
            patience: 100,
            shuffle_seed: 0,
            prox_scaling: ProxScaling::Preconditioned,
            penalty_warmup_epochs: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(XnnError::Config(msg.to_owned()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be positive");
        }
        if !(self.lambda_beta.is_finite() && self.lambda_beta >= 0.0) {
            return fail("lambda_beta must be nonnegative");
        }
        if !(self.lambda_gamma.is_finite() && self.lambda_gamma >= 0.0) {
            return fail("lambda_gamma must be nonnegative");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            return fail("adam_beta1 must lie in (0, 1)");
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return fail("adam_beta2 must lie in (0, 1)");
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return fail("adam_eps must be positive");
        }
        if !(self.holdout_fraction >= 0.0 && self.holdout_fraction < 1.0) {
            return fail("holdout_fraction must lie in [0, 1)");
        }
        if self.patience == 0 {
            return fail("patience must be positive");
        }
        Ok(())
    }
}

/// Element-wise soft-threshold `sign(v) * max(|v| - threshold, 0)`.
pub fn l1_proximal_step(values: &[f64], threshold: f64) -> Vec<f64> {
    values.iter().map(|&v| soft_threshold(v, threshold)).collect()
}

#[inline]
pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    let shrunk = v.abs() - threshold;
    if shrunk > 0.0 {
        shrunk.copysign(v)
    } else {
        0.0
    }
}

/// First and second moment estimates, one entry per flat parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &XnnModel) -> Self {
        let n = model.param_layout().subnets.end;
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// Reusable buffers for repeated training steps.
pub struct TrainWorkspace {
    cache: ForwardCache,
    grads: Gradients,
    flat_grads: Vec<f64>,
    flat_params: Vec<f64>,
}

impl TrainWorkspace {
    pub fn new(model: &XnnModel) -> Self {
        Self {
            cache: model.new_cache(),
            grads: Gradients::zeros_like(model),
            flat_grads: Vec::new(),
            flat_params: Vec::new(),
        }
    }
}

/// Position of a step inside a fit, reported on divergence.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepIndex {
    pub epoch: usize,
    pub batch: usize,
}

/// One update on a standardized batch: an adaptive-moment step on every
/// parameter followed by soft-thresholding of the betas and gammas.
/// Returns the batch loss before the update.
pub fn train_step(
    model: &mut XnnModel,
    state: &mut AdamState,
    x: ArrayView2<f64>,
    y: &[f64],
    config: &TrainConfig,
) -> Result<f64> {
    if x.nrows() == 0 || y.len() != x.nrows() {
        return Err(XnnError::dimension("batch response length", x.nrows(), y.len()));
    }
    if x.ncols() != model.input_dim() {
        return Err(XnnError::dimension("feature columns", model.input_dim(), x.ncols()));
    }
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let mut ws = TrainWorkspace::new(model);
    let index = StepIndex {
        epoch: 0,
        batch: state.step as usize,
    };
    step_rows(model, state, &mut ws, x, y, &rows, config, index, true)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn step_rows(
    model: &mut XnnModel,
    state: &mut AdamState,
    ws: &mut TrainWorkspace,
    x: ArrayView2<f64>,
    y: &[f64],
    rows: &[usize],
    config: &TrainConfig,
    index: StepIndex,
    penalize: bool,
) -> Result<f64> {
    let diverged = |path: String| XnnError::Divergence {
        epoch: index.epoch,
        batch: index.batch,
        path,
    };
    let loss = match model.gradient_rows(x, y, rows, &mut ws.cache, &mut ws.grads) {
        Ok(loss) => loss,
        Err(XnnError::NonFinite { path }) => return Err(diverged(path)),
        Err(e) => return Err(e),
    };
    ws.grads.write_flat(&mut ws.flat_grads);
    model.write_parameters(&mut ws.flat_params);

    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let bias1 = 1.0 - b1.powf(state.step as f64);
    let bias2 = 1.0 - b2.powf(state.step as f64);
    let lr = config.learning_rate;
    for (((theta, g), m), v) in ws
        .flat_params
        .iter_mut()
        .zip(&ws.flat_grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *theta -= lr * m_hat / (v_hat.sqrt() + config.adam_eps);
    }

    let layout = model.param_layout();
    for (range, lambda) in [
        (layout.betas, config.lambda_beta),
        (layout.gammas, config.lambda_gamma),
    ] {
        if lambda == 0.0 || !penalize {
            continue;
        }
        let base = lr * lambda;
        for i in range {
            let threshold = match config.prox_scaling {
                ProxScaling::Uniform => base,
                ProxScaling::Preconditioned => {
                    base / ((state.v[i] / bias2).sqrt() + config.adam_eps)
                }
            };
            ws.flat_params[i] = soft_threshold(ws.flat_params[i], threshold);
        }
    }

    if let Some(i) = ws.flat_params.iter().position(|p| !p.is_finite()) {
        return Err(diverged(model.param_path(i)));
    }
    model.set_parameters(&ws.flat_params)?;
    Ok(loss)
}

/// Outcome of a fit. Losses are mean squared errors in raw response units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs_run: usize,
    /// Mean mini-batch loss of each epoch.
    pub train_loss_history: Vec<f64>,
    /// Holdout MSE after each epoch (training-split MSE when there is no holdout).
    pub holdout_loss_history: Vec<f64>,
    /// Holdout MSE of the returned model, the minimum of the history.
    pub final_holdout_mse: f64,
    /// Training-split MSE of the returned model.
    pub final_train_mse: f64,
    /// Zero-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub active_subnet_count: usize,
    pub nonzero_beta_count: usize,
    pub n_train: usize,
    pub n_holdout: usize,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Seeded shuffle of `0..n` split into `(train, holdout)` rows, with the
/// holdout taking `round(n * fraction)` rows.
pub fn split_indices(n: usize, holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = SeededRng::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng.inner_mut());
    let n_holdout = ((n as f64) * holdout_fraction).round() as usize;
    let train = order.split_off(n_holdout.min(n));
    (train, order)
}

/// Raw-unit MSE of a model on selected rows of a standardized dataset whose
/// raw response is `raw_y`.
fn eval_mse(
    model: &XnnModel,
    params: &StandardizationParams,
    x: ArrayView2<f64>,
    raw_y: &[f64],
    rows: &[usize],
    cache: &mut ForwardCache,
) -> f64 {
    let mut buf = vec![0.0; x.ncols()];
    let mut sse = 0.0;
    for &r in rows {
        buf.iter_mut().zip(x.row(r)).for_each(|(b, v)| *b = *v);
        let pred = params.destandardize_response(model.forward_with(&buf, cache));
        let e = pred - raw_y[r];
        sse += e * e;
    }
    sse / rows.len().max(1) as f64
}

/// Fits an xNN to raw data.
///
/// The data are standardized, a seeded holdout split is taken, and epochs of
/// shuffled mini-batches run until `max_epochs` or until the holdout MSE has
/// not improved for `patience` epochs. The parameters of the best holdout
/// epoch are returned.
pub fn fit(data: &Dataset, xcfg: &XnnConfig, tcfg: &TrainConfig) -> Result<(XnnModel, FitReport)> {
    tcfg.validate()?;
    xcfg.validate()?;
    if xcfg.input_dim != data.n_features() {
        return Err(XnnError::dimension(
            "input_dim versus dataset features",
            data.n_features(),
            xcfg.input_dim,
        ));
    }
    let (std_data, params) = standardize_fit(data)?;
    let (train_rows, holdout_rows) =
        split_indices(data.n_rows(), tcfg.holdout_fraction, tcfg.shuffle_seed);
    if train_rows.is_empty() {
        return Err(XnnError::Config("training split is empty".into()));
    }
    let eval_rows = if holdout_rows.is_empty() {
        &train_rows
    } else {
        &holdout_rows
    };

    let mut model = init_model(xcfg)?;
    model.standardization = Some(params.clone());
    let mut state = AdamState::new(&model);
    let mut ws = TrainWorkspace::new(&model);
    let mut eval_cache = model.new_cache();

    let x = std_data.features.view();
    let y_std = std_data.response.as_slice().expect("owned response is contiguous");
    let y_raw = data.response.to_vec();
    let response_var = params.response_std * params.response_std;

    let mut shuffle_rng = SeededRng::new(tcfg.shuffle_seed.wrapping_add(1));
    let mut order = train_rows.clone();
    let mut train_history = Vec::new();
    let mut holdout_history = Vec::new();
    let mut best: Option<(f64, usize, XnnModel)> = None;
    let mut since_best = 0;

    for epoch in 0..tcfg.max_epochs {
        order.shuffle(shuffle_rng.inner_mut());
        let mut loss_sum = 0.0;
        let mut batches = 0;
        let penalize = epoch >= tcfg.penalty_warmup_epochs;
        if epoch > 0 && epoch == tcfg.penalty_warmup_epochs {
            // Unpenalized epochs never compete with penalized ones.
            best = None;
            since_best = 0;
        }
        for (batch, rows) in order.chunks(tcfg.batch_size).enumerate() {
            let index = StepIndex { epoch, batch };
            loss_sum +=
                step_rows(&mut model, &mut state, &mut ws, x, y_std, rows, tcfg, index, penalize)?;
            batches += 1;
        }
        train_history.push(response_var * loss_sum / batches as f64);
        let eval = eval_mse(&model, &params, x, &y_raw, eval_rows, &mut eval_cache);
        holdout_history.push(eval);

        let improved = best.as_ref().map_or(true, |(b, _, _)| eval < *b);
        if improved {
            best = Some((eval, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tcfg.patience {
                break;
            }
        }
    }

    let (final_holdout_mse, best_epoch, best_model) = best.expect("at least one epoch ran");
    let final_train_mse = eval_mse(&best_model, &params, x, &y_raw, &train_rows, &mut eval_cache);
    let train_x = std_data.select_rows(&train_rows).features;
    let active = explain::active_subnets(&best_model, train_x.view(), explain::DEFAULT_ACTIVE_THRESHOLD);
    let nonzero_beta_count = best_model
        .betas
        .iter()
        .filter(|b| b.abs() > explain::DEFAULT_ZERO_TOL)
        .count();

    let report = FitReport {
        epochs_run: train_history.len(),
        train_loss_history: train_history,
        holdout_loss_history: holdout_history,
        final_holdout_mse,
        final_train_mse,
        best_epoch,
        active_subnet_count: active.len(),
        nonzero_beta_count,
        n_train: train_rows.len(),
        n_holdout: holdout_rows.len(),
    };
    Ok((best_model, report))
}
