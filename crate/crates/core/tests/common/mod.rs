#![allow(dead_code)]

use ndarray::Array2;
use xnn::model::{init_model, XnnConfig, XnnModel};
use xnn::rng::SeededRng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-5;
pub const FD_ABS_TOL: f64 = 1e-8;
/// Below this magnitude the comparison is absolute.
pub const FD_SCALE_FLOOR: f64 = 1e-6;

/// Largest violation ratio seen in a finite-difference check; `<= 1` passes.
#[derive(Debug, Default, Clone, Copy)]
pub struct FdOutcome {
    pub checked: usize,
    pub worst_ratio: f64,
}

impl FdOutcome {
    pub fn merge(&mut self, other: FdOutcome) {
        self.checked += other.checked;
        self.worst_ratio = self.worst_ratio.max(other.worst_ratio);
    }

    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        let diff = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let ratio = if scale < FD_SCALE_FLOOR {
            diff / FD_ABS_TOL
        } else {
            diff / scale / FD_REL_TOL
        };
        self.worst_ratio = self.worst_ratio.max(ratio);
    }
}

/// A seeded model with every parameter perturbed away from its initial
/// symmetric values (nonzero biases and shift).
pub fn random_model(p: usize, k: usize, hidden: &[usize], seed: u64) -> XnnModel {
    let mut model = init_model(&XnnConfig::new(p, k, hidden).with_seed(seed)).unwrap();
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    let mut params = model.parameters();
    for v in params.iter_mut() {
        *v += rng.uniform(-0.3, 0.3);
    }
    model.set_parameters(&params).unwrap();
    model
}

pub fn random_batch(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = SeededRng::new(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.normal(0.0, 1.0));
    let y = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
    (x, y)
}

/// Central differences of the batch loss against the analytic gradient of
/// every parameter.
pub fn check_parameter_gradients(model: &XnnModel, x: &Array2<f64>, y: &[f64]) -> FdOutcome {
    let (_, grads) = model.gradient(x.view(), y).unwrap();
    let analytic = grads.to_flat();
    let base = model.parameters();
    let mut probe = model.clone();
    let mut outcome = FdOutcome::default();
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + FD_STEP;
        probe.set_parameters(&params).unwrap();
        let (up, _) = probe.gradient(x.view(), y).unwrap();
        params[i] = base[i] - FD_STEP;
        probe.set_parameters(&params).unwrap();
        let (down, _) = probe.gradient(x.view(), y).unwrap();
        params[i] = base[i];
        outcome.record(analytic[i], (up - down) / (2.0 * FD_STEP));
    }
    outcome
}

/// Central differences of the model output against the analytic input partials.
pub fn check_input_partials(model: &XnnModel, x: &[f64]) -> FdOutcome {
    let analytic = model.input_partials(x).unwrap();
    let mut outcome = FdOutcome::default();
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + FD_STEP;
        let (up, _) = model.forward(&probe).unwrap();
        probe[j] = x[j] - FD_STEP;
        let (down, _) = model.forward(&probe).unwrap();
        probe[j] = x[j];
        outcome.record(analytic[j], (up - down) / (2.0 * FD_STEP));
    }
    outcome
}
