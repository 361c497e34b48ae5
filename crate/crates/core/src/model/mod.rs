//! The xNN itself.
//!
//! A model computes `f(x) = mu + sum_k gamma_k * h_k(beta_k . x)`:
//!
//! - the projection layer holds one coefficient row `beta_k` per ridge function
//!   and has no bias and a linear activation,
//! - each `h_k` is a small fully connected [`Subnetwork`] with scalar input and
//!   scalar output and no connection to any other subnetwork,
//! - the combination layer is a single linear node with weights `gamma_k` whose
//!   bias is the global shift `mu`.
//!
//! Inputs are always in standardized units here; callers holding raw data go
//! through [`XnnModel::predict_batch`] with `raw_units = true`.

mod format;

pub use format::{load_model, read_model, save_model, write_model, SCHEMA_VERSION};

use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, XnnError};
use crate::rng::SeededRng;
use crate::train::StandardizationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(Activation::Linear),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative of the activation written in terms of its output `a`.
    #[inline]
    pub fn derivative_at_output(self, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Architecture and initialization seed of an xNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XnnConfig {
    /// Number of input features `p`.
    pub input_dim: usize,
    /// Number of ridge functions `K`.
    pub num_subnets: usize,
    /// Hidden layer widths of every subnetwork, e.g. `[12, 6]`.
    pub subnet_hidden: Vec<usize>,
    /// Activation of the subnetwork hidden layers.
    pub activation: Activation,
    pub seed: u64,
}

impl XnnConfig {
    pub fn new(input_dim: usize, num_subnets: usize, subnet_hidden: &[usize]) -> Self {
        Self {
            input_dim,
            num_subnets,
            subnet_hidden: subnet_hidden.to_vec(),
            activation: Activation::Tanh,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(XnnError::Config("input_dim must be at least 1".into()));
        }
        if self.num_subnets == 0 {
            return Err(XnnError::Config("num_subnets must be at least 1".into()));
        }
        if let Some(i) = self.subnet_hidden.iter().position(|&w| w == 0) {
            return Err(XnnError::Config(format!(
                "subnet_hidden[{i}] must be at least 1"
            )));
        }
        Ok(())
    }

    /// Layer widths of one subnetwork including the scalar input and output.
    fn subnet_widths(&self) -> Vec<usize> {
        let mut widths = Vec::with_capacity(self.subnet_hidden.len() + 2);
        widths.push(1);
        widths.extend_from_slice(&self.subnet_hidden);
        widths.push(1);
        widths
    }
}

/// Fully connected layer `a = activation(W x + b)` with row-major `W` of shape
/// `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let layer = Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        };
        layer.validate("layer")?;
        Ok(layer)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(XnnError::validation(path, "layer dimensions must be positive"));
        }
        if self.weights.len() != self.in_dim * self.out_dim {
            return Err(XnnError::validation(
                format!("{path}.weights"),
                format!(
                    "expected {} entries for a {}x{} matrix, found {}",
                    self.in_dim * self.out_dim,
                    self.out_dim,
                    self.in_dim,
                    self.weights.len()
                ),
            ));
        }
        if self.bias.len() != self.out_dim {
            return Err(XnnError::validation(
                format!("{path}.bias"),
                format!("expected {} entries, found {}", self.out_dim, self.bias.len()),
            ));
        }
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(XnnError::NonFinite {
                path: format!("{path}.weights[{i}]"),
            });
        }
        if let Some(i) = self.bias.iter().position(|b| !b.is_finite()) {
            return Err(XnnError::NonFinite {
                path: format!("{path}.bias[{i}]"),
            });
        }
        Ok(())
    }

    #[inline]
    fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.in_dim).zip(&self.bias))
        {
            let z = row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x);
            *o = self.activation.apply(z);
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// A univariate network `h: R -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subnetwork {
    pub layers: Vec<DenseLayer>,
}

impl Subnetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let subnet = Self { layers };
        subnet.validate("subnet")?;
        Ok(subnet)
    }

    /// The map `h(t) = t`: a single linear layer with weight 1 and bias 0.
    pub fn identity() -> Self {
        Self {
            layers: vec![DenseLayer {
                in_dim: 1,
                out_dim: 1,
                weights: vec![1.0],
                bias: vec![0.0],
                activation: Activation::Linear,
            }],
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(XnnError::validation(path, "subnetwork has no layers")),
        };
        if first.in_dim != 1 {
            return Err(XnnError::validation(
                format!("{path}.layers[0]"),
                "first layer must take a single input",
            ));
        }
        if last.out_dim != 1 || last.activation != Activation::Linear {
            return Err(XnnError::validation(
                format!("{path}.layers[{}]", self.layers.len() - 1),
                "last layer must have one linear output",
            ));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let lpath = format!("{path}.layers[{l}]");
            layer.validate(&lpath)?;
            if l > 0 && layer.in_dim != self.layers[l - 1].out_dim {
                return Err(XnnError::validation(
                    lpath,
                    format!(
                        "in_dim {} does not match previous out_dim {}",
                        layer.in_dim,
                        self.layers[l - 1].out_dim
                    ),
                ));
            }
        }
        Ok(())
    }

    fn max_width(&self) -> usize {
        self.layers.iter().map(|l| l.out_dim).max().unwrap_or(1).max(1)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn new_cache(&self) -> SubnetCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(vec![0.0]);
        activations.extend(self.layers.iter().map(|l| vec![0.0; l.out_dim]));
        let width = self.max_width();
        SubnetCache {
            activations,
            upstream: vec![0.0; width],
            downstream: vec![0.0; width],
        }
    }

    /// Evaluates `h(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let mut cache = self.new_cache();
        self.forward_cached(t, &mut cache)
    }

    /// Evaluates `h(t)` and `h'(t)` by forward-mode differentiation.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let mut value = vec![t];
        let mut tangent = vec![1.0];
        for layer in &self.layers {
            let mut next_value = vec![0.0; layer.out_dim];
            let mut next_tangent = vec![0.0; layer.out_dim];
            for i in 0..layer.out_dim {
                let row = &layer.weights[i * layer.in_dim..(i + 1) * layer.in_dim];
                let z = layer.bias[i] + row.iter().zip(&value).map(|(w, a)| w * a).sum::<f64>();
                let dz: f64 = row.iter().zip(&tangent).map(|(w, d)| w * d).sum();
                let a = layer.activation.apply(z);
                next_value[i] = a;
                next_tangent[i] = layer.activation.derivative_at_output(a) * dz;
            }
            value = next_value;
            tangent = next_tangent;
        }
        (value[0], tangent[0])
    }

    /// Forward pass storing every layer's output in `cache`.
    pub fn forward_cached(&self, t: f64, cache: &mut SubnetCache) -> f64 {
        cache.activations[0][0] = t;
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.activations.split_at_mut(l + 1);
            layer.forward_into(&done[l], &mut rest[0]);
        }
        cache.activations[self.layers.len()][0]
    }

    /// Reverse pass for a scalar upstream derivative `d_out = dL/dh`.
    ///
    /// Adds the parameter gradients into `grads` and returns `dL/dt`.
    fn backward(&self, cache: &mut SubnetCache, d_out: f64, grads: &mut [LayerGradient]) -> f64 {
        let SubnetCache {
            activations,
            upstream,
            downstream,
        } = cache;
        upstream[0] = d_out;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &activations[l];
            let output = &activations[l + 1];
            let grad = &mut grads[l];
            downstream[..layer.in_dim].iter_mut().for_each(|d| *d = 0.0);
            for i in 0..layer.out_dim {
                let delta = upstream[i] * layer.activation.derivative_at_output(output[i]);
                grad.bias[i] += delta;
                let row = i * layer.in_dim..(i + 1) * layer.in_dim;
                for ((gw, w), (a, d)) in grad.weights[row.clone()]
                    .iter_mut()
                    .zip(&layer.weights[row])
                    .zip(input.iter().zip(downstream.iter_mut()))
                {
                    *gw += delta * a;
                    *d += w * delta;
                }
            }
            std::mem::swap(upstream, downstream);
        }
        upstream[0]
    }
}

/// Per-layer outputs of one subnetwork evaluation plus backward scratch space.
#[derive(Debug, Clone)]
pub struct SubnetCache {
    /// `activations[0]` is the scalar input; `activations[l + 1]` is layer `l`'s output.
    pub activations: Vec<Vec<f64>>,
    upstream: Vec<f64>,
    downstream: Vec<f64>,
}

/// Intermediate values of a forward pass, reusable by [`XnnModel::gradient`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `beta_k . x` for every subnetwork.
    pub projections: Vec<f64>,
    /// `h_k(beta_k . x)` for every subnetwork.
    pub ridge_outputs: Vec<f64>,
    pub subnets: Vec<SubnetCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Loss gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d_mu: f64,
    pub d_betas: Array2<f64>,
    pub d_subnets: Vec<Vec<LayerGradient>>,
    pub d_gammas: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &XnnModel) -> Self {
        Self {
            d_mu: 0.0,
            d_betas: Array2::zeros(model.betas.raw_dim()),
            d_subnets: model
                .subnets
                .iter()
                .map(|s| {
                    s.layers
                        .iter()
                        .map(|l| LayerGradient {
                            weights: vec![0.0; l.weights.len()],
                            bias: vec![0.0; l.bias.len()],
                        })
                        .collect()
                })
                .collect(),
            d_gammas: vec![0.0; model.gammas.len()],
        }
    }

    fn reset(&mut self) {
        self.d_mu = 0.0;
        self.d_betas.fill(0.0);
        self.d_gammas.iter_mut().for_each(|g| *g = 0.0);
        for layer in self.d_subnets.iter_mut().flatten() {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    /// Flattens in the order of [`XnnModel::parameters`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        self.write_flat(&mut flat);
        flat
    }

    pub fn write_flat(&self, flat: &mut Vec<f64>) {
        flat.clear();
        flat.push(self.d_mu);
        flat.extend(self.d_betas.iter().copied());
        flat.extend_from_slice(&self.d_gammas);
        for layer in self.d_subnets.iter().flatten() {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
    }
}

/// Location of the penalized parameter groups inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub mu: usize,
    pub betas: Range<usize>,
    pub gammas: Range<usize>,
    pub subnets: Range<usize>,
}

/// A trained or freshly initialized xNN.
#[derive(Debug, Clone, PartialEq)]
pub struct XnnModel {
    /// Global shift (the combination layer's bias).
    pub mu: f64,
    /// Projection coefficients, one row per subnetwork (`K x p`).
    pub betas: Array2<f64>,
    pub subnets: Vec<Subnetwork>,
    /// Ridge-function weights of the combination layer.
    pub gammas: Vec<f64>,
    /// Set once the model has been fitted to data.
    pub standardization: Option<StandardizationParams>,
    pub config: XnnConfig,
}

/// Builds a model with seeded random parameters.
///
/// `mu = 0`; projection entries are uniform on `[-1/sqrt(p), 1/sqrt(p)]`;
/// subnetwork weights are uniform on `[-sqrt(6/(fan_in+fan_out)), +...]`
/// with zero biases; `gamma_k` are uniform on `[-0.5, 0.5]`.
pub fn init_model(config: &XnnConfig) -> Result<XnnModel> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let (k, p) = (config.num_subnets, config.input_dim);

    let beta_bound = 1.0 / (p as f64).sqrt();
    let betas = Array2::from_shape_fn((k, p), |_| rng.uniform(-beta_bound, beta_bound));

    let widths = config.subnet_widths();
    let subnets = (0..k)
        .map(|_| {
            let layers = widths
                .windows(2)
                .enumerate()
                .map(|(l, pair)| {
                    let (fan_in, fan_out) = (pair[0], pair[1]);
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let weights = (0..fan_in * fan_out)
                        .map(|_| rng.uniform(-bound, bound))
                        .collect();
                    let activation = if l + 2 == widths.len() {
                        Activation::Linear
                    } else {
                        config.activation
                    };
                    DenseLayer {
                        in_dim: fan_in,
                        out_dim: fan_out,
                        weights,
                        bias: vec![0.0; fan_out],
                        activation,
                    }
                })
                .collect();
            Subnetwork { layers }
        })
        .collect();

    let gammas = (0..k).map(|_| rng.uniform(-0.5, 0.5)).collect();

    Ok(XnnModel {
        mu: 0.0,
        betas,
        subnets,
        gammas,
        standardization: None,
        config: config.clone(),
    })
}

impl XnnModel {
    pub fn init(config: &XnnConfig) -> Result<Self> {
        init_model(config)
    }

    pub fn num_subnets(&self) -> usize {
        self.gammas.len()
    }

    pub fn input_dim(&self) -> usize {
        self.betas.ncols()
    }

    /// Checks shapes against the config and that every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let (k, p) = (self.config.num_subnets, self.config.input_dim);
        if self.betas.dim() != (k, p) {
            return Err(XnnError::validation(
                "betas",
                format!("expected shape {k}x{p}, found {:?}", self.betas.dim()),
            ));
        }
        if self.gammas.len() != k {
            return Err(XnnError::validation(
                "gammas",
                format!("expected {k} entries, found {}", self.gammas.len()),
            ));
        }
        if self.subnets.len() != k {
            return Err(XnnError::validation(
                "subnets",
                format!("expected {k} subnetworks, found {}", self.subnets.len()),
            ));
        }
        for (i, subnet) in self.subnets.iter().enumerate() {
            subnet.validate(&format!("subnets[{i}]"))?;
        }
        if let Some(std) = &self.standardization {
            std.validate(p)?;
        }
        if let Some(path) = self.first_non_finite() {
            return Err(XnnError::NonFinite { path });
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(XnnError::dimension("input vector", self.input_dim(), x.len()));
        }
        Ok(())
    }

    pub fn new_cache(&self) -> ForwardCache {
        ForwardCache {
            projections: vec![0.0; self.num_subnets()],
            ridge_outputs: vec![0.0; self.num_subnets()],
            subnets: self.subnets.iter().map(Subnetwork::new_cache).collect(),
        }
    }

    /// Evaluates the model at a standardized input, returning the prediction
    /// and the per-subnetwork intermediate values.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        self.check_input(x)?;
        let mut cache = self.new_cache();
        let y = self.forward_with(x, &mut cache);
        Ok((y, cache))
    }

    /// Forward pass into a caller-owned cache. `x.len()` must equal `p`.
    pub fn forward_with(&self, x: &[f64], cache: &mut ForwardCache) -> f64 {
        let mut y = self.mu;
        for (k, subnet) in self.subnets.iter().enumerate() {
            let z: f64 = self
                .betas
                .row(k)
                .iter()
                .zip(x)
                .map(|(b, xi)| b * xi)
                .sum();
            let h = subnet.forward_cached(z, &mut cache.subnets[k]);
            cache.projections[k] = z;
            cache.ridge_outputs[k] = h;
            y += self.gammas[k] * h;
        }
        y
    }

    /// `gamma_k * h_k(t)`, the scaled ridge function of subnetwork `k`.
    pub fn ridge_value(&self, k: usize, t: f64) -> f64 {
        self.gammas[k] * self.subnets[k].eval(t)
    }

    /// Predicts every row of `x`.
    ///
    /// With `raw_units` the rows are standardized with the stored parameters
    /// and the outputs are mapped back to raw response units.
    pub fn predict_batch(&self, x: ArrayView2<f64>, raw_units: bool) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(XnnError::dimension("feature columns", self.input_dim(), x.ncols()));
        }
        let standardization = match (raw_units, &self.standardization) {
            (false, _) => None,
            (true, Some(s)) => Some(s),
            (true, None) => {
                return Err(XnnError::Config(
                    "raw-unit prediction needs standardization parameters".into(),
                ))
            }
        };
        let mut cache = self.new_cache();
        let mut row_buf = vec![0.0; self.input_dim()];
        let out = x
            .rows()
            .into_iter()
            .map(|row| match standardization {
                Some(s) => {
                    s.standardize_row_into(row, &mut row_buf);
                    s.destandardize_response(self.forward_with(&row_buf, &mut cache))
                }
                None => {
                    row_buf.iter_mut().zip(row).for_each(|(b, v)| *b = *v);
                    self.forward_with(&row_buf, &mut cache)
                }
            })
            .collect();
        Ok(out)
    }

    /// Mean squared error over a batch and its exact gradient with respect to
    /// every parameter. Penalty terms are not included.
    pub fn gradient(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<(f64, Gradients)> {
        if x.nrows() == 0 {
            return Err(XnnError::Argument("gradient needs at least one sample".into()));
        }
        if x.ncols() != self.input_dim() {
            return Err(XnnError::dimension("feature columns", self.input_dim(), x.ncols()));
        }
        if y.len() != x.nrows() {
            return Err(XnnError::dimension("response length", x.nrows(), y.len()));
        }
        let mut cache = self.new_cache();
        let mut grads = Gradients::zeros_like(self);
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let loss = self.gradient_rows(x, y, &rows, &mut cache, &mut grads)?;
        Ok((loss, grads))
    }

    /// Gradient over the selected `rows`, overwriting `grads`.
    pub(crate) fn gradient_rows(
        &self,
        x: ArrayView2<f64>,
        y: &[f64],
        rows: &[usize],
        cache: &mut ForwardCache,
        grads: &mut Gradients,
    ) -> Result<f64> {
        grads.reset();
        let scale = 1.0 / rows.len() as f64;
        let p = self.input_dim();
        let mut xbuf = vec![0.0; p];
        let mut sse = 0.0;
        for &r in rows {
            xbuf.iter_mut().zip(x.row(r)).for_each(|(b, v)| *b = *v);
            let y_hat = self.forward_with(&xbuf, cache);
            let residual = y_hat - y[r];
            sse += residual * residual;
            let d_yhat = 2.0 * residual * scale;
            grads.d_mu += d_yhat;
            for k in 0..self.num_subnets() {
                grads.d_gammas[k] += d_yhat * cache.ridge_outputs[k];
                let d_h = d_yhat * self.gammas[k];
                let d_z = self.subnets[k].backward(&mut cache.subnets[k], d_h, &mut grads.d_subnets[k]);
                let mut d_beta = grads.d_betas.row_mut(k);
                for (db, xi) in d_beta.iter_mut().zip(&xbuf) {
                    *db += d_z * xi;
                }
            }
        }
        let loss = sse * scale;
        if !loss.is_finite() {
            return Err(XnnError::NonFinite { path: "loss".into() });
        }
        let mut flat = Vec::new();
        grads.write_flat(&mut flat);
        if let Some(i) = flat.iter().position(|g| !g.is_finite()) {
            return Err(XnnError::NonFinite {
                path: format!("gradient of {}", self.param_path(i)),
            });
        }
        Ok(loss)
    }

    /// Analytic input partials `df/dx_j = sum_k gamma_k h_k'(beta_k . x) beta_kj`.
    pub fn input_partials(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut partials = vec![0.0; self.input_dim()];
        for (k, subnet) in self.subnets.iter().enumerate() {
            let beta = self.betas.row(k);
            let z: f64 = beta.iter().zip(x).map(|(b, xi)| b * xi).sum();
            let (_, dh) = subnet.eval_with_derivative(z);
            let scale = self.gammas[k] * dh;
            for (d, b) in partials.iter_mut().zip(beta.iter()) {
                *d += scale * b;
            }
        }
        Ok(partials)
    }

    pub fn param_layout(&self) -> ParamLayout {
        let betas = 1..1 + self.betas.len();
        let gammas = betas.end..betas.end + self.gammas.len();
        let subnet_count: usize = self.subnets.iter().map(Subnetwork::param_count).sum();
        ParamLayout {
            mu: 0,
            subnets: gammas.end..gammas.end + subnet_count,
            betas,
            gammas,
        }
    }

    /// All parameters flattened as `[mu, betas (row-major), gammas, subnet
    /// layers (weights then bias, in order)]`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_layout().subnets.end);
        self.write_parameters(&mut flat);
        flat
    }

    pub fn write_parameters(&self, flat: &mut Vec<f64>) {
        flat.clear();
        flat.push(self.mu);
        flat.extend(self.betas.iter().copied());
        flat.extend_from_slice(&self.gammas);
        for layer in self.subnets.iter().flat_map(|s| &s.layers) {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
    }

    /// Inverse of [`XnnModel::parameters`].
    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_layout().subnets.end;
        if flat.len() != expected {
            return Err(XnnError::dimension("parameter vector", expected, flat.len()));
        }
        self.mu = flat[0];
        let mut pos = 1;
        for b in self.betas.iter_mut() {
            *b = flat[pos];
            pos += 1;
        }
        let k = self.gammas.len();
        self.gammas.copy_from_slice(&flat[pos..pos + k]);
        pos += k;
        for layer in self.subnets.iter_mut().flat_map(|s| s.layers.iter_mut()) {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        Ok(())
    }

    /// Human-readable name of the flat parameter at `index`.
    pub fn param_path(&self, index: usize) -> String {
        let layout = self.param_layout();
        let p = self.input_dim();
        if index == layout.mu {
            return "mu".into();
        }
        if layout.betas.contains(&index) {
            let i = index - layout.betas.start;
            return format!("betas[{}][{}]", i / p, i % p);
        }
        if layout.gammas.contains(&index) {
            return format!("gammas[{}]", index - layout.gammas.start);
        }
        let mut pos = layout.subnets.start;
        for (s, subnet) in self.subnets.iter().enumerate() {
            for (l, layer) in subnet.layers.iter().enumerate() {
                if index < pos + layer.weights.len() {
                    return format!("subnets[{s}].layers[{l}].weights[{}]", index - pos);
                }
                pos += layer.weights.len();
                if index < pos + layer.bias.len() {
                    return format!("subnets[{s}].layers[{l}].bias[{}]", index - pos);
                }
                pos += layer.bias.len();
            }
        }
        format!("parameter[{index}]")
    }

    /// Path of the first non-finite parameter, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.parameters()
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| self.param_path(i))
    }
}
