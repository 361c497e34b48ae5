//! Explanation artifacts of a fitted model: scaled ridge functions with their
//! projection indices, per-feature conditional effects, active-subnetwork
//! detection, interaction signatures and sparsity summaries.
//!
//! Everything here works in standardized units, and every curve reports the
//! product `gamma_i * h_i`, never `h_i` alone, since the two factors are only
//! identifiable together. Subnetwork and feature indices are zero-based.

use std::io::{Read, Write};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XnnError};
use crate::model::XnnModel;
use crate::train::StandardizationParams;

pub const GRID_POINTS: usize = 101;
/// Fraction of the observed projection range added on each side of a ridge grid.
pub const GRID_EXTENSION: f64 = 0.05;
/// Conditional effects are traced over `[-CONDITIONAL_RANGE, CONDITIONAL_RANGE]`.
pub const CONDITIONAL_RANGE: f64 = 2.0;
/// Share of the standardized response scale a ridge function must span to
/// count as active.
pub const DEFAULT_ACTIVE_THRESHOLD: f64 = 0.01;
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeProfile {
    pub subnet_index: usize,
    /// Projection values `t`, strictly increasing.
    pub grid: Vec<f64>,
    /// `gamma_i * h_i(t)` on the grid.
    pub values: Vec<f64>,
    /// The projection index `beta_i`.
    pub projection: Vec<f64>,
    pub active: bool,
}

impl RidgeProfile {
    /// Spread of the scaled ridge function over its grid.
    pub fn range(&self) -> f64 {
        let (lo, hi) = min_max(self.values.iter().copied());
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEffectProfile {
    pub feature_index: usize,
    pub grid: Vec<f64>,
    /// `per_subnet[i][g] = gamma_i * h_i(beta_ij * grid[g])`.
    pub per_subnet: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    /// `beta_ij` for every subnetwork `i`.
    pub coefficients: Vec<f64>,
    /// The global shift, excluded from the curves.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSignature {
    pub subnets: (usize, usize),
    pub features: (usize, usize),
    /// `(beta[s1][f1], beta[s1][f2], beta[s2][f1], beta[s2][f2])`.
    pub coefficients: [f64; 4],
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    /// `(subnet, feature)` pairs with `|beta| > zero_tol`.
    pub nonzero_betas: Vec<(usize, usize)>,
    pub nonzero_gammas: Vec<usize>,
    pub active_subnets: Vec<usize>,
    /// Relative threshold used for the active test.
    pub threshold_used: f64,
    pub zero_tol: f64,
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

fn check_columns(model: &XnnModel, x: ArrayView2<f64>) -> Result<()> {
    if x.ncols() != model.input_dim() {
        return Err(XnnError::dimension("feature columns", model.input_dim(), x.ncols()));
    }
    Ok(())
}

/// Grid over the observed projections `beta_k . x`, or a single point when
/// the projections do not vary.
fn ridge_grid(model: &XnnModel, k: usize, x: ArrayView2<f64>) -> Vec<f64> {
    let beta = model.betas.row(k);
    let (lo, hi) = min_max(x.rows().into_iter().map(|row| beta.dot(&row)));
    if !(hi > lo) {
        let t = if lo.is_finite() { lo } else { 0.0 };
        return vec![t];
    }
    let pad = GRID_EXTENSION * (hi - lo);
    linspace(lo - pad, hi + pad, GRID_POINTS)
}

fn profiles_with_threshold(
    model: &XnnModel,
    x: ArrayView2<f64>,
    rel_threshold: f64,
) -> Result<Vec<RidgeProfile>> {
    check_columns(model, x)?;
    let profiles = (0..model.num_subnets())
        .map(|k| {
            let grid = ridge_grid(model, k, x);
            let values: Vec<f64> = grid.iter().map(|&t| model.ridge_value(k, t)).collect();
            let mut profile = RidgeProfile {
                subnet_index: k,
                grid,
                values,
                projection: model.betas.row(k).to_vec(),
                active: false,
            };
            profile.active = profile.grid.len() > 1 && profile.range() > rel_threshold;
            profile
        })
        .collect();
    Ok(profiles)
}

/// Scaled ridge function of every subnetwork over the projection range seen
/// in `train_x` (standardized features).
pub fn ridge_profiles(model: &XnnModel, train_x: ArrayView2<f64>) -> Result<Vec<RidgeProfile>> {
    profiles_with_threshold(model, train_x, DEFAULT_ACTIVE_THRESHOLD)
}

/// Subnetworks whose scaled ridge function spans more than `rel_threshold`
/// (in units of the standardized response scale) over its profile grid.
///
/// Panics if `train_x` has the wrong number of columns.
pub fn active_subnets(model: &XnnModel, train_x: ArrayView2<f64>, rel_threshold: f64) -> Vec<usize> {
    profiles_with_threshold(model, train_x, rel_threshold)
        .expect("feature count checked by caller")
        .into_iter()
        .filter(|p| p.active)
        .map(|p| p.subnet_index)
        .collect()
}

/// Effect of feature `j` alone, all other standardized features held at 0.
pub fn conditional_effects(model: &XnnModel, j: usize) -> Result<ConditionalEffectProfile> {
    if j >= model.input_dim() {
        return Err(XnnError::Argument(format!(
            "feature index {j} out of range for {} features",
            model.input_dim()
        )));
    }
    let grid = linspace(-CONDITIONAL_RANGE, CONDITIONAL_RANGE, GRID_POINTS);
    let coefficients = model.betas.column(j).to_vec();
    let per_subnet: Vec<Vec<f64>> = coefficients
        .iter()
        .enumerate()
        .map(|(i, &b)| grid.iter().map(|&t| model.ridge_value(i, b * t)).collect())
        .collect();
    let total = (0..grid.len())
        .map(|g| per_subnet.iter().map(|curve| curve[g]).sum())
        .collect();
    Ok(ConditionalEffectProfile {
        feature_index: j,
        grid,
        per_subnet,
        total,
        coefficients,
        mu: model.mu,
    })
}

/// Checks two subnetworks for the pattern `(a, b)` / `(a, -b)` on two
/// features, which is how a sum of quadratic ridge functions encodes a
/// product of the two features.
pub fn interaction_signature(
    model: &XnnModel,
    subnets: (usize, usize),
    features: (usize, usize),
) -> Result<InteractionSignature> {
    let k = model.num_subnets();
    let p = model.input_dim();
    for s in [subnets.0, subnets.1] {
        if s >= k {
            return Err(XnnError::Argument(format!("subnet index {s} out of range for {k}")));
        }
    }
    for f in [features.0, features.1] {
        if f >= p {
            return Err(XnnError::Argument(format!("feature index {f} out of range for {p}")));
        }
    }
    let b = &model.betas;
    let coefficients = [
        b[[subnets.0, features.0]],
        b[[subnets.0, features.1]],
        b[[subnets.1, features.0]],
        b[[subnets.1, features.1]],
    ];
    let comparable = |u: f64, v: f64| {
        let (u, v) = (u.abs(), v.abs());
        u > 0.0 && v > 0.0 && (0.5..=2.0).contains(&(u / v))
    };
    let same = |u: f64, v: f64| u * v > 0.0;
    let [a1, b1, a2, b2] = coefficients;
    let detected = comparable(a1, b1)
        && comparable(a2, b2)
        && ((same(a1, b1) && !same(a2, b2)) || (!same(a1, b1) && same(a2, b2)));
    Ok(InteractionSignature {
        subnets,
        features,
        coefficients,
        detected,
    })
}

/// Nonzero projection and combination weights and the active subnetworks.
pub fn sparsity_report(model: &XnnModel, train_x: ArrayView2<f64>, zero_tol: f64) -> Result<SparsityReport> {
    check_columns(model, train_x)?;
    let nonzero_betas = model
        .betas
        .indexed_iter()
        .filter(|(_, b)| b.abs() > zero_tol)
        .map(|(ij, _)| ij)
        .collect();
    let nonzero_gammas = model
        .gammas
        .iter()
        .enumerate()
        .filter(|(_, g)| g.abs() > zero_tol)
        .map(|(i, _)| i)
        .collect();
    Ok(SparsityReport {
        nonzero_betas,
        nonzero_gammas,
        active_subnets: active_subnets(model, train_x, DEFAULT_ACTIVE_THRESHOLD),
        threshold_used: DEFAULT_ACTIVE_THRESHOLD,
        zero_tol,
    })
}

/// One row of the long-format profile table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    /// `ridge` or `conditional`.
    pub profile_type: String,
    /// Subnetwork index for ridge rows, feature index for conditional rows.
    pub index: usize,
    pub grid_value: f64,
    /// `gamma_h` for ridge rows; `subnet_<i>` or `total` for conditional rows.
    pub series_id: String,
    pub value: f64,
}

/// Flattens profiles into long-format records.
pub fn profile_records(
    ridge: &[RidgeProfile],
    conditional: &[ConditionalEffectProfile],
) -> Vec<ProfileRecord> {
    let mut out = Vec::new();
    for p in ridge {
        for (&t, &v) in p.grid.iter().zip(&p.values) {
            out.push(ProfileRecord {
                profile_type: "ridge".into(),
                index: p.subnet_index,
                grid_value: t,
                series_id: "gamma_h".into(),
                value: v,
            });
        }
    }
    for c in conditional {
        for (i, curve) in c.per_subnet.iter().enumerate() {
            for (&t, &v) in c.grid.iter().zip(curve) {
                out.push(ProfileRecord {
                    profile_type: "conditional".into(),
                    index: c.feature_index,
                    grid_value: t,
                    series_id: format!("subnet_{i}"),
                    value: v,
                });
            }
        }
        for (&t, &v) in c.grid.iter().zip(&c.total) {
            out.push(ProfileRecord {
                profile_type: "conditional".into(),
                index: c.feature_index,
                grid_value: t,
                series_id: "total".into(),
                value: v,
            });
        }
    }
    out
}

pub fn write_profiles_csv<W: Write>(records: &[ProfileRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_profiles_csv<R: Read>(input: R) -> Result<Vec<ProfileRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let records = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(records)
}

/// Parameters needed to rebuild the plotted objects alongside the profile table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationMetadata {
    pub mu: f64,
    pub betas: Vec<Vec<f64>>,
    pub gammas: Vec<f64>,
    pub feature_names: Vec<String>,
    pub standardization: Option<StandardizationParams>,
}

impl ExplanationMetadata {
    pub fn from_model(model: &XnnModel, feature_names: &[String]) -> Self {
        Self {
            mu: model.mu,
            betas: model.betas.rows().into_iter().map(|r| r.to_vec()).collect(),
            gammas: model.gammas.clone(),
            feature_names: feature_names.to_vec(),
            standardization: model.standardization.clone(),
        }
    }

    /// `mu + sum_i gamma_i h_i(beta_i . x)` from the exported coefficients and
    /// the model's ridge functions, at a standardized input.
    pub fn reconstruct(&self, model: &XnnModel, x: &[f64]) -> f64 {
        let mut y = self.mu;
        for (i, (beta, gamma)) in self.betas.iter().zip(&self.gammas).enumerate() {
            let t: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
            y += gamma * model.subnets[i].eval(t);
        }
        y
    }
}
