use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, XnnError};

/// Per-column location and scale used to move between raw and standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub response_mean: f64,
    pub response_std: f64,
}

impl StandardizationParams {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.means.len() != p {
            return Err(XnnError::validation(
                "means",
                format!("expected {p} entries, found {}", self.means.len()),
            ));
        }
        if self.stds.len() != p {
            return Err(XnnError::validation(
                "stds",
                format!("expected {p} entries, found {}", self.stds.len()),
            ));
        }
        if self.means.iter().any(|m| !m.is_finite()) || !self.response_mean.is_finite() {
            return Err(XnnError::validation("means", "non-finite mean"));
        }
        if let Some(j) = self.stds.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(XnnError::validation(
                "stds",
                format!("entry {j} must be positive and finite"),
            ));
        }
        if !(self.response_std.is_finite() && self.response_std > 0.0) {
            return Err(XnnError::validation(
                "response_std",
                "must be positive and finite",
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn standardize_value(&self, j: usize, v: f64) -> f64 {
        (v - self.means[j]) / self.stds[j]
    }

    #[inline]
    pub fn destandardize_value(&self, j: usize, t: f64) -> f64 {
        self.means[j] + self.stds[j] * t
    }

    #[inline]
    pub fn standardize_response(&self, y: f64) -> f64 {
        (y - self.response_mean) / self.response_std
    }

    #[inline]
    pub fn destandardize_response(&self, v: f64) -> f64 {
        self.response_mean + self.response_std * v
    }

    pub fn standardize_row_into(&self, row: ArrayView1<f64>, out: &mut [f64]) {
        for (j, (o, v)) in out.iter_mut().zip(row.iter()).enumerate() {
            *o = self.standardize_value(j, *v);
        }
    }

    pub fn standardize_features(&self, x: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(x.raw_dim(), |(i, j)| self.standardize_value(j, x[[i, j]]))
    }

    /// Maps a raw dataset to standardized units.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.validate(data.n_features())?;
        Ok(Dataset {
            features: self.standardize_features(data.features.view()),
            response: data.response.mapv(|y| self.standardize_response(y)),
            feature_names: data.feature_names.clone(),
            generator_tag: data.generator_tag.clone(),
        })
    }

    /// Maps a standardized dataset back to raw units.
    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.validate(data.n_features())?;
        let x = &data.features;
        Ok(Dataset {
            features: Array2::from_shape_fn(x.raw_dim(), |(i, j)| {
                self.destandardize_value(j, x[[i, j]])
            }),
            response: data.response.mapv(|v| self.destandardize_response(v)),
            feature_names: data.feature_names.clone(),
            generator_tag: data.generator_tag.clone(),
        })
    }
}

fn mean_and_std(values: ArrayView1<f64>) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.sum() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Centres and scales every feature column and the response to sample mean 0
/// and sample standard deviation 1 (divisor `n - 1`).
///
/// A constant feature column is an error. A constant response is only
/// centred: its scale is left at 1 so that a flat target stays representable.
pub fn standardize_fit(data: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    data.validate()?;
    if data.n_rows() < 2 {
        return Err(XnnError::Argument(
            "standardization needs at least two rows".into(),
        ));
    }
    let mut means = Vec::with_capacity(data.n_features());
    let mut stds = Vec::with_capacity(data.n_features());
    for (j, column) in data.features.columns().into_iter().enumerate() {
        let (m, s) = mean_and_std(column);
        if s == 0.0 || !s.is_finite() {
            return Err(XnnError::Degenerate {
                column: data.feature_names[j].clone(),
            });
        }
        means.push(m);
        stds.push(s);
    }
    let (response_mean, response_std) = mean_and_std(data.response.view());
    let params = StandardizationParams {
        means,
        stds,
        response_mean,
        response_std: if response_std > 0.0 { response_std } else { 1.0 },
    };
    let standardized = params.apply(data)?;
    Ok((standardized, params))
}

pub(crate) fn mse(predictions: &[f64], targets: ArrayView1<f64>) -> f64 {
    let sse: f64 = predictions
        .iter()
        .zip(targets.iter())
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    sse / predictions.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn data(x: Array2<f64>, y: Array1<f64>) -> Dataset {
        Dataset::from_arrays(x, y, "t").unwrap()
    }

    #[test]
    fn two_point_column() {
        let d = data(array![[-1.0], [1.0]], array![0.0, 2.0]);
        let (s, params) = standardize_fit(&d).unwrap();
        assert_eq!(params.means, vec![0.0]);
        assert!((params.stds[0] - 2f64.sqrt()).abs() < 1e-15);
        let col = s.features.column(0).to_vec();
        let mean: f64 = col.iter().sum::<f64>() / 2.0;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
        assert!(mean.abs() < 1e-15);
        assert!((sd - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let d = data(array![[2.0, 1.0], [2.0, 3.0], [2.0, 0.0]], array![1.0, 2.0, 3.0]);
        assert!(matches!(
            standardize_fit(&d),
            Err(XnnError::Degenerate { column }) if column == "x1"
        ));
    }

    #[test]
    fn constant_response_is_centred_only() {
        let d = data(array![[1.0], [2.0], [4.0]], array![5.0, 5.0, 5.0]);
        let (s, params) = standardize_fit(&d).unwrap();
        assert_eq!(params.response_std, 1.0);
        assert!(s.response.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_restores_data() {
        let d = crate::simulate::gen_interaction(500, 4).unwrap();
        let (s, params) = standardize_fit(&d).unwrap();
        for j in 0..s.n_features() {
            let (m, sd) = mean_and_std(s.features.column(j));
            assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        }
        let back = params.invert(&s).unwrap();
        for (a, b) in back.features.iter().zip(d.features.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in back.response.iter().zip(d.response.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn needs_two_rows() {
        let d = data(array![[1.0]], array![1.0]);
        assert!(standardize_fit(&d).is_err());
    }
}
