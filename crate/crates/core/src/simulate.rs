//! Seeded generators for the three simulation studies.
//!
//! Every generator is a pure function of `(n, seed)`. Features are drawn
//! i.i.d. Uniform[-1, 1] row by row; additive noise, where present, is drawn
//! after the row's features.

use ndarray::{Array1, Array2};

use crate::dataset::{default_feature_names, Dataset};
use crate::error::{Result, XnnError};
use crate::rng::SeededRng;

/// Sample size used when a caller does not pick one.
pub const DEFAULT_N: usize = 10_000;

/// Standard deviation of the interaction study's noise.
pub const INTERACTION_NOISE_SD: f64 = 0.05;

/// Standard deviation of the nonlinear study's noise.
pub const NONLINEAR_NOISE_SD: f64 = 0.1;

/// The first three Legendre polynomials on `[-1, 1]`.
pub fn legendre(k: usize, x: f64) -> Result<f64> {
    match k {
        1 => Ok(x),
        2 => Ok(0.5 * (3.0 * x * x - 1.0)),
        3 => Ok(0.5 * (5.0 * x * x * x - 3.0 * x)),
        _ => Err(XnnError::Argument(format!(
            "Legendre index must be 1, 2 or 3, got {k}"
        ))),
    }
}

fn p1(x: f64) -> f64 {
    x
}

fn p2(x: f64) -> f64 {
    0.5 * (3.0 * x * x - 1.0)
}

fn p3(x: f64) -> f64 {
    0.5 * (5.0 * x * x * x - 3.0 * x)
}

/// `P1(x1) + P2(x2) + P3(x3)`; features 4 and 5 are ignored.
pub fn legendre_surface(x: &[f64]) -> f64 {
    p1(x[0]) + p2(x[1]) + p3(x[2])
}

/// Noiseless mean of the interaction study: `0.5 x1 + 0.5 x2^2 + 0.5 x3 x4 + 0.3 x5^2`.
pub fn interaction_surface(x: &[f64]) -> f64 {
    0.5 * x[0] + 0.5 * x[1] * x[1] + 0.5 * x[2] * x[3] + 0.3 * x[4] * x[4]
}

/// Noiseless mean of the nonlinear study: `exp(x1) sin(x2)`.
pub fn nonlinear_surface(x: &[f64]) -> f64 {
    x[0].exp() * x[1].sin()
}

/// Returns `(x * y, c (a x + b y)^2 - c (a x - b y)^2)` with `c = 1 / (4ab)`.
///
/// The two agree for any `ab != 0`, which is how a product of two features
/// can be written as a sum of two quadratic ridge functions.
pub fn quad_identity(a: f64, b: f64, x: f64, y: f64) -> Result<(f64, f64)> {
    if a * b == 0.0 {
        return Err(XnnError::Argument("quad_identity needs a * b != 0".into()));
    }
    let c = 1.0 / (4.0 * a * b);
    let plus = a * x + b * y;
    let minus = a * x - b * y;
    Ok((x * y, c * plus * plus - c * minus * minus))
}

fn generate(
    n: usize,
    p: usize,
    seed: u64,
    noise_sd: f64,
    tag: &str,
    surface: fn(&[f64]) -> f64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(XnnError::Argument("sample size must be at least 1".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut features = Array2::zeros((n, p));
    let mut response = Array1::zeros(n);
    let mut row = vec![0.0; p];
    for i in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rng.uniform(-1.0, 1.0);
            features[[i, j]] = *v;
        }
        let noise = if noise_sd > 0.0 {
            rng.normal(0.0, noise_sd)
        } else {
            0.0
        };
        response[i] = surface(&row) + noise;
    }
    Dataset::new(features, response, default_feature_names(p), tag)
}

/// Five features; `y = P1(x1) + P2(x2) + P3(x3)` without noise.
pub fn gen_legendre(n: usize, seed: u64) -> Result<Dataset> {
    generate(n, 5, seed, 0.0, "legendre", legendre_surface)
}

/// Six features; `y = interaction_surface(x) + N(0, 0.05^2)`.
pub fn gen_interaction(n: usize, seed: u64) -> Result<Dataset> {
    generate(n, 6, seed, INTERACTION_NOISE_SD, "interaction", interaction_surface)
}

/// Four features; `y = exp(x1) sin(x2) + N(0, 0.1^2)`.
pub fn gen_nonlinear(n: usize, seed: u64) -> Result<Dataset> {
    generate(n, 4, seed, NONLINEAR_NOISE_SD, "nonlinear", nonlinear_surface)
}

/// Generator lookup by name, as used on the command line.
pub fn generate_named(name: &str, n: usize, seed: u64) -> Result<Dataset> {
    match name {
        "legendre" => gen_legendre(n, seed),
        "interaction" => gen_interaction(n, seed),
        "nonlinear" => gen_nonlinear(n, seed),
        other => Err(XnnError::Argument(format!(
            "unknown generator `{other}` (expected legendre, interaction or nonlinear)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn variance(v: &[f64]) -> f64 {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn column(data: &Dataset, j: usize) -> Vec<f64> {
        data.features.column(j).to_vec()
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre(2, 0.0).unwrap(), -0.5);
        assert_eq!(legendre(1, 0.7).unwrap(), 0.7);
        assert_eq!(legendre(3, 1.0).unwrap(), 1.0);
        assert_eq!(legendre(3, -1.0).unwrap(), -1.0);
        assert!(legendre(0, 0.5).is_err());
        assert!(legendre(4, 0.5).is_err());
    }

    #[test]
    fn legendre_at_origin() {
        assert_eq!(legendre_surface(&[0.0, 0.0, 0.0, 0.9, -0.4]), -0.5);
    }

    #[test]
    fn legendre_dataset_properties() {
        let data = gen_legendre(DEFAULT_N, 11).unwrap();
        assert_eq!(data.n_features(), 5);
        let y = data.response.to_vec();
        // Var(y) = 1/3 + 1/5 + 1/7 on Uniform[-1, 1].
        let sd = (1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0_f64).sqrt();
        assert!(mean(&y).abs() <= 3.0 * sd / (y.len() as f64).sqrt());
        for j in [3, 4] {
            assert!(correlation(&column(&data, j), &y).abs() <= 0.05);
        }
        for (row, yi) in data.features.rows().into_iter().zip(&y) {
            assert_eq!(legendre_surface(row.as_slice().unwrap()), *yi);
        }
    }

    #[test]
    fn interaction_surface_at_ones() {
        assert!((interaction_surface(&[1.0; 6]) - 1.8).abs() < 1e-15);
    }

    #[test]
    fn interaction_noise_and_null_feature() {
        let data = gen_interaction(DEFAULT_N, 5).unwrap();
        assert_eq!(data.n_features(), 6);
        let residuals: Vec<f64> = data
            .features
            .rows()
            .into_iter()
            .zip(data.response.iter())
            .map(|(row, y)| y - interaction_surface(row.as_slice().unwrap()))
            .collect();
        // Sampling sd of the variance estimate is 0.0025 * sqrt(2 / n) = 3.5e-5.
        assert!((variance(&residuals) - 0.0025).abs() < 2e-4, "{}", variance(&residuals));

        let x6 = column(&data, 5);
        let y = data.response.to_vec();
        let (mx, my) = (mean(&x6), mean(&y));
        let slope = x6.iter().zip(&y).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / x6.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope.abs() <= 0.02, "slope {slope}");
    }

    #[test]
    fn nonlinear_surface_values() {
        assert_eq!(nonlinear_surface(&[0.0, 0.0, 0.3, 0.1]), 0.0);
        // e * sin(0.5), evaluated independently.
        let expected = std::f64::consts::E * 0.479_425_538_604_203;
        assert!((nonlinear_surface(&[1.0, 0.5, 0.0, 0.0]) - expected).abs() < 1e-12);
        assert!((expected - 1.303_214).abs() < 1e-6);
    }

    #[test]
    fn nonlinear_noise_variance() {
        let data = gen_nonlinear(DEFAULT_N, 8).unwrap();
        assert_eq!(data.n_features(), 4);
        let residuals: Vec<f64> = data
            .features
            .rows()
            .into_iter()
            .zip(data.response.iter())
            .map(|(row, y)| y - nonlinear_surface(row.as_slice().unwrap()))
            .collect();
        assert!((variance(&residuals) - 0.01).abs() < 8e-4);
    }

    #[test]
    fn generators_are_deterministic() {
        for name in ["legendre", "interaction", "nonlinear"] {
            let a = generate_named(name, 500, 3).unwrap();
            let b = generate_named(name, 500, 3).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, generate_named(name, 500, 4).unwrap());
        }
        assert!(generate_named("friedman", 10, 1).is_err());
        assert!(gen_legendre(0, 1).is_err());
    }

    #[test]
    fn feature_marginals_are_uniform() {
        let n = DEFAULT_N;
        let data = gen_interaction(n, 21).unwrap();
        let tolerance = 5.0 * (n as f64).sqrt();
        for j in 0..data.n_features() {
            let mut bins = [0usize; 10];
            for &v in data.features.column(j) {
                assert!((-1.0..=1.0).contains(&v));
                let b = (((v + 1.0) / 2.0) * 10.0).floor() as usize;
                bins[b.min(9)] += 1;
            }
            for count in bins {
                assert!((count as f64 - n as f64 / 10.0).abs() <= tolerance);
            }
        }
    }

    #[test]
    fn quad_identity_examples() {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let (lhs, rhs) = quad_identity(a, a, 3.0, -2.0).unwrap();
        assert!((lhs + 6.0).abs() < 1e-12 && (rhs + 6.0).abs() < 1e-12);
        assert_eq!(quad_identity(0.6, 0.8, 0.0, 5.0).unwrap(), (0.0, 0.0));
        let (lhs, rhs) = quad_identity(0.6, 0.8, 5.0, 0.0).unwrap();
        assert_eq!(lhs, 0.0);
        assert!(rhs.abs() < 1e-12);
        assert!(quad_identity(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn quad_identity_random_sweep() {
        let mut rng = SeededRng::new(1234);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let quadrant = (rng.unit() * 4.0).floor();
            let angle = rng.uniform(0.05, std::f64::consts::FRAC_PI_2 - 0.05)
                + quadrant * std::f64::consts::FRAC_PI_2;
            let (a, b) = (angle.cos(), angle.sin());
            let (x, y) = (rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
            let (lhs, rhs) = quad_identity(a, b, x, y).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
        assert!(worst <= 1e-10, "worst {worst}");
    }

    proptest! {
        #[test]
        fn quad_identity_holds(angle in 0.05f64..1.52, x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let (lhs, rhs) = quad_identity(angle.cos(), angle.sin(), x, y).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}
