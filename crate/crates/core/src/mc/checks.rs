//! Moment, bias, variance-floor and concentration checks on replication output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::Model;

use super::replicate::{run_replications, ReplicationPlan};
use super::stats::{mean, quantile, std_error, variance, variance_std_error};

pub const MIN_MOMENT_REPS: usize = 30;
/// Smallest `k` for which the concentration check is meaningful.
pub const MIN_CONCENTRATION_K: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LMoments {
    pub reps: usize,
    pub mean: f64,
    pub se: f64,
    pub var: f64,
    /// `E L / (k log^{d-1} n)`.
    pub ratio: f64,
    pub ratio_se: f64,
    /// `E[1/L]` over replications with a nonempty voting set.
    pub recip_mean: f64,
    pub recip_se: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

pub(crate) fn l_moments_unchecked(sizes: &[usize], n: f64, k: usize, d: usize) -> LMoments {
    let xs: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    let recips: Vec<f64> = sizes.iter().filter(|&&l| l > 0).map(|&l| 1.0 / l as f64).collect();
    let scale = k as f64 * n.ln().powi(d as i32 - 1);
    let (m, se) = (mean(&xs), std_error(&xs));
    LMoments {
        reps: sizes.len(),
        mean: m,
        se,
        var: variance(&xs),
        ratio: m / scale,
        ratio_se: se / scale,
        recip_mean: mean(&recips),
        recip_se: std_error(&recips),
        q05: quantile(&xs, 0.05),
        q50: quantile(&xs, 0.5),
        q95: quantile(&xs, 0.95),
    }
}

/// Moments of the voting-set size `L` from replicated samples.
pub fn estimate_l_moments(sizes: &[usize], n: f64, k: usize, d: usize) -> Result<LMoments> {
    if sizes.len() < MIN_MOMENT_REPS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_MOMENT_REPS} replications, got {}",
            sizes.len()
        )));
    }
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter("dimension and k must be positive".into()));
    }
    Ok(l_moments_unchecked(sizes, n, k, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub n: f64,
    pub k: usize,
    pub x0_index: usize,
    /// `mean prediction - r0(x0)`.
    pub signed: f64,
    pub abs: f64,
    pub se: f64,
}

pub fn bias_from_predictions(predictions: &[f64], target: f64) -> (f64, f64) {
    (mean(predictions) - target, std_error(predictions))
}

/// Bias of the predictor at every `(n, k, x0)` of the plan, against the
/// model's regression function.
pub fn estimate_bias(plan: &ReplicationPlan) -> Result<Vec<BiasEstimate>> {
    let raw = run_replications(plan)?;
    let mut out = Vec::new();
    for cell in &raw.cells {
        for (i, x0) in plan.x0s.iter().enumerate() {
            let (signed, se) = bias_from_predictions(&cell.predictions_of(i), plan.model.regression.r0.eval(x0));
            out.push(BiasEstimate {
                n: cell.n,
                k: cell.k,
                x0_index: i,
                signed,
                abs: signed.abs(),
                se,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceFloor {
    pub var: f64,
    pub var_se: f64,
    /// `sigma^2 / E L`.
    pub floor: f64,
    /// `sigma^2 E[1/L]`, the sharper intermediate bound.
    pub recip_floor: f64,
    /// `var / floor`.
    pub margin: f64,
    pub pass: bool,
}

pub const FLOOR_FACTOR: f64 = 0.9;

/// Compares the empirical variance of uniform-weight predictions with the
/// noise floor `sigma_min^2 / E L`. Passes iff `var >= 0.9 * floor`.
pub fn variance_floor_check(predictions: &[f64], model: &Model, sizes: &[usize]) -> Result<VarianceFloor> {
    if predictions.len() != sizes.len() || predictions.len() < 4 {
        return Err(Error::InvalidParameter("need matching prediction and size samples (at least 4)".into()));
    }
    let sigma2 = model.regression.min_noise_variance(&model.density);
    let xs: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    let recips: Vec<f64> = sizes.iter().filter(|&&l| l > 0).map(|&l| 1.0 / l as f64).collect();
    let var = variance(predictions);
    let floor = if sigma2 == 0.0 { 0.0 } else { sigma2 / mean(&xs) };
    let recip_floor = if sigma2 == 0.0 { 0.0 } else { sigma2 * mean(&recips) };
    Ok(VarianceFloor {
        var,
        var_se: variance_std_error(predictions),
        floor,
        recip_floor,
        margin: if floor > 0.0 { var / floor } else { f64::INFINITY },
        pass: var >= FLOOR_FACTOR * floor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub mean_l: f64,
    /// Empirical `P(L <= E L / 2)`.
    pub fraction: f64,
    pub se: f64,
    /// Set when the check is vacuous (`E L < 2`).
    pub skipped: Option<String>,
}

/// Fraction of replications whose voting set is at most half its mean size.
pub fn concentration_check(sizes: &[usize], k: usize) -> Result<Concentration> {
    if k < MIN_CONCENTRATION_K {
        return Err(Error::InvalidParameter(format!(
            "concentration check needs k >= {MIN_CONCENTRATION_K}, got {k}"
        )));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no replications".into()));
    }
    let xs: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    let mean_l = mean(&xs);
    if mean_l < 2.0 {
        return Ok(Concentration {
            mean_l,
            fraction: f64::NAN,
            se: f64::NAN,
            skipped: Some(format!("mean voting-set size {mean_l:.3} is below 2; check is vacuous")),
        });
    }
    let hits = xs.iter().filter(|&&l| l <= 0.5 * mean_l).count() as f64;
    let n = xs.len() as f64;
    let p = hits / n;
    Ok(Concentration {
        mean_l,
        fraction: p,
        se: (p * (1.0 - p) / n).sqrt(),
        skipped: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{DensitySpec, MeanFunction, NoiseScale, NoiseSpec, RegressionSpec};

    fn model(sigma: f64) -> Model {
        Model::new(
            DensitySpec::unit_cube(2),
            NoiseSpec::Gaussian,
            RegressionSpec::new(MeanFunction::Constant { value: 0.0 }, NoiseScale::Constant { value: sigma }),
        )
    }

    #[test]
    fn moments_of_known_sizes() {
        let sizes: Vec<usize> = (0..40).map(|i| 2 + i % 3).collect();
        let m = estimate_l_moments(&sizes, std::f64::consts::E.powi(2), 2, 2).unwrap();
        assert!((m.mean - sizes.iter().sum::<usize>() as f64 / 40.0).abs() < 1e-14);
        assert!((m.ratio - m.mean / 4.0).abs() < 1e-14);
        assert!(estimate_l_moments(&sizes[..29], 100.0, 1, 2).is_err());
    }

    #[test]
    fn zero_noise_floor_passes() {
        let f = variance_floor_check(&[1.0, 1.0, 1.0, 1.0], &model(0.0), &[1, 2, 3, 4]).unwrap();
        assert_eq!(f.floor, 0.0);
        assert!(f.pass);
    }

    #[test]
    fn floor_uses_mean_size() {
        let f = variance_floor_check(&[0.0, 1.0, 0.0, 1.0], &model(2.0), &[2, 2, 4, 4]).unwrap();
        assert!((f.floor - 4.0 / 3.0).abs() < 1e-14);
        assert!((f.recip_floor - 4.0 * 0.375).abs() < 1e-14);
        assert!(!f.pass);
    }

    #[test]
    fn concentration_contract() {
        assert!(concentration_check(&[20, 30], 10).is_err());
        let c = concentration_check(&[1, 1, 2, 1], 11).unwrap();
        assert!(c.skipped.is_some());
        let c = concentration_check(&[10, 10, 10, 2], 11).unwrap();
        assert_eq!(c.fraction, 0.25);
    }
}
