//! Growth in `k` of the double integral of the membership probability.
//!
//! For the uniform density on `[0,1]^d` and `x0` at the origin, estimates
//!
//! `Q(k) = n ∫ ( n ∫ 1{y in Rect(0,x)} psi(n |x|, k)^alpha dx )^t dy`
//!
//! where `|x|` is the volume of `Rect(0, x)`, and fits the slope of
//! `log Q(k)` against `log k`. Both integrals are sampled in logarithmic
//! coordinates `x_j = exp(-b_j)`, where the mass of the integrand sits near
//! the origin; the outer variable is truncated to `y_j >= exp(-S)` with
//! `S = ln n + 10`, which drops a relative contribution of order `e^{-10}`.
//! The same draws are reused for every `k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stabilization::poisson_cdf_psi;
use crate::rng::SeedSpec;

use super::stats::{mean, ols, std_error, variance};

const BATCHES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundPlan {
    pub dim: usize,
    pub ks: Vec<usize>,
    pub t: f64,
    pub alpha: f64,
    pub n: f64,
    pub outer: usize,
    pub inner: usize,
    pub seed: u64,
}

impl LowerBoundPlan {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        for (name, v) in [("t", self.t), ("alpha", self.alpha), ("n", self.n)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidParameter("k grid must be nonempty and positive".into()));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k as f64 > 2.0 * self.n) {
            return Err(Error::InvalidParameter(format!(
                "k = {k} exceeds 2n = {}; the lower bound needs k <= 2n",
                2.0 * self.n
            )));
        }
        if self.outer < 2 * BATCHES || self.inner == 0 {
            return Err(Error::InvalidParameter(format!(
                "need at least {} outer and 1 inner samples",
                2 * BATCHES
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundFit {
    pub ks: Vec<usize>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Least-squares slope of `ln Q` on `ln k`.
    pub exponent: f64,
    /// Batch-means standard error of the slope.
    pub exponent_se: f64,
}

struct Draws {
    /// Per outer draw: `n * weight(y)`.
    outer_weight: Vec<f64>,
    /// Per outer draw, per inner draw: `(lambda = n |x|, n * weight(x))`.
    inner: Vec<Vec<(f64, f64)>>,
}

fn draw(plan: &LowerBoundPlan) -> Draws {
    let d = plan.dim;
    let s = plan.n.ln().max(0.0) + 10.0;
    let mut rng = SeedSpec::new(plan.seed, 0).rng();
    let mut outer_weight = Vec::with_capacity(plan.outer);
    let mut inner = Vec::with_capacity(plan.outer);
    let mut a = vec![0.0; d];
    for _ in 0..plan.outer {
        a.iter_mut().for_each(|v| *v = s * rng.random::<f64>());
        let y_vol = (-a.iter().sum::<f64>()).exp();
        outer_weight.push(plan.n * s.powi(d as i32) * y_vol);
        let draws = (0..plan.inner)
            .map(|_| {
                let mut log_vol = 0.0;
                let mut w = plan.n;
                for &aj in &a {
                    let b = aj * rng.random::<f64>();
                    log_vol -= b;
                    w *= aj;
                }
                let vol = log_vol.exp();
                (plan.n * vol, w * vol)
            })
            .collect();
        inner.push(draws);
    }
    Draws { outer_weight, inner }
}

fn outer_terms(plan: &LowerBoundPlan, draws: &Draws, k: usize) -> Vec<f64> {
    draws
        .outer_weight
        .iter()
        .zip(&draws.inner)
        .map(|(wy, inner)| {
            let i_hat = inner
                .iter()
                .map(|&(lambda, wx)| poisson_cdf_psi(lambda, k).powf(plan.alpha) * wx)
                .sum::<f64>()
                / inner.len() as f64;
            wy * i_hat.powf(plan.t)
        })
        .collect()
}

/// Monte Carlo estimates of `Q(k)` over the plan's `k` grid and the fitted
/// exponent. For `t = 1` the estimator is unbiased; otherwise the inner
/// average is plugged into the power, with a bias that shrinks as `inner`
/// grows.
pub fn lower_bound_exponent_fit(plan: &LowerBoundPlan) -> Result<LowerBoundFit> {
    plan.validate()?;
    let draws = draw(plan);
    let terms: Vec<Vec<f64>> = plan.ks.iter().map(|&k| outer_terms(plan, &draws, k)).collect();
    let estimates: Vec<f64> = terms.iter().map(|t| mean(t)).collect();
    let std_errors: Vec<f64> = terms.iter().map(|t| std_error(t)).collect();
    let log_k: Vec<f64> = plan.ks.iter().map(|&k| (k as f64).ln()).collect();
    let (exponent, exponent_se) = if plan.ks.len() >= 2 {
        let fit = ols(&log_k, &estimates.iter().map(|q| q.ln()).collect::<Vec<_>>())?;
        let size = plan.outer / BATCHES;
        let mut slopes = Vec::with_capacity(BATCHES);
        for b in 0..BATCHES {
            let logs: Vec<f64> = terms.iter().map(|t| mean(&t[b * size..(b + 1) * size]).ln()).collect();
            slopes.push(ols(&log_k, &logs)?.slope);
        }
        (fit.slope, (variance(&slopes) / BATCHES as f64).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(LowerBoundFit {
        ks: plan.ks.clone(),
        estimates,
        std_errors,
        exponent,
        exponent_se,
    })
}
