//! Per-cell summaries of replication output.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::{mix, SeedSpec};

use super::checks::{l_moments_unchecked, LMoments};
use super::distance::{marginal_kolmogorov, multivariate_rect_kolmogorov, DistanceEstimate, MAX_RECT_DIM, MIN_SAMPLES};
use super::replicate::{CellData, RawReplications, ReplicationPlan};
use super::standardize::{covariance, min_eigenvalue, standardize};
use super::stats::{mean, std_error, variance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    /// Grid points per axis for the rectangle distance.
    pub grid: usize,
    /// Bootstrap resamples for the Kolmogorov standard error.
    pub bootstrap: usize,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions { grid: 41, bootstrap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n: f64,
    pub k: usize,
    pub reps: usize,
    pub m: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Smallest eigenvalue of `covariance`, before any ridge.
    pub sigma_min_eig: f64,
    pub ridge: Option<f64>,
    pub l_moments: Vec<LMoments>,
    pub weight_sq_mean: Vec<f64>,
    pub empty_samples: usize,
    /// Largest univariate Kolmogorov distance over the standardized components.
    pub d_k: Option<DistanceEstimate>,
    /// Rectangle-grid distance of the whitened vector.
    pub d_rect: Option<f64>,
    /// `mean - r0(x0)` and its standard error, per component.
    pub bias: Vec<(f64, f64)>,
    /// Why a distance is missing, if one is.
    pub notes: Vec<String>,
}

impl CellSummary {
    pub fn mean_l(&self) -> f64 {
        mean(&self.l_moments.iter().map(|l| l.mean).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryReport {
    pub cells: Vec<CellSummary>,
}

pub fn summarize_cell(
    plan: &ReplicationPlan,
    cell: &CellData,
    index: usize,
    opts: &SummaryOptions,
) -> Result<CellSummary> {
    let reps = cell.reps();
    let m = plan.m();
    let d = plan.model.dim();
    let cov = covariance(&cell.predictions);
    let sigma_min_eig = min_eigenvalue(&cov);
    let mut notes = Vec::new();

    let d_k = if reps >= MIN_SAMPLES {
        let seed = SeedSpec::new(mix(plan.seed, 0xd15_7a9c3), index as u64);
        Some(marginal_kolmogorov(&cell.predictions, opts.bootstrap, seed)?)
    } else {
        notes.push(format!("distance needs at least {MIN_SAMPLES} replications"));
        None
    };
    let d_rect = if reps < MIN_SAMPLES {
        None
    } else if m > MAX_RECT_DIM {
        notes.push(format!("rectangle distance limited to {MAX_RECT_DIM} components"));
        None
    } else {
        match standardize(&cell.predictions, &cov) {
            Ok(z) => Some(multivariate_rect_kolmogorov(&z.rows, opts.grid)?),
            Err(e @ Error::SingularCovariance { .. }) => {
                notes.push(e.to_string());
                None
            }
            Err(e) => return Err(e),
        }
    };
    let ridge = standardize(&cell.predictions, &cov).ok().and_then(|z| z.ridge);

    let mut means = Vec::with_capacity(m);
    let mut vars = Vec::with_capacity(m);
    let mut l_moments = Vec::with_capacity(m);
    let mut weight_sq_mean = Vec::with_capacity(m);
    let mut bias = Vec::with_capacity(m);
    for (i, x0) in plan.x0s.iter().enumerate() {
        let p = cell.predictions_of(i);
        means.push(mean(&p));
        vars.push(variance(&p));
        l_moments.push(l_moments_unchecked(&cell.sizes_of(i), cell.n, cell.k, d));
        weight_sq_mean.push(cell.weight_sq.column(i).mean());
        bias.push((mean(&p) - plan.model.regression.r0.eval(x0), std_error(&p)));
    }
    Ok(CellSummary {
        n: cell.n,
        k: cell.k,
        reps,
        m,
        mean: means,
        var: vars,
        covariance: cov,
        sigma_min_eig,
        ridge,
        l_moments,
        weight_sq_mean,
        empty_samples: cell.empty.iter().filter(|&&e| e).count(),
        d_k,
        d_rect,
        bias,
        notes,
    })
}

/// Summaries of every `(n, k)` cell, in plan order.
pub fn summarize(plan: &ReplicationPlan, raw: &RawReplications, opts: &SummaryOptions) -> Result<SummaryReport> {
    let cells = raw
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| summarize_cell(plan, c, i, opts))
        .collect::<Result<_>>()?;
    Ok(SummaryReport { cells })
}
