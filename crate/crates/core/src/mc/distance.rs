//! Kolmogorov-type distances between empirical laws and the standard normal.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::process::norm_cdf;
use crate::rng::SeedSpec;

use super::stats::{mean, variance};

pub const MIN_SAMPLES: usize = 100;
pub const MAX_RECT_DIM: usize = 4;
pub const MAX_GRID: usize = 41;
/// The rectangle grid spans `[-GRID_HALF_WIDTH, GRID_HALF_WIDTH]` on every axis.
pub const GRID_HALF_WIDTH: f64 = 4.0;

/// `sup_t |F_N(t) - F(t)|` for the empirical distribution of `samples`,
/// exact via the order statistics.
pub fn kolmogorov_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    kolmogorov_sorted(&v, cdf)
}

fn kolmogorov_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov distance of `samples` to the standard normal.
pub fn ecdf_kolmogorov(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Kolmogorov distance needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("samples contain NaN".into()));
    }
    Ok(kolmogorov_distance(samples, norm_cdf))
}

/// `(x - mean) / sd` with the sample moments.
pub fn z_scores(xs: &[f64]) -> Vec<f64> {
    let m = mean(xs);
    let sd = variance(xs).sqrt();
    xs.iter().map(|x| (x - m) / sd).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    /// Bootstrap standard error.
    pub std_error: f64,
}

/// Largest Kolmogorov distance to the standard normal over the columns of
/// `rows`, each standardized by its own sample mean and deviation, with a
/// seeded bootstrap standard error over resampled rows.
pub fn marginal_kolmogorov(rows: &DMatrix<f64>, bootstrap: usize, seed: SeedSpec) -> Result<DistanceEstimate> {
    let n = rows.nrows();
    let cols: Vec<Vec<f64>> = rows.column_iter().map(|c| c.iter().copied().collect()).collect();
    let stat = |cols: &[Vec<f64>]| -> Result<f64> {
        let mut worst = 0.0f64;
        for c in cols {
            worst = worst.max(ecdf_kolmogorov(&z_scores(c))?);
        }
        Ok(worst)
    };
    let value = stat(&cols)?;
    if bootstrap < 2 {
        return Ok(DistanceEstimate {
            value,
            std_error: f64::NAN,
        });
    }
    let mut rng = seed.rng();
    let mut reps = Vec::with_capacity(bootstrap);
    let mut idx = vec![0usize; n];
    for _ in 0..bootstrap {
        idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
        let resampled: Vec<Vec<f64>> = cols.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect();
        reps.push(stat(&resampled)?);
    }
    Ok(DistanceEstimate {
        value,
        std_error: variance(&reps).sqrt(),
    })
}

/// `max_t |F_N(t) - prod_j Phi(t_j)|` over the lower-orthant corners `t` of a
/// `g`-point grid per axis on `[-4, 4]`. Rows are expected to be whitened.
pub fn multivariate_rect_kolmogorov(rows: &DMatrix<f64>, g: usize) -> Result<f64> {
    let (n, m) = rows.shape();
    if m == 0 {
        return Err(Error::InvalidParameter("no components".into()));
    }
    if m > MAX_RECT_DIM {
        return Err(Error::LimitExceeded {
            what: "components for the rectangle distance",
            limit: MAX_RECT_DIM,
            got: m,
        });
    }
    if g > MAX_GRID {
        return Err(Error::LimitExceeded {
            what: "grid points per axis",
            limit: MAX_GRID,
            got: g,
        });
    }
    if g < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points per axis".into()));
    }
    if n == 0 || rows.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("rows must be nonempty and free of NaN".into()));
    }
    let grid: Vec<f64> = (0..g)
        .map(|i| -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * i as f64 / (g - 1) as f64)
        .collect();
    let phi: Vec<f64> = grid.iter().map(|&t| norm_cdf(t)).collect();
    // Cell c on an axis holds values in (grid[c-1], grid[c]]; cell g is above
    // the grid. A row lies below corner t_i iff its cell index is <= i.
    let side = g + 1;
    let mut counts = vec![0u32; side.pow(m as u32)];
    for r in 0..n {
        let mut flat = 0usize;
        for j in 0..m {
            let v = rows[(r, j)];
            let c = grid.partition_point(|&t| t < v);
            flat = flat * side + c;
        }
        counts[flat] += 1;
    }
    // In-place prefix sums along every axis.
    let mut cum: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut stride = 1usize;
    for _ in 0..m {
        for idx in 0..cum.len() {
            if !(idx / stride).is_multiple_of(side) {
                cum[idx] += cum[idx - stride];
            }
        }
        stride *= side;
    }
    let mut worst = 0.0f64;
    let mut corner = vec![0usize; m];
    loop {
        let flat = corner.iter().fold(0usize, |acc, &c| acc * side + c);
        let model: f64 = corner.iter().map(|&c| phi[c]).product();
        worst = worst.max((cum[flat] / n as f64 - model).abs());
        let mut axis = m;
        loop {
            if axis == 0 {
                return Ok(worst);
            }
            axis -= 1;
            corner[axis] += 1;
            if corner[axis] < g {
                break;
            }
            corner[axis] = 0;
        }
    }
}
