//! Replication plans and their execution.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::forest::{predict_from_voters, WeightScheme};
use crate::geometry::{check_k, pnn_counts, Point};
use crate::process::{sample_marked, Model};
use crate::rng::{mix, SeedSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub model: Model,
    /// Intensities `n`.
    pub ns: Vec<f64>,
    pub ks: Vec<usize>,
    pub x0s: Vec<Point>,
    pub reps: usize,
    #[serde(default)]
    pub scheme: WeightScheme,
    pub seed: u64,
}

impl ReplicationPlan {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.scheme.validate()?;
        if self.reps < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 replications, got {}", self.reps)));
        }
        if self.ns.is_empty() || self.ks.is_empty() || self.x0s.is_empty() {
            return Err(Error::InvalidParameter("intensity, k and test-point grids must be nonempty".into()));
        }
        for &n in &self.ns {
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::InvalidParameter(format!("intensity must be positive, got {n}")));
            }
        }
        for &k in &self.ks {
            check_k(k)?;
        }
        for x0 in &self.x0s {
            check_dim(self.model.dim(), x0.dim())?;
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.x0s.len()
    }

    /// Seed of replication `r` at intensity index `j`. The first intensity
    /// uses the master seed itself; later ones use derived keys so that
    /// different intensities never share draws.
    pub fn sample_seed(&self, j: usize, r: usize) -> SeedSpec {
        let master = if j == 0 { self.seed } else { mix(self.seed, j as u64) };
        SeedSpec::new(master, r as u64)
    }

    /// Number of sampled points over the whole plan, in expectation.
    pub fn expected_points(&self) -> f64 {
        self.ns.iter().sum::<f64>() * self.reps as f64
    }
}

/// Raw output for one `(n, k)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub n: f64,
    pub k: usize,
    /// `reps x m` predictions.
    pub predictions: DMatrix<f64>,
    /// `reps x m` voting-set sizes.
    pub sizes: DMatrix<f64>,
    /// `reps x m` sums of squared weights.
    pub weight_sq: DMatrix<f64>,
    /// Replications whose sample was empty.
    pub empty: Vec<bool>,
}

impl CellData {
    pub fn reps(&self) -> usize {
        self.predictions.nrows()
    }

    pub fn predictions_of(&self, i: usize) -> Vec<f64> {
        self.predictions.column(i).iter().copied().collect()
    }

    pub fn sizes_of(&self, i: usize) -> Vec<usize> {
        self.sizes.column(i).iter().map(|&v| v as usize).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawReplications {
    /// Ordered by intensity, then by `k`, as in the plan.
    pub cells: Vec<CellData>,
}

impl RawReplications {
    pub fn cell(&self, n: f64, k: usize) -> Option<&CellData> {
        self.cells.iter().find(|c| c.n == n && c.k == k)
    }
}

struct Row {
    /// `[k index][x0 index]`
    predictions: Vec<Vec<f64>>,
    sizes: Vec<Vec<usize>>,
    weight_sq: Vec<Vec<f64>>,
    empty: bool,
}

/// One replication: one marked sample, all test points and all `k`.
fn replicate(plan: &ReplicationPlan, j: usize, r: usize) -> Result<Row> {
    let sample = sample_marked(plan.ns[j], &plan.model, plan.sample_seed(j, r))?;
    let cap = *plan.ks.iter().max().expect("validated");
    let (nk, m) = (plan.ks.len(), plan.m());
    let mut row = Row {
        predictions: vec![vec![0.0; m]; nk],
        sizes: vec![vec![0; m]; nk],
        weight_sq: vec![vec![0.0; m]; nk],
        empty: sample.is_empty(),
    };
    for (i, x0) in plan.x0s.iter().enumerate() {
        let counts = pnn_counts(sample.config(), x0, cap)?;
        for (ki, &k) in plan.ks.iter().enumerate() {
            let p = predict_from_voters(&sample, counts.voters(k), &plan.scheme, i);
            row.predictions[ki][i] = p.value;
            row.sizes[ki][i] = p.voting_set_size();
            row.weight_sq[ki][i] = p.weight_sq_sum();
        }
    }
    Ok(row)
}

/// Runs every replication of the plan on the current rayon pool.
pub fn run_replications(plan: &ReplicationPlan) -> Result<RawReplications> {
    plan.validate()?;
    let (reps, m) = (plan.reps, plan.m());
    let mut cells = Vec::with_capacity(plan.ns.len() * plan.ks.len());
    for (j, &n) in plan.ns.iter().enumerate() {
        let rows: Vec<Row> = (0..reps)
            .into_par_iter()
            .map(|r| replicate(plan, j, r))
            .collect::<Result<_>>()?;
        for (ki, &k) in plan.ks.iter().enumerate() {
            cells.push(CellData {
                n,
                k,
                predictions: DMatrix::from_fn(reps, m, |r, i| rows[r].predictions[ki][i]),
                sizes: DMatrix::from_fn(reps, m, |r, i| rows[r].sizes[ki][i] as f64),
                weight_sq: DMatrix::from_fn(reps, m, |r, i| rows[r].weight_sq[ki][i]),
                empty: rows.iter().map(|row| row.empty).collect(),
            });
        }
    }
    Ok(RawReplications { cells })
}

/// [`run_replications`] on a dedicated pool of `workers` threads. Results do
/// not depend on `workers`.
pub fn run_replications_with_workers(plan: &ReplicationPlan, workers: usize) -> Result<RawReplications> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_replications(plan))
}
