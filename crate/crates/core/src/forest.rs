//! Non-adaptive random-forest predictors over the k-PNN voting set.
//!
//! A prediction at `x0` is `sum_i W_i y_i` where the weights are a
//! probability vector supported on the k-PNN set of `x0`. Weights are built
//! from positions and scheme randomness only; responses are never read while
//! constructing them.
//!
//! Scheme randomness for test point `i` is keyed by the sample's seed, the
//! scheme seed and `i`, so predictions at several test points on one sample
//! are reproducible and each test point sees the same draws whether it is
//! predicted alone or in a batch.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{kpnn_set_fast, Point};
use crate::process::MarkedSample;
use crate::rng::mix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeKind {
    /// `W_i = 1 / L`.
    Uniform,
    /// `W ~ Dirichlet(alpha, ..., alpha)` over the voters.
    Dirichlet { alpha: f64 },
    /// All mass on one uniformly chosen voter.
    SingleRandomVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    #[serde(flatten)]
    pub kind: SchemeKind,
    #[serde(default)]
    pub seed: u64,
}

impl WeightScheme {
    pub fn uniform() -> Self {
        WeightScheme {
            kind: SchemeKind::Uniform,
            seed: 0,
        }
    }

    pub fn dirichlet(alpha: f64, seed: u64) -> Self {
        WeightScheme {
            kind: SchemeKind::Dirichlet { alpha },
            seed,
        }
    }

    pub fn single_random_vote(seed: u64) -> Self {
        WeightScheme {
            kind: SchemeKind::SingleRandomVote,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::Dirichlet { alpha } if !(alpha.is_finite() && alpha > 0.0) => Err(Error::InvalidParameter(
                format!("dirichlet concentration must be positive, got {alpha}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, SchemeKind::Uniform)
    }

    /// Weights over `count` voters for test point `point_index`.
    fn weights(&self, count: usize, sample: &MarkedSample, point_index: usize) -> Vec<f64> {
        if count == 0 {
            return Vec::new();
        }
        match self.kind {
            SchemeKind::Uniform => vec![1.0 / count as f64; count],
            SchemeKind::Dirichlet { alpha } => {
                let mut rng = self.rng(sample, point_index);
                let gamma = Gamma::new(alpha, 1.0).expect("validated concentration");
                let mut w: Vec<f64> = (0..count).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = w.iter().sum();
                if total > 0.0 && total.is_finite() {
                    w.iter_mut().for_each(|v| *v /= total);
                } else {
                    // All draws underflowed (tiny alpha): the limit puts all
                    // mass on a single voter.
                    w.iter_mut().for_each(|v| *v = 0.0);
                    w[rng.random_range(0..count)] = 1.0;
                }
                w
            }
            SchemeKind::SingleRandomVote => {
                let mut rng = self.rng(sample, point_index);
                let mut w = vec![0.0; count];
                w[rng.random_range(0..count)] = 1.0;
                w
            }
        }
    }

    fn rng(&self, sample: &MarkedSample, point_index: usize) -> crate::rng::StreamRng {
        sample.seed().derive(mix(self.seed, point_index as u64)).rng()
    }
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::uniform()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// Sorted indices of the k-PNNs of the test point.
    pub voters: Vec<usize>,
    /// Weights aligned with `voters`.
    pub weights: Vec<f64>,
    /// The sample had no points; `value` is 0 by convention.
    pub empty_sample: bool,
}

impl Prediction {
    /// `L_{n,k}(x0)`.
    pub fn voting_set_size(&self) -> usize {
        self.voters.len()
    }

    /// `sum_i W_i^2`.
    pub fn weight_sq_sum(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// Prediction from a known voting set.
pub(crate) fn predict_from_voters(
    sample: &MarkedSample,
    voters: Vec<usize>,
    scheme: &WeightScheme,
    point_index: usize,
) -> Prediction {
    let weights = scheme.weights(voters.len(), sample, point_index);
    let y = sample.responses();
    let value = if voters.is_empty() {
        0.0
    } else if scheme.is_uniform() {
        voters.iter().map(|&i| y[i]).sum::<f64>() / voters.len() as f64
    } else {
        voters.iter().zip(&weights).map(|(&i, w)| w * y[i]).sum()
    };
    Prediction {
        value,
        voters,
        weights,
        empty_sample: sample.is_empty(),
    }
}

/// The k-PNN estimator: mean response over the voting set.
pub fn predict_uniform(sample: &MarkedSample, x0: &[f64], k: usize) -> Result<Prediction> {
    predict_weighted(sample, x0, k, &WeightScheme::uniform())
}

pub fn predict_weighted(sample: &MarkedSample, x0: &[f64], k: usize, scheme: &WeightScheme) -> Result<Prediction> {
    predict_weighted_at(sample, x0, k, scheme, 0)
}

/// [`predict_weighted`] with the scheme randomness of test point `point_index`.
pub fn predict_weighted_at(
    sample: &MarkedSample,
    x0: &[f64],
    k: usize,
    scheme: &WeightScheme,
    point_index: usize,
) -> Result<Prediction> {
    scheme.validate()?;
    let voters = kpnn_set_fast(sample.config(), x0, k)?;
    Ok(predict_from_voters(sample, voters, scheme, point_index))
}

/// Predictions at several test points on one shared sample.
pub fn predict_multi(sample: &MarkedSample, x0s: &[Point], k: usize, scheme: &WeightScheme) -> Result<Vec<Prediction>> {
    if let Some(first) = x0s.first() {
        for p in x0s {
            check_dim(first.dim(), p.dim())?;
        }
    }
    x0s.iter()
        .enumerate()
        .map(|(i, x0)| predict_weighted_at(sample, x0, k, scheme, i))
        .collect()
}
