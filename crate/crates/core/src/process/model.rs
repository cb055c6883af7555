use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::density::DensitySpec;
use crate::error::{check_dim, Error, Result};

/// Unit-variance, mean-zero noise laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSpec {
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
    Rademacher,
}

impl NoiseSpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Gaussian => StandardNormal.sample(rng),
            NoiseSpec::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            NoiseSpec::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Conditional mean `r0(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeanFunction {
    Constant { value: f64 },
    /// `w . x + b`
    Linear { w: Vec<f64>, b: f64 },
    /// `amplitude * sin(frequency * sum_j x_j)`
    SmoothSine { amplitude: f64, frequency: f64 },
}

impl MeanFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFunction::Constant { value } => *value,
            MeanFunction::Linear { w, b } => w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b,
            MeanFunction::SmoothSine { amplitude, frequency } => amplitude * (frequency * x.iter().sum::<f64>()).sin(),
        }
    }

    /// Euclidean Lipschitz constant in dimension `dim`.
    pub fn lipschitz(&self, dim: usize) -> f64 {
        match self {
            MeanFunction::Constant { .. } => 0.0,
            MeanFunction::Linear { w, .. } => w.iter().map(|a| a * a).sum::<f64>().sqrt(),
            MeanFunction::SmoothSine { amplitude, frequency } => (amplitude * frequency).abs() * (dim as f64).sqrt(),
        }
    }
}

/// Noise scale `sigma(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseScale {
    Constant { value: f64 },
    /// `intercept + slope * |x|_2`
    AffineNorm { intercept: f64, slope: f64 },
}

impl NoiseScale {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            NoiseScale::Constant { value } => *value,
            NoiseScale::AffineNorm { intercept, slope } => {
                intercept + slope * x.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        }
    }
}

/// `y = r0(x) + sigma(x) * eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub r0: MeanFunction,
    pub sigma: NoiseScale,
}

impl RegressionSpec {
    pub fn new(r0: MeanFunction, sigma: NoiseScale) -> Self {
        RegressionSpec { r0, sigma }
    }

    pub fn response(&self, x: &[f64], eps: f64) -> f64 {
        let s = self.sigma.eval(x);
        if s == 0.0 {
            self.r0.eval(x)
        } else {
            self.r0.eval(x) + s * eps
        }
    }

    /// `inf_x sigma(x)^2` over the density's support box.
    pub fn min_noise_variance(&self, density: &DensitySpec) -> f64 {
        match &self.sigma {
            NoiseScale::Constant { value } => value * value,
            NoiseScale::AffineNorm { intercept, slope } => {
                let (lo, hi) = density.support();
                let dist = lo
                    .iter()
                    .zip(hi)
                    .map(|(l, h)| if *l > 0.0 { *l } else if *h < 0.0 { -*h } else { 0.0 })
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                let s = intercept + slope * dist;
                s * s
            }
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match &self.r0 {
            MeanFunction::Constant { value } if !value.is_finite() => {
                return Err(Error::InvalidParameter("constant mean must be finite".into()));
            }
            MeanFunction::Linear { w, b } => {
                check_dim(dim, w.len())?;
                if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("linear mean must be finite".into()));
                }
            }
            MeanFunction::SmoothSine { amplitude, frequency } if !(amplitude.is_finite() && frequency.is_finite()) => {
                return Err(Error::InvalidParameter("sine mean must be finite".into()));
            }
            _ => {}
        }
        match &self.sigma {
            NoiseScale::Constant { value } if !(value.is_finite() && *value >= 0.0) => {
                Err(Error::InvalidParameter("noise scale must be finite and nonnegative".into()))
            }
            NoiseScale::AffineNorm { intercept, slope }
                if !(intercept.is_finite() && slope.is_finite() && *intercept >= 0.0 && *slope >= 0.0) =>
            {
                Err(Error::InvalidParameter(
                    "affine noise scale needs nonnegative intercept and slope".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub density: DensitySpec,
    pub noise: NoiseSpec,
    pub regression: RegressionSpec,
}

impl Model {
    pub fn new(density: DensitySpec, noise: NoiseSpec, regression: RegressionSpec) -> Self {
        Model {
            density,
            noise,
            regression,
        }
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        self.regression.validate(self.dim())
    }
}
