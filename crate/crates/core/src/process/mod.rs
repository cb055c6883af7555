//! Marked Poisson samples `P_{n g}` for the model catalog.
//!
//! A Poisson process of intensity `n g` is drawn in its mixed binomial form:
//! `N ~ Poisson(n)`, then `N` i.i.d. points from `g`. Each point carries an
//! independent unit-variance mark `eps` and a response `y = r0(x) + sigma(x) eps`.
//! Draw order within a stream is fixed (count, coordinates, marks), so the
//! unmarked part of [`sample_marked`] equals [`sample_poisson_config`] for the
//! same seed.

mod density;
mod model;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

pub use density::DensitySpec;
pub(crate) use density::norm_cdf;
pub use model::{MeanFunction, Model, NoiseScale, NoiseSpec, RegressionSpec};

use crate::error::{Error, Result};
use crate::geometry::{HyperRect, PointConfig};
use crate::rng::SeedSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSample {
    config: PointConfig,
    marks: Vec<f64>,
    responses: Vec<f64>,
    seed: SeedSpec,
}

impl MarkedSample {
    pub fn new(config: PointConfig, marks: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if marks.len() != config.len() || responses.len() != config.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points but {} marks and {} responses",
                config.len(),
                marks.len(),
                responses.len()
            )));
        }
        Ok(MarkedSample {
            config,
            marks,
            responses,
            seed: SeedSpec::default(),
        })
    }

    /// Attaches the seed used for auxiliary (weight scheme) randomness.
    pub fn with_seed(mut self, seed: SeedSpec) -> Self {
        self.seed = seed;
        self
    }

    pub fn config(&self) -> &PointConfig {
        &self.config
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn seed(&self) -> SeedSpec {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.config.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.is_empty()
    }

    /// Same positions and marks, responses replaced.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Ok(MarkedSample::new(self.config.clone(), self.marks.clone(), responses)?.with_seed(self.seed))
    }
}

fn check_intensity(n: f64) -> Result<()> {
    if n.is_finite() && n > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("intensity must be positive and finite, got {n}")))
    }
}

fn draw_points<R: Rng + ?Sized>(rng: &mut R, count: usize, density: &DensitySpec) -> Result<PointConfig> {
    let d = density.dim();
    let mut flat = vec![0.0; count * d];
    for chunk in flat.chunks_exact_mut(d) {
        density.sample_into(rng, chunk);
    }
    PointConfig::from_flat(d, flat)
}

fn draw_poisson_config<R: Rng + ?Sized>(rng: &mut R, n: f64, density: &DensitySpec) -> Result<PointConfig> {
    check_intensity(n)?;
    density.validate()?;
    let count = Poisson::new(n)
        .map_err(|e| Error::InvalidParameter(format!("poisson intensity {n}: {e}")))?
        .sample(rng);
    draw_points(rng, count as usize, density)
}

/// Unmarked Poisson configuration with intensity measure `n g`.
pub fn sample_poisson_config(n: f64, density: &DensitySpec, seed: SeedSpec) -> Result<PointConfig> {
    draw_poisson_config(&mut seed.rng(), n, density)
}

/// Exactly `count` i.i.d. points. Debug aid only: the Poisson sampler is the
/// regime the theory covers.
pub fn sample_binomial_config(count: usize, density: &DensitySpec, seed: SeedSpec) -> Result<PointConfig> {
    density.validate()?;
    draw_points(&mut seed.rng(), count, density)
}

fn attach_marks<R: Rng + ?Sized>(rng: &mut R, config: PointConfig, model: &Model, seed: SeedSpec) -> MarkedSample {
    let marks: Vec<f64> = (0..config.len()).map(|_| model.noise.sample(rng)).collect();
    let responses = config
        .iter()
        .zip(&marks)
        .map(|(x, e)| model.regression.response(x, *e))
        .collect();
    MarkedSample {
        config,
        marks,
        responses,
        seed,
    }
}

/// Marked Poisson sample of the regression model.
pub fn sample_marked(n: f64, model: &Model, seed: SeedSpec) -> Result<MarkedSample> {
    model.validate()?;
    let mut rng = seed.rng();
    let config = draw_poisson_config(&mut rng, n, &model.density)?;
    Ok(attach_marks(&mut rng, config, model, seed))
}

/// Binomial counterpart of [`sample_marked`] (debug only).
pub fn sample_marked_binomial(count: usize, model: &Model, seed: SeedSpec) -> Result<MarkedSample> {
    model.validate()?;
    let mut rng = seed.rng();
    let config = draw_points(&mut rng, count, &model.density)?;
    Ok(attach_marks(&mut rng, config, model, seed))
}

/// `∫_rect g`.
pub fn rect_mass(density: &DensitySpec, rect: &HyperRect) -> Result<f64> {
    density.rect_mass(rect)
}
