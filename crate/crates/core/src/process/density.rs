use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{check_dim, Error, Result};
use crate::geometry::HyperRect;
use crate::quad::{self, Tolerance};

/// Catalog of product densities on a bounded box. Each has closed-form
/// rectangle masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySpec {
    /// Uniform on `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Independent `N(mean_j, sd^2)` coordinates conditioned on the box.
    TruncatedGaussian {
        mean: Vec<f64>,
        sd: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Independent `lo_j + (hi_j - lo_j) Beta(a, b)` coordinates.
    ProductBeta { a: f64, b: f64, lo: Vec<f64>, hi: Vec<f64> },
}

impl DensitySpec {
    pub fn unit_cube(dim: usize) -> Self {
        DensitySpec::UniformBox {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.support().0.len()
    }

    /// Bounding box `(lo, hi)` of the support.
    pub fn support(&self) -> (&[f64], &[f64]) {
        match self {
            DensitySpec::UniformBox { lo, hi }
            | DensitySpec::TruncatedGaussian { lo, hi, .. }
            | DensitySpec::ProductBeta { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if lo.is_empty() {
            return Err(Error::InvalidParameter("density dimension must be at least 1".into()));
        }
        check_dim(lo.len(), hi.len())?;
        for (l, h) in lo.iter().zip(hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidParameter(format!("support box requires lo < hi, got [{l}, {h}]")));
            }
        }
        match self {
            DensitySpec::UniformBox { .. } => Ok(()),
            DensitySpec::TruncatedGaussian { mean, sd, .. } => {
                check_dim(lo.len(), mean.len())?;
                if !(sd.is_finite() && *sd > 0.0) || mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::InvalidParameter("truncated gaussian needs finite mean and sd > 0".into()));
                }
                for j in 0..lo.len() {
                    if self.coord_norm(j) <= 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "truncation box carries no gaussian mass on axis {j}"
                        )));
                    }
                }
                Ok(())
            }
            DensitySpec::ProductBeta { a, b, .. } => {
                if a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("beta shape parameters must be positive".into()))
                }
            }
        }
    }

    /// Density at `x`; zero outside the closed support box.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        let (lo, hi) = self.support();
        if x.iter().zip(lo.iter().zip(hi)).any(|(v, (l, h))| v < l || v > h) {
            return 0.0;
        }
        (0..x.len()).map(|j| self.coord_pdf(j, x[j])).product()
    }

    fn coord_pdf(&self, j: usize, v: f64) -> f64 {
        match self {
            DensitySpec::UniformBox { lo, hi } => 1.0 / (hi[j] - lo[j]),
            DensitySpec::TruncatedGaussian { mean, sd, .. } => {
                let z = (v - mean[j]) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt() * self.coord_norm(j))
            }
            DensitySpec::ProductBeta { a, b, lo, hi } => {
                let w = hi[j] - lo[j];
                let u = (v - lo[j]) / w;
                ((a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - ln_beta(*a, *b)).exp() / w
            }
        }
    }

    fn coord_norm(&self, j: usize) -> f64 {
        match self {
            DensitySpec::TruncatedGaussian { mean, sd, lo, hi } => {
                normal_interval((lo[j] - mean[j]) / sd, (hi[j] - mean[j]) / sd)
            }
            _ => 1.0,
        }
    }

    /// Mass of `[a, b]` on axis `j`.
    pub fn interval_mass(&self, j: usize, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let a = a.max(lo[j]);
        let b = b.min(hi[j]);
        if a >= b {
            return 0.0;
        }
        let m = match self {
            DensitySpec::UniformBox { lo, hi } => (b - a) / (hi[j] - lo[j]),
            DensitySpec::TruncatedGaussian { mean, sd, .. } => {
                normal_interval((a - mean[j]) / sd, (b - mean[j]) / sd) / self.coord_norm(j)
            }
            DensitySpec::ProductBeta { a: pa, b: pb, lo, hi } => {
                let w = hi[j] - lo[j];
                let ua = ((a - lo[j]) / w).clamp(0.0, 1.0);
                let ub = ((b - lo[j]) / w).clamp(0.0, 1.0);
                beta_cdf(*pa, *pb, ub) - beta_cdf(*pa, *pb, ua)
            }
        };
        m.clamp(0.0, 1.0)
    }

    /// `∫_rect g`, in closed form.
    pub fn rect_mass(&self, rect: &HyperRect) -> Result<f64> {
        check_dim(self.dim(), rect.dim())?;
        let mut m = 1.0;
        for j in 0..self.dim() {
            m *= self.interval_mass(j, rect.lo()[j], rect.hi()[j]);
            if m == 0.0 {
                break;
            }
        }
        Ok(m)
    }

    /// Mass of `Rect(a, b)` without building the rectangle.
    pub fn mass_between(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut m = 1.0;
        for j in 0..a.len() {
            m *= self.interval_mass(j, a[j].min(b[j]), a[j].max(b[j]));
            if m == 0.0 {
                break;
            }
        }
        m
    }

    /// `∫_rect g` by nested adaptive quadrature of the pdf, to absolute
    /// tolerance `abs_tol`. Independent of the closed forms; used to check
    /// them and for densities without one.
    pub fn rect_mass_by_quadrature(&self, rect: &HyperRect, abs_tol: f64) -> Result<f64> {
        check_dim(self.dim(), rect.dim())?;
        let (lo, hi) = self.support();
        let a: Vec<f64> = (0..self.dim()).map(|j| rect.lo()[j].max(lo[j])).collect();
        let b: Vec<f64> = (0..self.dim()).map(|j| rect.hi()[j].min(hi[j])).collect();
        if a.iter().zip(&b).any(|(x, y)| x >= y) {
            return Ok(0.0);
        }
        nested(self, &a, &b, &[], abs_tol / self.dim() as f64)
    }

    /// Draws one point into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            DensitySpec::UniformBox { lo, hi } => {
                for j in 0..out.len() {
                    out[j] = lo[j] + (hi[j] - lo[j]) * rng.random::<f64>();
                }
            }
            DensitySpec::TruncatedGaussian { mean, sd, lo, hi } => {
                for j in 0..out.len() {
                    let za = (lo[j] - mean[j]) / sd;
                    let zb = (hi[j] - mean[j]) / sd;
                    let u: f64 = rng.random();
                    let z = truncated_normal_quantile(za, zb, u);
                    out[j] = (mean[j] + sd * z).clamp(lo[j], hi[j]);
                }
            }
            DensitySpec::ProductBeta { a, b, lo, hi } => {
                let beta = Beta::new(*a, *b).expect("validated beta parameters");
                for j in 0..out.len() {
                    out[j] = lo[j] + (hi[j] - lo[j]) * beta.sample(rng);
                }
            }
        }
    }
}

fn nested(g: &DensitySpec, a: &[f64], b: &[f64], prefix: &[f64], tol: f64) -> Result<f64> {
    let axis = prefix.len();
    let point = |v: f64| {
        let mut p = prefix.to_vec();
        p.push(v);
        p
    };
    if axis + 1 == a.len() {
        return quad::integrate(|v| g.pdf(&point(v)), a[axis], b[axis], Tolerance::absolute(tol));
    }
    let failure = std::cell::RefCell::new(None);
    let value = quad::integrate(
        |v| match nested(g, a, b, &point(v), tol) {
            Ok(r) => r,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        a[axis],
        b[axis],
        Tolerance::absolute(tol),
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Standard normal CDF.
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `Φ(b) - Φ(a)` without cancellation in either tail.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

/// Quantile of the standard normal restricted to `[a, b]` at level `u`.
fn truncated_normal_quantile(a: f64, b: f64, u: f64) -> f64 {
    if a >= 0.0 {
        // Work with upper tails to keep precision.
        let qa = norm_cdf(-a);
        let qb = norm_cdf(-b);
        let q = qa - u * (qa - qb);
        -norm_quantile(q)
    } else {
        let pa = norm_cdf(a);
        let pb = norm_cdf(b);
        norm_quantile(pa + u * (pb - pa))
    }
    .clamp(a, b)
}

fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn beta_cdf(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, u)
    }
}
