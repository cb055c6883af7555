//! Region-of-stabilization calculus for the forest score at `x0`.
//!
//! The score of a point `x` depends on the configuration only through
//! `Rect(x0, x)`, and only while fewer than `k` other points fall in it.
//! This module computes that region, the probability that a fixed location
//! falls in the region of a point added to a Poisson sample, the exponential
//! bound on that probability, the `c` integral built from it, and
//! instance-level checks of the structural assumptions on the region.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{check_k, count_in_rect_excl, in_rect, rect_between, HyperRect, PointConfig};
use crate::process::DensitySpec;
use crate::quad::{integrate, Tolerance};
use crate::rng::SeedSpec;

/// Above this intensity `e^{-lambda}` is too close to underflow for the
/// plain forward recurrence.
const FORWARD_LIMIT: f64 = 700.0;

/// `P(Poisson(lambda) < k)`.
pub fn poisson_cdf_psi(lambda: f64, k: usize) -> f64 {
    assert!(lambda >= 0.0, "intensity must be nonnegative, got {lambda}");
    if k == 0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return 1.0;
    }
    if lambda.is_infinite() {
        return 0.0;
    }
    let v = if lambda <= FORWARD_LIMIT {
        psi_forward(lambda, k)
    } else {
        psi_anchored(lambda, k)
    };
    v.clamp(0.0, 1.0)
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn psi_forward(lambda: f64, k: usize) -> f64 {
    let mut term = (-lambda).exp();
    let mut acc = KahanSum::default();
    acc.add(term);
    for j in 1..k {
        term *= lambda / j as f64;
        acc.add(term);
        if j as f64 > lambda && term < 1e-17 * acc.value() {
            break;
        }
    }
    acc.value()
}

/// Sums `t_j / t_m` around the largest included term `t_m` and rescales by
/// `t_m`, evaluated in log space with the saddle-point form of the Poisson
/// probability.
fn psi_anchored(lambda: f64, k: usize) -> f64 {
    let m = ((k - 1) as f64).min(lambda.floor());
    let mut acc = KahanSum::default();
    acc.add(1.0);
    let mut r = 1.0;
    let mut j = m;
    while j >= 1.0 {
        r *= j / lambda;
        acc.add(r);
        if r < 1e-18 * acc.value() {
            break;
        }
        j -= 1.0;
    }
    let mut r = 1.0;
    let mut j = m + 1.0;
    while j <= (k - 1) as f64 {
        r *= lambda / j;
        acc.add(r);
        if r < 1e-18 * acc.value() {
            break;
        }
        j += 1.0;
    }
    (log_poisson_pmf(m, lambda) + acc.value().ln()).exp()
}

/// `ln P(Poisson(lambda) = x)` without cancellation for large arguments.
fn log_poisson_pmf(x: f64, lambda: f64) -> f64 {
    if x == 0.0 {
        return -lambda;
    }
    -0.5 * (2.0 * std::f64::consts::PI * x).ln() - stirling_error(x) - deviance_term(x, lambda)
}

/// `ln x! - [(x + 1/2) ln x - x + ln sqrt(2 pi)]`.
fn stirling_error(x: f64) -> f64 {
    if x <= 15.0 {
        return ln_gamma(x + 1.0) - (x + 0.5) * x.ln() + x - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let x2 = x * x;
    (S0 - (S1 - (S2 - (S3 - S4 / x2) / x2) / x2) / x2) / x
}

/// `x ln(x / np) + np - x`, accurate when `x` is close to `np`.
fn deviance_term(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return s;
            }
            s = next;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// The region `Rect(x0, x)` (times the mark space) or the empty set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StabilizationRegion {
    Rect { rect: HyperRect },
    Empty,
}

impl StabilizationRegion {
    pub fn is_empty(&self) -> bool {
        matches!(self, StabilizationRegion::Empty)
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        match self {
            StabilizationRegion::Rect { rect } => rect.contains(q),
            StabilizationRegion::Empty => false,
        }
    }

    pub fn is_subset_of(&self, other: &StabilizationRegion) -> bool {
        match (self, other) {
            (StabilizationRegion::Empty, _) => true,
            (StabilizationRegion::Rect { .. }, StabilizationRegion::Empty) => false,
            (StabilizationRegion::Rect { rect: a }, StabilizationRegion::Rect { rect: b }) => a.is_subset_of(b),
        }
    }
}

/// Region of stabilization of configuration point `x`.
pub fn region_of(config: &PointConfig, x0: &[f64], x: &[f64], k: usize) -> Result<StabilizationRegion> {
    check_k(k)?;
    check_dim(config.dim(), x0.len())?;
    check_dim(config.dim(), x.len())?;
    if config.position(x).is_none() {
        return Err(Error::NotInConfig);
    }
    if count_in_rect_excl(config, x0, x)? < k {
        Ok(StabilizationRegion::Rect {
            rect: rect_between(x0, x)?,
        })
    } else {
        Ok(StabilizationRegion::Empty)
    }
}

/// Inputs to the tail bound: intensity `n`, order `k` and the mass of
/// `Rect(x0, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub n: f64,
    pub k: usize,
    pub mass: f64,
}

impl TailParams {
    pub fn new(density: &DensitySpec, n: f64, x0: &[f64], x: &[f64], k: usize) -> Result<Self> {
        check_k(k)?;
        check_intensity(n)?;
        density.validate()?;
        let mass = density.rect_mass(&rect_between(x0, x)?)?;
        Ok(TailParams { n, k, mass })
    }

    pub fn lambda(&self) -> f64 {
        self.n * self.mass
    }

    pub fn psi(&self) -> f64 {
        poisson_cdf_psi(self.lambda(), self.k)
    }

    /// `e * sum_{j<k} exp(-lambda / (j + 2))`; may exceed 1.
    pub fn bound(&self) -> f64 {
        tail_bound_from_lambda(self.lambda(), self.k)
    }

    /// [`Self::bound`] capped at 1, for display only.
    pub fn bound_clamped(&self) -> f64 {
        self.bound().min(1.0)
    }

    /// Decay rate `r` with `bound = exp(-r)`.
    pub fn rate(&self) -> f64 {
        -self.bound().ln()
    }
}

fn check_intensity(n: f64) -> Result<()> {
    if n.is_finite() && n > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("intensity must be positive and finite, got {n}")))
    }
}

pub fn tail_bound_from_lambda(lambda: f64, k: usize) -> f64 {
    let e = std::f64::consts::E;
    e * (0..k).map(|j| (-lambda / (j + 2) as f64).exp()).sum::<f64>()
}

/// `1{y in Rect(x0, x)} psi(n * mass(Rect(x0, x)), k)`.
pub fn membership_prob(density: &DensitySpec, n: f64, x0: &[f64], x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    check_dim(density.dim(), y.len())?;
    let params = TailParams::new(density, n, x0, x, k)?;
    if !in_rect(x0, x, y) {
        return Ok(0.0);
    }
    Ok(params.psi())
}

/// Raw (unclamped) exponential bound on [`membership_prob`] over `Rect(x0, x)`.
pub fn tail_bound(density: &DensitySpec, n: f64, x0: &[f64], x: &[f64], k: usize) -> Result<f64> {
    Ok(TailParams::new(density, n, x0, x, k)?.bound())
}

/// Weight function inside the `c` integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phi {
    One,
    /// `1 + |x|_2`: grows like the absolute response moment of the catalog
    /// models with affine noise scale and bounded means.
    AbsMomentProxy,
}

impl Phi {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Phi::One => 1.0,
            Phi::AbsMomentProxy => 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CValue {
    pub value: f64,
    /// Zero for deterministic methods.
    pub std_error: f64,
    pub method: CMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CFunctionOptions {
    pub rel_tol: f64,
    pub mc_samples: usize,
    pub seed: SeedSpec,
}

impl Default for CFunctionOptions {
    fn default() -> Self {
        CFunctionOptions {
            rel_tol: 1e-6,
            mc_samples: 200_000,
            seed: SeedSpec::new(0x5eed, 0),
        }
    }
}

/// `c_{alpha,s,x0}(y) = s * ∫ 1{y in Rect(x0,x)} exp(-alpha s mass(Rect(x,x0))) phi(x) g(x) dx`.
pub fn c_function(density: &DensitySpec, phi: Phi, alpha: f64, s: f64, x0: &[f64], y: &[f64]) -> Result<CValue> {
    c_function_with(density, phi, alpha, s, x0, y, &CFunctionOptions::default())
}

pub fn c_function_with(
    density: &DensitySpec,
    phi: Phi,
    alpha: f64,
    s: f64,
    x0: &[f64],
    y: &[f64],
    opts: &CFunctionOptions,
) -> Result<CValue> {
    density.validate()?;
    let d = density.dim();
    check_dim(d, x0.len())?;
    check_dim(d, y.len())?;
    for (name, v) in [("alpha", alpha), ("s", s)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let pieces = match integration_pieces(density, x0, y) {
        Some(p) => p,
        None => {
            return Ok(CValue {
                value: 0.0,
                std_error: 0.0,
                method: CMethod::ClosedForm,
            })
        }
    };
    if d == 1 && phi == Phi::One {
        if let DensitySpec::UniformBox { lo, hi } = density {
            let g = 1.0 / (hi[0] - lo[0]);
            let value = pieces[0]
                .iter()
                .map(|&(a, b)| {
                    let da = (a - x0[0]).abs();
                    let db = (b - x0[0]).abs();
                    ((-alpha * s * g * da.min(db)).exp() - (-alpha * s * g * da.max(db)).exp()) / alpha
                })
                .sum();
            return Ok(CValue {
                value,
                std_error: 0.0,
                method: CMethod::ClosedForm,
            });
        }
    }
    let integrand = |x: &[f64]| s * (-alpha * s * density.mass_between(x, x0)).exp() * phi.eval(x) * density.pdf(x);
    if d <= 2 {
        let value = c_quadrature(&pieces, opts.rel_tol, &integrand)?;
        return Ok(CValue {
            value,
            std_error: 0.0,
            method: CMethod::Quadrature,
        });
    }
    let mut rng = opts.seed.rng();
    let n = opts.mc_samples.max(2);
    let mut x = vec![0.0; d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        density.sample_into(&mut rng, &mut x);
        if in_rect(x0, &x, y) {
            let v = s * (-alpha * s * density.mass_between(&x, x0)).exp() * phi.eval(&x);
            sum += v;
            sum_sq += v * v;
        }
    }
    let mean = sum / n as f64;
    let var = ((sum_sq - n as f64 * mean * mean) / (n - 1) as f64).max(0.0);
    Ok(CValue {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        method: CMethod::MonteCarlo,
    })
}

/// Per axis, the intervals of `x_j` (within the support) with `y_j` between
/// `x0_j` and `x_j`, split at `x0_j` so each piece lies on one side of it.
/// `None` when some axis admits no such `x_j`.
fn integration_pieces(density: &DensitySpec, x0: &[f64], y: &[f64]) -> Option<Vec<Vec<(f64, f64)>>> {
    let (lo, hi) = density.support();
    let mut out = Vec::with_capacity(x0.len());
    for j in 0..x0.len() {
        let mut axis = Vec::new();
        if y[j] >= x0[j] {
            let a = y[j].max(lo[j]).max(x0[j]);
            if a < hi[j] {
                axis.push((a, hi[j]));
            }
        }
        if y[j] <= x0[j] {
            let b = y[j].min(hi[j]).min(x0[j]);
            if lo[j] < b {
                axis.push((lo[j], b));
            }
        }
        if axis.is_empty() {
            return None;
        }
        out.push(axis);
    }
    Some(out)
}

fn c_quadrature<F: Fn(&[f64]) -> f64>(pieces: &[Vec<(f64, f64)>], rel_tol: f64, f: &F) -> Result<f64> {
    let mut total = 0.0;
    if pieces.len() == 1 {
        for &(a, b) in &pieces[0] {
            total += integrate(|t| f(&[t]), a, b, Tolerance::relative(rel_tol))?;
        }
        return Ok(total);
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    for &(a1, b1) in &pieces[0] {
        for &(a2, b2) in &pieces[1] {
            let outer = |t1: f64| {
                match integrate(|t2| f(&[t1, t2]), a2, b2, Tolerance::relative(1e-3 * rel_tol)) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            };
            total += integrate(outer, a1, b1, Tolerance::relative(rel_tol))?;
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
        }
    }
    Ok(total)
}

/// Instance-level verdict on the structural assumptions for one
/// configuration, test point, `k` and probe point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub points_checked: usize,
    /// Indices where the vote indicator computed from the region's
    /// restriction differs from the one on the full configuration.
    pub r1_violations: Vec<usize>,
    /// Indices whose region grew after adding the probe.
    pub r3_violations: Vec<usize>,
    /// Indices whose nonzero restriction vanished after adding a probe
    /// outside the region.
    pub r4_violations: Vec<usize>,
    /// Points whose region collapsed from a rectangle to empty.
    pub collapsed: usize,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.r1_violations.is_empty() && self.r3_violations.is_empty() && self.r4_violations.is_empty()
    }
}

/// Exhaustive check over every configuration point. Intended for small
/// configurations: the cost is quadratic in the size.
///
/// The score checked for the restriction property is the vote indicator
/// `1{x is a k-PNN}`, i.e. the forest score with its weight held fixed.
pub fn check_assumptions(config: &PointConfig, x0: &[f64], k: usize, probe: &[f64]) -> Result<AssumptionReport> {
    check_k(k)?;
    check_dim(config.dim(), x0.len())?;
    check_dim(config.dim(), probe.len())?;
    let mut grown = config.clone();
    grown.push(probe)?;
    let mut report = AssumptionReport {
        points_checked: config.len(),
        ..Default::default()
    };
    for i in 0..config.len() {
        let x = config.point(i);
        let before = region_of(config, x0, x, k)?;
        let after = region_of(&grown, x0, x, k)?;

        let full_vote = count_in_rect_excl(config, x0, x)? < k;
        let restricted_vote = match &before {
            StabilizationRegion::Empty => false,
            StabilizationRegion::Rect { rect } => {
                let inside: Vec<usize> = (0..config.len()).filter(|&q| rect.contains(config.point(q))).collect();
                count_in_rect_excl(&config.select(&inside), x0, x)? < k
            }
        };
        if full_vote != restricted_vote {
            report.r1_violations.push(i);
        }

        if !after.is_subset_of(&before) {
            report.r3_violations.push(i);
        }
        if !before.is_empty() && after.is_empty() {
            report.collapsed += 1;
        }

        // A nonempty region always contains `x` itself, so the restriction
        // is nonzero exactly when the region is.
        if !before.is_empty() && !before.contains(probe) && after.is_empty() {
            report.r4_violations.push(i);
        }
    }
    Ok(report)
}
