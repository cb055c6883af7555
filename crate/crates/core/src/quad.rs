//! Adaptive one-dimensional quadrature: double-exponential rules with
//! recursive bisection until the error estimate meets the budget.

use std::cell::Cell;

use quadrature::double_exponential;

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    pub fn relative(rel: f64) -> Self {
        // A tiny absolute floor keeps integrals that are exactly zero finite.
        Tolerance { abs: 1e-300, rel }
    }
}

/// `∫_a^b f`. Fails when bisection depth is exhausted without meeting `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let bad = Cell::new(false);
    let f = |x: f64| {
        let v = f(x);
        if !v.is_finite() {
            bad.set(true);
        }
        v
    };
    let whole = double_exponential::integrate(f, a, b, tol.abs.max(1e-300));
    if bad.get() || !whole.integral.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    let budget = tol.abs.max(tol.rel * whole.integral.abs());
    if whole.error_estimate <= budget {
        return Ok(whole.integral);
    }
    let total = bisect(&f, a, b, budget, MAX_DEPTH)?;
    if bad.get() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(total)
}

fn bisect<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, budget: f64, depth: u32) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let mut total = 0.0;
    for (lo, hi) in [(a, mid), (mid, b)] {
        let part = double_exponential::integrate(f, lo, hi, 0.5 * budget);
        if !part.integral.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{lo}, {hi}]")));
        }
        if part.error_estimate <= 0.5 * budget {
            total += part.integral;
        } else if depth == 0 || hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) {
            return Err(Error::Quadrature(format!(
                "error estimate {:.3e} above budget {:.3e} on [{lo}, {hi}]",
                part.error_estimate,
                0.5 * budget
            )));
        } else {
            total += bisect(f, lo, hi, 0.5 * budget, depth - 1)?;
        }
    }
    Ok(total)
}
