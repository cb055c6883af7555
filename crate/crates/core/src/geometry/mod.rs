//! Closed hyperrectangles, dominance counting and k-potential-nearest-neighbor
//! (k-PNN) sets.
//!
//! A configuration point `x` is a k-PNN of a target `x0` when fewer than `k`
//! *other* configuration points lie in the closed box spanned by `x` and `x0`.
//! [`kpnn_set`] is the quadratic reference implementation and [`kpnn_set_fast`]
//! the accelerated path; both return sorted index sets and must agree exactly.
//!
//! Coordinates that tie with a box face count as inside. A configuration
//! point equal to `x0` spans a degenerate box and is therefore always a k-PNN
//! unless duplicates of it are present.

mod fast;
mod fenwick;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use fast::{kpnn_set_fast, pnn_counts, pnn_counts_with, PnnCounts, Strategy};

/// A point in `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point must have at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coordinate {bad}")));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Literal points. Panics on non-finite input.
impl<const N: usize> From<[f64; N]> for Point {
    fn from(a: [f64; N]) -> Self {
        Point::new(a.to_vec()).expect("point literal must be finite and non-empty")
    }
}

/// Closed, axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRect {
    lo: Point,
    hi: Point,
}

impl HyperRect {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        check_dim(lo.dim(), hi.dim())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter("rectangle requires lo <= hi componentwise".into()));
        }
        Ok(HyperRect { lo, hi })
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn hi(&self) -> &Point {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        debug_assert_eq!(q.len(), self.dim());
        self.lo
            .iter()
            .zip(self.hi.iter())
            .zip(q)
            .all(|((l, h), v)| *l <= *v && *v <= *h)
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &HyperRect) -> bool {
        self.dim() == other.dim() && other.contains(&self.lo) && other.contains(&self.hi)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(self.hi.iter()).map(|(l, h)| h - l).product()
    }
}

/// `Rect(a, b)`: the smallest closed box containing both points.
pub fn rect_between(a: &[f64], b: &[f64]) -> Result<HyperRect> {
    check_dim(a.len(), b.len())?;
    let lo = a.iter().zip(b).map(|(x, y)| x.min(*y)).collect();
    let hi = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
    Ok(HyperRect {
        lo: Point::new(lo)?,
        hi: Point::new(hi)?,
    })
}

/// `|a - b| = prod_i |a_i - b_i|`.
pub fn rect_volume(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).product())
}

/// Membership of `q` in `Rect(x0, x)` without materializing the box.
#[inline]
pub fn in_rect(x0: &[f64], x: &[f64], q: &[f64]) -> bool {
    x0.iter().zip(x).zip(q).all(|((a, b), v)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        *lo <= *v && *v <= *hi
    })
}

#[inline]
pub(crate) fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// A finite, indexed set of points of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointConfig {
    dim: usize,
    coords: Vec<f64>,
}

impl PointConfig {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(PointConfig { dim, coords: Vec::new() })
    }

    pub fn with_capacity(dim: usize, n: usize) -> Result<Self> {
        let mut c = Self::new(dim)?;
        c.coords.reserve(n * dim);
        Ok(c)
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: impl IntoIterator<Item = P>) -> Result<Self> {
        let mut c = Self::new(dim)?;
        for p in points {
            c.push(p.as_ref())?;
        }
        Ok(c)
    }

    /// Builds a configuration from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates cannot be split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(PointConfig { dim, coords })
    }

    pub fn push(&mut self, p: &[f64]) -> Result<usize> {
        check_dim(self.dim, p.len())?;
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        self.coords.extend_from_slice(p);
        Ok(self.len() - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// First index whose coordinates are bitwise equal to `x`.
    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.iter().position(|p| bitwise_eq(p, x))
    }

    /// Sub-configuration of the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointConfig {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointConfig { dim: self.dim, coords }
    }
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter("k must be a positive integer".into()))
    } else {
        Ok(())
    }
}

/// Number of configuration points in `Rect(x0, x)`, not counting one
/// occurrence of a point bitwise equal to `x` if the configuration holds one.
pub fn count_in_rect_excl(config: &PointConfig, x0: &[f64], x: &[f64]) -> Result<usize> {
    check_dim(config.dim(), x0.len())?;
    check_dim(config.dim(), x.len())?;
    let mut inside = 0usize;
    let mut self_seen = false;
    for q in config.iter() {
        if !self_seen && bitwise_eq(q, x) {
            self_seen = true;
            continue;
        }
        if in_rect(x0, x, q) {
            inside += 1;
        }
    }
    Ok(inside)
}

/// Whether configuration point `x` is a k-PNN of `x0`.
pub fn is_kpnn(config: &PointConfig, x0: &[f64], x: &[f64], k: usize) -> Result<bool> {
    check_k(k)?;
    check_dim(config.dim(), x.len())?;
    if config.position(x).is_none() {
        return Err(Error::NotInConfig);
    }
    Ok(count_in_rect_excl(config, x0, x)? < k)
}

/// Reference k-PNN set: a direct `O(n^2 d)` scan. Returns sorted indices.
pub fn kpnn_set(config: &PointConfig, x0: &[f64], k: usize) -> Result<Vec<usize>> {
    check_k(k)?;
    check_dim(config.dim(), x0.len())?;
    let n = config.len();
    let mut out = Vec::new();
    for i in 0..n {
        let x = config.point(i);
        let mut others = 0usize;
        for j in 0..n {
            if j != i && in_rect(x0, x, config.point(j)) {
                others += 1;
                if others >= k {
                    break;
                }
            }
        }
        if others < k {
            out.push(i);
        }
    }
    Ok(out)
}
