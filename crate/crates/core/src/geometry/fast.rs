//! Accelerated k-PNN computation.
//!
//! The space around `x0` is split into its `2^d` closed orthants. Inside an
//! orthant every coordinate is mapped to a key `±q_j` (negation is exact), so
//! `q ∈ Rect(x0, x)` becomes plain componentwise dominance `key(q) <= key(x)`
//! over the points lying in that closed orthant. Points on an orthant face
//! are candidates for every orthant sharing that face; each point is queried
//! only in its home orthant.
//!
//! Dominance counts are computed by one of:
//! - a sorted sweep (`d = 1`: binary search; `d = 2`: Fenwick tree over the
//!   second key; `d >= 3`: sort on the first key and scan with early exit),
//! - a uniform grid with `d`-dimensional prefix sums, which settles most
//!   points from whole cells and scans only the cells on the query's
//!   boundary. Cell indices are monotone in the keys, so whole-cell counts
//!   never over-count.

use super::fenwick::Fenwick;
use super::{check_k, PointConfig};
use crate::error::{check_dim, Result};

/// Orthants with at least this many candidates use the grid under
/// [`Strategy::Auto`].
const GRID_MIN_CANDIDATES: usize = 2048;

/// Above this dimension the orthant decomposition is abandoned for the
/// quadratic scan.
const MAX_ORTHANT_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Auto,
    Sweep,
    Grid,
}

/// Per-point dominance counts: `count(i) = min(#others in Rect(x0, x_i), cap)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnnCounts {
    cap: usize,
    counts: Vec<u32>,
}

impl PnnCounts {
    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, i: usize) -> usize {
        self.counts[i] as usize
    }

    /// The k-PNN set for any `k <= cap`, as sorted indices.
    pub fn voters(&self, k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= self.cap, "k = {k} outside 1..={}", self.cap);
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| (c as usize) < k)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Accelerated k-PNN set; identical output to [`kpnn_set`].
pub fn kpnn_set_fast(config: &PointConfig, x0: &[f64], k: usize) -> Result<Vec<usize>> {
    check_k(k)?;
    check_dim(config.dim(), x0.len())?;
    if k >= config.len() {
        return Ok((0..config.len()).collect());
    }
    Ok(pnn_counts(config, x0, k)?.voters(k))
}

pub fn pnn_counts(config: &PointConfig, x0: &[f64], cap: usize) -> Result<PnnCounts> {
    pnn_counts_with(config, x0, cap, Strategy::Auto)
}

pub fn pnn_counts_with(config: &PointConfig, x0: &[f64], cap: usize, strategy: Strategy) -> Result<PnnCounts> {
    check_k(cap)?;
    check_dim(config.dim(), x0.len())?;
    let n = config.len();
    let d = config.dim();
    // Counts never exceed n - 1.
    let cap_eff = cap.min(n.max(1)) as u32;
    let mut counts = vec![0u32; n];
    if n == 0 {
        return Ok(PnnCounts { cap, counts });
    }

    if d > MAX_ORTHANT_DIM {
        scan_all(config, x0, cap_eff, &mut counts);
        return Ok(PnnCounts { cap, counts });
    }

    let north = 1usize << d;
    let mut home = vec![0u32; n];
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); north];
    for (i, p) in config.iter().enumerate() {
        let mut h = 0u32;
        let mut tie = 0u32;
        for j in 0..d {
            if p[j] < x0[j] {
                h |= 1 << j;
            } else if p[j] == x0[j] {
                tie |= 1 << j;
            }
        }
        home[i] = h;
        let mut t = tie;
        loop {
            lists[(h | t) as usize].push(i as u32);
            if t == 0 {
                break;
            }
            t = (t - 1) & tie;
        }
    }

    let mut keys = Vec::new();
    let mut homed = Vec::new();
    let mut x0key = vec![0.0; d];
    for (s, members) in lists.iter().enumerate() {
        homed.clear();
        homed.extend(
            members
                .iter()
                .enumerate()
                .filter(|(_, &i)| home[i as usize] as usize == s)
                .map(|(pos, _)| pos),
        );
        if homed.is_empty() {
            continue;
        }
        keys.clear();
        for &i in members {
            let p = config.point(i as usize);
            keys.extend((0..d).map(|j| orient(p[j], s, j)));
        }
        for j in 0..d {
            x0key[j] = orient(x0[j], s, j);
        }
        let orthant = Orthant {
            d,
            members,
            keys: &keys,
            homed: &homed,
            cap: cap_eff,
        };
        let use_grid = d >= 2
            && match strategy {
                Strategy::Grid => true,
                Strategy::Sweep => false,
                Strategy::Auto => members.len() >= GRID_MIN_CANDIDATES,
            };
        if use_grid {
            orthant.grid(&x0key, &mut counts);
        } else {
            match d {
                1 => orthant.sweep1(&mut counts),
                2 => orthant.sweep2(&mut counts),
                _ => orthant.sweep_scan(&mut counts),
            }
        }
    }
    Ok(PnnCounts { cap, counts })
}

#[inline]
fn orient(v: f64, orthant: usize, j: usize) -> f64 {
    // `+ 0.0` folds -0.0 into 0.0 so that sorting and equality agree.
    if orthant >> j & 1 == 1 {
        -v + 0.0
    } else {
        v + 0.0
    }
}

fn scan_all(config: &PointConfig, x0: &[f64], cap: u32, counts: &mut [u32]) {
    let n = config.len();
    for i in 0..n {
        let x = config.point(i);
        let mut c = 0u32;
        for j in 0..n {
            if j != i && super::in_rect(x0, x, config.point(j)) {
                c += 1;
                if c >= cap {
                    break;
                }
            }
        }
        counts[i] = c;
    }
}

struct Orthant<'a> {
    d: usize,
    /// Configuration indices of the candidates (points in the closed orthant).
    members: &'a [u32],
    /// Oriented keys, `members.len() * d`, row-major.
    keys: &'a [f64],
    /// Candidate positions whose home orthant is this one.
    homed: &'a [usize],
    cap: u32,
}

impl Orthant<'_> {
    #[inline]
    fn key(&self, pos: usize) -> &[f64] {
        &self.keys[pos * self.d..(pos + 1) * self.d]
    }

    #[inline]
    fn dominated(&self, q: usize, x: usize) -> bool {
        self.key(q).iter().zip(self.key(x)).all(|(a, b)| a <= b)
    }

    #[inline]
    fn store(&self, counts: &mut [u32], pos: usize, including_self: u32) {
        counts[self.members[pos] as usize] = (including_self - 1).min(self.cap);
    }

    fn sweep1(&self, counts: &mut [u32]) {
        let mut sorted: Vec<f64> = self.keys.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        for &pos in self.homed {
            let kx = self.keys[pos];
            let le = sorted.partition_point(|v| *v <= kx) as u32;
            self.store(counts, pos, le);
        }
    }

    fn sweep2(&self, counts: &mut [u32]) {
        let m = self.members.len();
        let mut order: Vec<u32> = (0..m as u32).collect();
        order.sort_unstable_by(|&p, &q| self.keys[2 * p as usize].total_cmp(&self.keys[2 * q as usize]));
        let mut bs: Vec<f64> = (0..m).map(|p| self.keys[2 * p + 1]).collect();
        bs.sort_unstable_by(f64::total_cmp);
        bs.dedup();
        let rank = |b: f64| bs.partition_point(|v| *v <= b);

        let mut is_homed = vec![false; m];
        for &p in self.homed {
            is_homed[p] = true;
        }
        let mut tree = Fenwick::new(bs.len());
        let mut g0 = 0;
        while g0 < m {
            let a = self.keys[2 * order[g0] as usize];
            let mut g1 = g0;
            while g1 < m && self.keys[2 * order[g1] as usize] == a {
                tree.add(rank(self.keys[2 * order[g1] as usize + 1]));
                g1 += 1;
            }
            for &p in &order[g0..g1] {
                let p = p as usize;
                if is_homed[p] {
                    let le = tree.prefix(rank(self.keys[2 * p + 1]));
                    self.store(counts, p, le);
                }
            }
            g0 = g1;
        }
    }

    fn sweep_scan(&self, counts: &mut [u32]) {
        let d = self.d;
        let m = self.members.len();
        let mut order: Vec<u32> = (0..m as u32).collect();
        order.sort_unstable_by(|&p, &q| self.keys[d * p as usize].total_cmp(&self.keys[d * q as usize]));
        let limit = self.cap + 1;
        for &x in self.homed {
            let ax = self.keys[d * x];
            let mut c = 0u32;
            for &q in &order {
                let q = q as usize;
                if self.keys[d * q] > ax {
                    break;
                }
                if self.dominated(q, x) {
                    c += 1;
                    if c >= limit {
                        break;
                    }
                }
            }
            self.store(counts, x, c);
        }
    }

    fn grid(&self, x0key: &[f64], counts: &mut [u32]) {
        let d = self.d;
        let m = self.members.len();
        let g = ((m as f64 / 2.0).powf(1.0 / d as f64).floor() as usize).max(1);

        let mut span = vec![0.0f64; d];
        for pos in 0..m {
            for (j, s) in span.iter_mut().enumerate() {
                *s = s.max(self.keys[pos * d + j] - x0key[j]);
            }
        }
        let scale: Vec<f64> = span
            .iter()
            .map(|&s| if s > 0.0 { g as f64 / s } else { 0.0 })
            .collect();
        let mut stride = vec![1usize; d];
        for j in 1..d {
            stride[j] = stride[j - 1] * g;
        }
        let ncells = stride[d - 1] * g;

        // Monotone in the key: floor, scaling and subtraction of a constant
        // are all nondecreasing under round-to-nearest.
        let mut cells = vec![0u32; m * d];
        let mut lin = vec![0usize; m];
        for pos in 0..m {
            let mut id = 0;
            for j in 0..d {
                let c = (((self.keys[pos * d + j] - x0key[j]) * scale[j]) as usize).min(g - 1);
                cells[pos * d + j] = c as u32;
                id += c * stride[j];
            }
            lin[pos] = id;
        }

        let mut start = vec![0u32; ncells + 1];
        for &id in &lin {
            start[id + 1] += 1;
        }
        let mut prefix: Vec<u32> = start[1..].to_vec();
        for i in 0..ncells {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut bucket = vec![0u32; m];
        for (pos, &id) in lin.iter().enumerate() {
            bucket[fill[id] as usize] = pos as u32;
            fill[id] += 1;
        }
        for j in 0..d {
            let sj = stride[j];
            for idx in 0..ncells {
                if !(idx / sj).is_multiple_of(g) {
                    prefix[idx] += prefix[idx - sj];
                }
            }
        }

        let limit = self.cap + 1;
        let mut lo = vec![0usize; d];
        let mut hi = vec![0usize; d];
        let mut cur = vec![0usize; d];
        for &x in self.homed {
            let c = &cells[x * d..(x + 1) * d];
            let strict = if c.iter().all(|&v| v > 0) {
                let id: usize = c.iter().zip(&stride).map(|(&v, &s)| (v as usize - 1) * s).sum();
                prefix[id]
            } else {
                0
            };
            if strict >= self.cap {
                counts[self.members[x] as usize] = self.cap;
                continue;
            }

            // Cells below-or-equal to c in every axis and equal in at least
            // one; partitioned by the first axis j where they are equal.
            let mut total = strict;
            'axes: for j in 0..d {
                for i in 0..d {
                    let ci = c[i] as usize;
                    if i < j {
                        if ci == 0 {
                            continue 'axes;
                        }
                        lo[i] = 0;
                        hi[i] = ci - 1;
                    } else if i == j {
                        lo[i] = ci;
                        hi[i] = ci;
                    } else {
                        lo[i] = 0;
                        hi[i] = ci;
                    }
                }
                cur.copy_from_slice(&lo);
                loop {
                    let id: usize = cur.iter().zip(&stride).map(|(v, s)| v * s).sum();
                    for &q in &bucket[start[id] as usize..start[id + 1] as usize] {
                        if self.dominated(q as usize, x) {
                            total += 1;
                            if total >= limit {
                                break 'axes;
                            }
                        }
                    }
                    // odometer
                    let mut axis = 0;
                    loop {
                        if axis == d {
                            continue 'axes;
                        }
                        if cur[axis] < hi[axis] {
                            cur[axis] += 1;
                            break;
                        }
                        cur[axis] = lo[axis];
                        axis += 1;
                    }
                }
            }
            self.store(counts, x, total);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::kpnn_set;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointConfig {
        let flat: Vec<f64> = (0..n * d).map(|_| rng.random()).collect();
        PointConfig::from_flat(d, flat).unwrap()
    }

    #[test]
    fn strategies_agree_with_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let d = 1 + trial % 4;
            let n = rng.random_range(0..120);
            let k = rng.random_range(1..8);
            let c = random_config(&mut rng, n, d);
            let x0: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let want = kpnn_set(&c, &x0, k).unwrap();
            for s in [Strategy::Sweep, Strategy::Grid, Strategy::Auto] {
                let got = pnn_counts_with(&c, &x0, k, s).unwrap().voters(k);
                assert_eq!(got, want, "strategy {s:?} n={n} d={d} k={k}");
            }
        }
    }

    #[test]
    fn grid_handles_lattice_ties() {
        // Many exact ties with each other and with x0 exercise the
        // face-sharing and grouped-sweep logic.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..100 {
            let d = 1 + trial % 3;
            let n = rng.random_range(1..80);
            let flat: Vec<f64> = (0..n * d).map(|_| rng.random_range(0..5) as f64 * 0.25).collect();
            let c = PointConfig::from_flat(d, flat).unwrap();
            let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0..5) as f64 * 0.25).collect();
            for k in 1..6 {
                let want = kpnn_set(&c, &x0, k).unwrap();
                for s in [Strategy::Sweep, Strategy::Grid] {
                    assert_eq!(pnn_counts_with(&c, &x0, k, s).unwrap().voters(k), want, "{s:?} d={d} k={k}");
                }
            }
        }
    }

    #[test]
    fn negative_zero_coordinates() {
        let c = PointConfig::from_points(2, [[-0.0, 0.5], [0.0, 0.25], [0.5, -0.0], [0.25, 0.0]]).unwrap();
        let x0 = [0.0, 0.0];
        for k in 1..4 {
            let want = kpnn_set(&c, &x0, k).unwrap();
            for s in [Strategy::Sweep, Strategy::Grid] {
                assert_eq!(pnn_counts_with(&c, &x0, k, s).unwrap().voters(k), want);
            }
        }
    }

    #[test]
    fn counts_saturate_at_cap() {
        let c = PointConfig::from_points(1, [[0.1], [0.2], [0.3], [0.4]]).unwrap();
        let counts = pnn_counts(&c, &[0.0], 2).unwrap();
        let got: Vec<usize> = (0..4).map(|i| counts.count(i)).collect();
        assert_eq!(got, vec![0, 1, 2, 2]);
        assert_eq!(counts.voters(1), vec![0]);
        assert_eq!(counts.voters(2), vec![0, 1]);
    }

    #[test]
    fn high_dimension_falls_back_to_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_config(&mut rng, 40, 14);
        let x0 = vec![0.5; 14];
        assert_eq!(kpnn_set_fast(&c, &x0, 2).unwrap(), kpnn_set(&c, &x0, 2).unwrap());
    }
}
