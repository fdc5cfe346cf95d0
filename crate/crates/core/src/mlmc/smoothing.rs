//! Smoothed orthant indicators and their lattice averages.
//!
//! `g_s(theta) = prod_j xi((theta_j - s_j) / delta_j)` equals 1 when `theta`
//! lies at least one spacing below `s` in every coordinate and 0 when any
//! coordinate lies a spacing above. Along one axis the vector
//! `m -> xi((theta_j - s_m) / delta_j)` steps from 0 to 1 across at most
//! three nodes, so a sample touches O(3^k) entries of a difference array and
//! a prefix sum per axis recovers the lattice field.

use rayon::prelude::*;

use super::lattice::{Lattice, LatticeCdf};
use crate::error::{Error, Result};

/// Cubic step: 1 for `x <= -1`, 0 for `x >= 1`, `5x^3/8 - 9x/8 + 1/2` between.
pub fn smoothing_xi(x: f64) -> f64 {
    if x <= -1.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        (0.625 * x * x - 1.125) * x + 0.5
    }
}

/// `g_s(theta)` for one node `s` with per-axis spacings `delta`.
pub fn smoothed_indicator(theta: &[f64], s: &[f64], delta: &[f64]) -> f64 {
    theta
        .iter()
        .zip(s)
        .zip(delta)
        .map(|((t, s), d)| smoothing_xi((t - s) / d))
        .product()
}

/// Per-axis node profile: 0 below `start`, `vals` on the window, 1 above.
#[derive(Clone, Debug)]
struct Profile {
    start: isize,
    vals: [f64; 6],
    len: usize,
}

impl Profile {
    fn of(x: f64, lo: f64, delta: f64) -> Profile {
        // First node that may sit inside (x - delta, x + delta); one extra
        // node on either side guards against rounding in the floor.
        let start = ((x - delta - lo) / delta).floor() as isize;
        let mut vals = [0.0; 6];
        for (i, v) in vals.iter_mut().enumerate().take(4) {
            let s = lo + (start + i as isize) as f64 * delta;
            *v = smoothing_xi((x - s) / delta);
        }
        Profile { start, vals, len: 4 }
    }

    fn at(&self, m: isize) -> f64 {
        if m < self.start {
            0.0
        } else if m >= self.start + self.len as isize {
            1.0
        } else {
            self.vals[(m - self.start) as usize]
        }
    }

    /// Pointwise product of two profiles.
    fn times(&self, other: &Profile) -> Profile {
        let start = self.start.min(other.start);
        let end = (self.start + self.len as isize).max(other.start + other.len as isize);
        let len = (end - start) as usize;
        if len > 6 {
            // Disjoint windows: the product is 0 up to the later window's end.
            let (late, early) = if self.start > other.start { (self, other) } else { (other, self) };
            let mut p = late.clone();
            for (i, v) in p.vals.iter_mut().enumerate().take(p.len) {
                *v *= early.at(p.start + i as isize);
            }
            return p;
        }
        let mut vals = [0.0; 6];
        for (i, v) in vals.iter_mut().enumerate().take(len) {
            let m = start + i as isize;
            *v = self.at(m) * other.at(m);
        }
        Profile { start, vals, len }
    }

    fn squared(&self) -> Profile {
        let mut p = self.clone();
        for v in p.vals.iter_mut() {
            *v *= *v;
        }
        p
    }

    /// Nonzero first differences on nodes `0..n`, indices below 0 folded
    /// into node 0 and indices past the top dropped.
    fn diffs(&self, n: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let end = self.start + self.len as isize;
        let first = self.start.max(0);
        let last = end.min(n as isize - 1);
        if first > last {
            if end < 0 {
                out.push((0, 1.0));
            }
            return;
        }
        for m in first..=last {
            let prev = if m == 0 { 0.0 } else { self.at(m - 1) };
            let d = self.at(m) - prev;
            if d != 0.0 {
                out.push((m as usize, d));
            }
        }
    }
}

fn profiles(theta: &[f64], lattice: &Lattice) -> Vec<Profile> {
    theta
        .iter()
        .zip(lattice.axes())
        .map(|(&x, a)| Profile::of(x, a.lo(), a.spacing()))
        .collect()
}

/// Adds `weight * prod_j profile_j` into a difference array.
fn scatter(diff: &mut [f64], lattice: &Lattice, ps: &[Profile], weight: f64, scratch: &mut [Vec<(usize, f64)>]) {
    let shape = lattice.shape();
    for (j, p) in ps.iter().enumerate() {
        p.diffs(shape[j], &mut scratch[j]);
        if scratch[j].is_empty() {
            return;
        }
    }
    let strides = lattice.strides();
    let k = ps.len();
    let mut idx = vec![0usize; k];
    loop {
        let mut w = weight;
        let mut f = 0;
        for j in 0..k {
            let (m, d) = scratch[j][idx[j]];
            w *= d;
            f += m * strides[j];
        }
        diff[f] += w;
        // Odometer over the per-axis difference lists.
        let mut j = k;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < scratch[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

fn prefix_sum(values: &mut [f64], lattice: &Lattice) {
    let shape = lattice.shape();
    for (j, &n) in shape.iter().enumerate() {
        let stride = lattice.strides()[j];
        for f in 0..values.len() {
            if (f / stride) % n != 0 {
                values[f] += values[f - stride];
            }
        }
    }
}

/// Fixed chunk size so that summation order never depends on the thread count.
const CHUNK: usize = 256;

/// Sums `term(i, scratch-diff)` contributions over `0..n` in parallel chunks,
/// combining chunk results in index order.
fn accumulate<F>(n: usize, lattice: &Lattice, term: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64], &mut [Vec<(usize, f64)>]) + Sync,
{
    let size = lattice.len();
    let k = lattice.dim();
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut diff = vec![0.0; size];
            let mut scratch = vec![Vec::with_capacity(8); k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                term(i, &mut diff, &mut scratch);
            }
            diff
        })
        .collect();
    let mut total = vec![0.0; size];
    for d in chunks {
        for (t, x) in total.iter_mut().zip(d) {
            *t += x;
        }
    }
    prefix_sum(&mut total, lattice);
    total
}

fn check_dims<T: AsRef<[f64]>>(samples: &[T], lattice: &Lattice) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    match samples.iter().map(AsRef::as_ref).find(|s| s.len() != lattice.dim()) {
        Some(s) => Err(Error::DimensionMismatch {
            expected: lattice.dim(),
            got: s.len(),
        }),
        None => Ok(()),
    }
}

/// Fraction of samples outside the lattice hull.
pub fn out_of_range_fraction<T: AsRef<[f64]>>(samples: &[T], lattice: &Lattice) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| !lattice.contains(s.as_ref())).count() as f64 / samples.len() as f64
}

/// Smoothed eCDF: the mean of `g_s` over samples at every node `s`.
pub fn level_cdf<T: AsRef<[f64]> + Sync>(samples: &[T], lattice: &Lattice) -> Result<LatticeCdf> {
    check_dims(samples, lattice)?;
    let n = samples.len();
    let w = 1.0 / n as f64;
    let values = accumulate(n, lattice, |i, diff, scratch| {
        scatter(diff, lattice, &profiles(samples[i].as_ref(), lattice), w, scratch);
    });
    let frac = out_of_range_fraction(samples, lattice);
    if frac > 0.0 {
        log::warn!("{:.3}% of samples lie outside the lattice range", 100.0 * frac);
    }
    LatticeCdf::new(lattice.clone(), values)
}

/// Weighted smoothed eCDF `sum_i w_i g_s(theta_i) / sum_i w_i`.
pub fn weighted_level_cdf<T: AsRef<[f64]> + Sync>(samples: &[T], weights: &[f64], lattice: &Lattice) -> Result<LatticeCdf> {
    check_dims(samples, lattice)?;
    if weights.len() != samples.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            got: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidArgument("weights must be nonnegative with a positive finite sum".into()));
    }
    let values = accumulate(samples.len(), lattice, |i, diff, scratch| {
        if weights[i] > 0.0 {
            scatter(diff, lattice, &profiles(samples[i].as_ref(), lattice), weights[i] / total, scratch);
        }
    });
    LatticeCdf::new(lattice.clone(), values)
}

/// Paired mean `mean_i [g_s(a_i) - g_s(b_i)]` at every node.
pub fn bias_correction<A: AsRef<[f64]> + Sync, B: AsRef<[f64]> + Sync>(
    level: &[A],
    matched: &[B],
    lattice: &Lattice,
) -> Result<LatticeCdf> {
    check_dims(level, lattice)?;
    check_dims(matched, lattice)?;
    if level.len() != matched.len() {
        return Err(Error::DimensionMismatch {
            expected: level.len(),
            got: matched.len(),
        });
    }
    let n = level.len();
    let w = 1.0 / n as f64;
    let values = accumulate(n, lattice, |i, diff, scratch| {
        if level[i].as_ref() == matched[i].as_ref() {
            return;
        }
        scatter(diff, lattice, &profiles(level[i].as_ref(), lattice), w, scratch);
        scatter(diff, lattice, &profiles(matched[i].as_ref(), lattice), -w, scratch);
    });
    LatticeCdf::new(lattice.clone(), values)
}

/// Per-node unbiased sample variance of `g_s(a_i)`, or of the paired
/// difference `g_s(a_i) - g_s(b_i)` when `paired` is given.
pub fn node_variance<A: AsRef<[f64]> + Sync, B: AsRef<[f64]> + Sync>(
    samples: &[A],
    paired: Option<&[B]>,
    lattice: &Lattice,
) -> Result<LatticeCdf> {
    check_dims(samples, lattice)?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidArgument("variance needs at least two samples".into()));
    }
    if let Some(b) = paired {
        check_dims(b, lattice)?;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
    }
    let mean = match paired {
        Some(b) => bias_correction(samples, b, lattice)?,
        None => level_cdf(samples, lattice)?,
    };
    // Mean of squares: g(a)^2 - 2 g(a) g(b) + g(b)^2, each a tensor product.
    let w = 1.0 / n as f64;
    let sq = accumulate(n, lattice, |i, diff, scratch| {
        if paired.is_some_and(|b| b[i].as_ref() == samples[i].as_ref()) {
            return;
        }
        let pa = profiles(samples[i].as_ref(), lattice);
        let sa: Vec<Profile> = pa.iter().map(Profile::squared).collect();
        scatter(diff, lattice, &sa, w, scratch);
        if let Some(b) = paired {
            let pb = profiles(b[i].as_ref(), lattice);
            let sb: Vec<Profile> = pb.iter().map(Profile::squared).collect();
            let ab: Vec<Profile> = pa.iter().zip(&pb).map(|(x, y)| x.times(y)).collect();
            scatter(diff, lattice, &sb, w, scratch);
            scatter(diff, lattice, &ab, -2.0 * w, scratch);
        }
    });
    let scale = n as f64 / (n - 1) as f64;
    let values = sq
        .iter()
        .zip(mean.values())
        .map(|(s, m)| (scale * (s - m * m)).max(0.0))
        .collect();
    LatticeCdf::new(lattice.clone(), values)
}
