//! Stochastic SIS epidemic: `S + I -> 2I` at rate `beta S I`, `I -> S` at
//! rate `gamma I`. Small populations admit an exact likelihood through the
//! matrix exponential of the generator, which serves as the reference
//! posterior for the convergence studies.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;

use super::data::TimeSeriesData;
use super::ssa::{ssa_observe, ReactionNetwork};
use crate::error::{Error, Result};
use crate::mlmc::lattice::{Lattice, LatticeCdf};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SisParameters {
    pub beta: f64,
    pub gamma: f64,
}

impl SisParameters {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta >= 0.0 && gamma >= 0.0) || !beta.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidModel(format!(
                "SIS rates must be finite and nonnegative (beta={beta}, gamma={gamma})"
            )));
        }
        Ok(SisParameters { beta, gamma })
    }
}

/// Reaction network over `(S, I)`.
#[derive(Clone, Copy, Debug)]
pub struct SisNetwork(pub SisParameters);

impl ReactionNetwork for SisNetwork {
    fn species(&self) -> usize {
        2
    }

    fn reactions(&self) -> usize {
        2
    }

    fn hazards(&self, s: &[i64], out: &mut [f64]) {
        let (sus, inf) = (s[0] as f64, s[1] as f64);
        out[0] = self.0.beta * sus * inf;
        out[1] = self.0.gamma * inf;
    }

    fn fire(&self, reaction: usize, s: &mut [i64]) {
        if reaction == 0 {
            s[0] -= 1;
            s[1] += 1;
        } else {
            s[0] += 1;
            s[1] -= 1;
        }
    }
}

/// Observation times 4, 8, ..., 40.
pub fn default_obs_times() -> Vec<f64> {
    (1..=10).map(|i| 4.0 * i as f64).collect()
}

/// Simulates one path and records the susceptible count at `obs_times`.
pub fn sis_simulate<R: Rng + ?Sized>(
    params: SisParameters,
    s0: u32,
    i0: u32,
    obs_times: &[f64],
    rng: &mut R,
) -> Result<TimeSeriesData> {
    sis_simulate_counted(params, s0, i0, obs_times, rng).map(|(d, _)| d)
}

/// As [`sis_simulate`], also returning the number of events fired.
pub fn sis_simulate_counted<R: Rng + ?Sized>(
    params: SisParameters,
    s0: u32,
    i0: u32,
    obs_times: &[f64],
    rng: &mut R,
) -> Result<(TimeSeriesData, u64)> {
    if obs_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("observation times must be strictly increasing".into()));
    }
    let (states, events) = ssa_observe(&SisNetwork(params), &[s0 as i64, i0 as i64], obs_times, rng)?;
    let values = states.iter().map(|s| s[0] as u32).collect();
    Ok((TimeSeriesData::new(obs_times.to_vec(), values)?, events))
}

/// Tridiagonal generator over `S = 0..=n_pop`. Column `y` holds the rates
/// out of state `S = y`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix {
    n_pop: u32,
    /// Rate from `S = y` to `S = y - 1`.
    infection: Vec<f64>,
    /// Rate from `S = y` to `S = y + 1`.
    recovery: Vec<f64>,
    diagonal: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn n_pop(&self) -> u32 {
        self.n_pop
    }

    pub fn dimension(&self) -> usize {
        self.n_pop as usize + 1
    }

    /// Entry `(x, y)`: rate from state `y` to state `x`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        if x == y {
            self.diagonal[y]
        } else if x + 1 == y {
            self.infection[y]
        } else if x == y + 1 {
            self.recovery[y]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        DMatrix::from_fn(n, n, |x, y| self.get(x, y))
    }
}

pub fn sis_generator_matrix(params: SisParameters, n_pop: u32) -> Result<GeneratorMatrix> {
    if n_pop < 1 {
        return Err(Error::InvalidArgument("population must be at least 1".into()));
    }
    let n = n_pop as usize + 1;
    let mut infection = vec![0.0; n];
    let mut recovery = vec![0.0; n];
    let mut diagonal = vec![0.0; n];
    for y in 0..n {
        let s = y as f64;
        let i = (n_pop as usize - y) as f64;
        infection[y] = params.beta * s * i;
        recovery[y] = params.gamma * i;
        diagonal[y] = -(infection[y] + recovery[y]);
    }
    Ok(GeneratorMatrix {
        n_pop,
        infection,
        recovery,
        diagonal,
    })
}

/// Column-stochastic `exp(Q dt)`; entry `(x, y)` is `P(S(t + dt) = x | S(t) = y)`.
pub fn sis_transition_matrix(q: &GeneratorMatrix, dt: f64) -> Result<DMatrix<f64>> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("elapsed time must be nonnegative, got {dt}")));
    }
    let n = q.dimension();
    if dt == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut p = (q.to_dense() * dt).exp();
    for (col_idx, mut col) in p.column_iter_mut().enumerate() {
        let mut sum = 0.0;
        for v in col.iter_mut() {
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite entry in column {col_idx} (dt={dt}, max exit rate={})",
                    q.diagonal.iter().fold(0.0f64, |m, d| m.max(-d))
                )));
            }
            *v = v.clamp(0.0, 1.0);
            sum += *v;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "column {col_idx} sums to {sum} (dt={dt}, max exit rate={})",
                q.diagonal.iter().fold(0.0f64, |m, d| m.max(-d))
            )));
        }
    }
    Ok(p)
}

/// Natural log of the exact likelihood; `-inf` when it is zero.
pub fn sis_exact_log_likelihood(
    params: SisParameters,
    data: &TimeSeriesData,
    s0: u32,
    n_pop: u32,
) -> Result<f64> {
    data.check_population(n_pop)?;
    if s0 > n_pop {
        return Err(Error::InvalidArgument(format!("initial count {s0} exceeds population {n_pop}")));
    }
    let q = sis_generator_matrix(params, n_pop)?;
    let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
    let mut prev_t = 0.0;
    let mut prev_x = s0 as usize;
    let mut log_l = 0.0;
    for (&t, &x) in data.times().iter().zip(data.values()) {
        let dt = t - prev_t;
        if dt < 0.0 {
            return Err(Error::InvalidArgument("observation before the initial time".into()));
        }
        let p = match cache.entry(dt.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(sis_transition_matrix(&q, dt)?),
        };
        log_l += p[(x as usize, prev_x)].ln();
        if log_l == f64::NEG_INFINITY {
            return Ok(log_l);
        }
        prev_t = t;
        prev_x = x as usize;
    }
    Ok(log_l)
}

/// Product of transition probabilities between consecutive observations,
/// starting from `S(0) = s0`.
pub fn sis_exact_likelihood(
    params: SisParameters,
    data: &TimeSeriesData,
    s0: u32,
    n_pop: u32,
) -> Result<f64> {
    sis_exact_log_likelihood(params, data, s0, n_pop).map(f64::exp)
}

/// Root sum of squared differences between two series on the same times.
pub fn sis_discrepancy(observed: &TimeSeriesData, simulated: &TimeSeriesData) -> Result<f64> {
    if observed.len() != simulated.len() {
        return Err(Error::DimensionMismatch {
            expected: observed.len(),
            got: simulated.len(),
        });
    }
    let ss: f64 = observed
        .values()
        .iter()
        .zip(simulated.values())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(ss.sqrt())
}

/// Controls for the posterior quadrature.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    /// Sub-intervals per lattice cell in cells carrying mass.
    pub refine: usize,
    /// Cells whose corner log-densities all fall this far below the maximum
    /// are integrated without refinement.
    pub cutoff_nats: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            refine: 4,
            cutoff_nats: 30.0,
        }
    }
}

/// Exact posterior CDF on `lattice` under a product-uniform prior on
/// `beta in [beta_lo, beta_hi]`, `gamma in [gamma_lo, gamma_hi]`.
///
/// `log_density` is the unnormalised log posterior inside the prior box; it
/// is a parameter so the quadrature can be checked against closed forms.
pub fn posterior_cdf_by_quadrature<F>(
    prior_box: [(f64, f64); 2],
    lattice: &Lattice,
    opts: QuadratureOptions,
    log_density: F,
) -> Result<LatticeCdf>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    use rayon::prelude::*;

    if lattice.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: lattice.dim(),
        });
    }
    let refine = opts.refine.max(1);
    // Breakpoints: prior bounds plus every lattice node strictly inside them.
    let breaks: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            let (a, b) = prior_box[j];
            let mut v = vec![a];
            v.extend(lattice.axis(j).nodes().filter(|&s| s > a && s < b));
            v.push(b);
            v
        })
        .collect();
    let (nx, ny) = (breaks[0].len(), breaks[1].len());
    let coarse: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| log_density(breaks[0][idx / ny], breaks[1][idx % ny]))
        .collect::<Result<_>>()?;
    let max_coarse = coarse.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_coarse == f64::NEG_INFINITY {
        return Err(Error::DegeneratePosterior);
    }
    let at = |a: usize, b: usize| coarse[a * ny + b];

    // Unnormalised cell masses, scaled by exp(-max_coarse).
    let cells: Vec<(usize, usize)> = (0..nx - 1).flat_map(|a| (0..ny - 1).map(move |b| (a, b))).collect();
    let masses: Vec<f64> = cells
        .par_iter()
        .map(|&(a, b)| -> Result<f64> {
            let corners = [at(a, b), at(a + 1, b), at(a, b + 1), at(a + 1, b + 1)];
            let (x0, x1) = (breaks[0][a], breaks[0][a + 1]);
            let (y0, y1) = (breaks[1][b], breaks[1][b + 1]);
            let area = (x1 - x0) * (y1 - y0);
            let peak = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if refine == 1 || peak < max_coarse - opts.cutoff_nats {
                let s: f64 = corners.iter().map(|&c| (c - max_coarse).exp()).sum();
                return Ok(area * s / 4.0);
            }
            let hx = (x1 - x0) / refine as f64;
            let hy = (y1 - y0) / refine as f64;
            let mut sum = 0.0;
            for u in 0..=refine {
                let wu = if u == 0 || u == refine { 0.5 } else { 1.0 };
                for v in 0..=refine {
                    let wv = if v == 0 || v == refine { 0.5 } else { 1.0 };
                    let val = match (u, v) {
                        (0, 0) => corners[0],
                        (u, 0) if u == refine => corners[1],
                        (0, v) if v == refine => corners[2],
                        (u, v) if u == refine && v == refine => corners[3],
                        _ => log_density(x0 + u as f64 * hx, y0 + v as f64 * hy)?,
                    };
                    sum += wu * wv * (val - max_coarse).exp();
                }
            }
            Ok(sum * hx * hy)
        })
        .collect::<Result<_>>()?;

    let total: f64 = masses.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegeneratePosterior);
    }
    // cum[a][b]: mass of [x_0, x_a] x [y_0, y_b].
    let mut cum = vec![0.0; nx * ny];
    for a in 1..nx {
        for b in 1..ny {
            cum[a * ny + b] = masses[(a - 1) * (ny - 1) + (b - 1)] / total + cum[(a - 1) * ny + b]
                + cum[a * ny + b - 1]
                - cum[(a - 1) * ny + b - 1];
        }
    }
    let locate = |j: usize, s: f64| -> Option<usize> {
        // Index of the largest breakpoint <= s; None below the prior box.
        let br = &breaks[j];
        if s < br[0] {
            None
        } else {
            Some(br.partition_point(|&x| x <= s) - 1)
        }
    };
    let values = lattice
        .node_indices()
        .map(|m| {
            let s0 = lattice.axis(0).node(m[0]);
            let s1 = lattice.axis(1).node(m[1]);
            match (locate(0, s0), locate(1, s1)) {
                (Some(a), Some(b)) => cum[a * ny + b].clamp(0.0, 1.0),
                _ => 0.0,
            }
        })
        .collect();
    LatticeCdf::new(lattice.clone(), values)
}

/// Exact SIS posterior CDF under independent uniform priors.
pub fn sis_exact_posterior_cdf(
    prior_box: [(f64, f64); 2],
    data: &TimeSeriesData,
    s0: u32,
    n_pop: u32,
    lattice: &Lattice,
    opts: QuadratureOptions,
) -> Result<LatticeCdf> {
    posterior_cdf_by_quadrature(prior_box, lattice, opts, |beta, gamma| {
        sis_exact_log_likelihood(SisParameters::new(beta, gamma)?, data, s0, n_pop)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_infected_means_no_events() {
        let mut rng = Seed::new(1).rng();
        let p = SisParameters::new(0.5, 0.5).unwrap();
        let (d, ev) = sis_simulate_counted(p, 10, 0, &[1.0, 2.0], &mut rng).unwrap();
        assert_eq!(ev, 0);
        assert_eq!(d.values(), &[10, 10]);
    }

    #[test]
    fn pure_recovery_fires_once() {
        let mut rng = Seed::new(2).rng();
        let p = SisParameters::new(0.0, 0.1).unwrap();
        let (d, ev) = sis_simulate_counted(p, 100, 1, &[1e6], &mut rng).unwrap();
        assert_eq!(ev, 1);
        assert_eq!(d.values(), &[101]);
    }

    #[test]
    fn without_recovery_susceptibles_never_increase() {
        let p = SisParameters::new(0.01, 0.0).unwrap();
        for r in 0..50 {
            let mut rng = Seed::new(3).child(r).rng();
            let d = sis_simulate(p, 50, 2, &default_obs_times(), &mut rng).unwrap();
            assert_eq!(d.len(), 10);
            assert!(d.values().windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn generator_small_case() {
        let (b, g) = (0.3, 0.7);
        let q = sis_generator_matrix(SisParameters::new(b, g).unwrap(), 2).unwrap();
        assert_eq!(q.get(0, 1), b);
        assert_eq!(q.get(2, 1), g);
        assert_abs_diff_eq!(q.get(1, 1), -(b + g));
        for x in 0..3 {
            assert_eq!(q.get(x, 2), 0.0);
        }
    }

    #[test]
    fn transition_at_zero_time_is_identity() {
        let q = sis_generator_matrix(SisParameters::new(0.01, 0.2).unwrap(), 10).unwrap();
        let p = sis_transition_matrix(&q, 0.0).unwrap();
        assert_eq!(p, DMatrix::identity(11, 11));
    }

    #[test]
    fn pure_recovery_absorbs_at_full_population() {
        let q = sis_generator_matrix(SisParameters::new(0.0, 0.5).unwrap(), 20).unwrap();
        let p = sis_transition_matrix(&q, 200.0).unwrap();
        for y in 0..=20 {
            assert!(p[(20, y)] > 1.0 - 1e-9);
        }
    }

    #[test]
    fn two_state_block_matches_closed_form() {
        // With N_pop = 2 and S = 0 or 1, the chain stays in {0, 1} until
        // recovery from S=1 to S=2. The {0,1} block of Q is
        //   [[-2g, b], [2g, -(b+g)]]
        // with eigenvalues solved analytically below.
        let (b, g, t) = (0.8, 0.35, 1.7);
        let q = sis_generator_matrix(SisParameters::new(b, g).unwrap(), 2).unwrap();
        let p = sis_transition_matrix(&q, t).unwrap();
        let m = [[-2.0 * g, b], [2.0 * g, -(b + g)]];
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr / 4.0 - det).sqrt();
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        // exp(Mt) = (e1 (M - l2 I) - e2 (M - l1 I)) / (l1 - l2)
        let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
        for x in 0..2 {
            for y in 0..2 {
                let id = if x == y { 1.0 } else { 0.0 };
                let want = (e1 * (m[x][y] - l2 * id) - e2 * (m[x][y] - l1 * id)) / (l1 - l2);
                assert_abs_diff_eq!(p[(x, y)], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn likelihood_single_observation_at_time_zero() {
        let p = SisParameters::new(0.003, 0.1).unwrap();
        let hit = TimeSeriesData::new(vec![0.0], vec![100]).unwrap();
        let miss = TimeSeriesData::new(vec![0.0], vec![99]).unwrap();
        assert_eq!(sis_exact_likelihood(p, &hit, 100, 101).unwrap(), 1.0);
        assert_eq!(sis_exact_likelihood(p, &miss, 100, 101).unwrap(), 0.0);
    }

    #[test]
    fn likelihood_is_product_of_transition_factors() {
        let params = SisParameters::new(0.02, 0.3).unwrap();
        let n_pop = 15;
        let data = TimeSeriesData::new(vec![0.5, 1.5, 2.0, 3.7], vec![13, 10, 10, 8]).unwrap();
        let q = sis_generator_matrix(params, n_pop).unwrap();
        let mut want = 1.0;
        let (mut pt, mut px) = (0.0, 14usize);
        for (&t, &x) in data.times().iter().zip(data.values()) {
            want *= sis_transition_matrix(&q, t - pt).unwrap()[(x as usize, px)];
            pt = t;
            px = x as usize;
        }
        let got = sis_exact_likelihood(params, &data, 14, n_pop).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1e-300), "{got} vs {want}");
    }

    #[test]
    fn discrepancy_examples() {
        let t = default_obs_times();
        let base = TimeSeriesData::new(t.clone(), vec![50; 10]).unwrap();
        assert_eq!(sis_discrepancy(&base, &base).unwrap(), 0.0);
        let mut v = vec![50; 10];
        v[3] = 51;
        let one = TimeSeriesData::new(t.clone(), v).unwrap();
        assert_eq!(sis_discrepancy(&base, &one).unwrap(), 1.0);
        let mut v = vec![50; 10];
        v[0] = 53;
        v[9] = 46;
        let five = TimeSeriesData::new(t.clone(), v).unwrap();
        assert_eq!(sis_discrepancy(&base, &five).unwrap(), 5.0);
        let short = TimeSeriesData::new(vec![1.0], vec![1]).unwrap();
        assert!(sis_discrepancy(&base, &short).is_err());
    }

    #[test]
    fn flat_density_gives_uniform_prior_cdf() {
        let lattice = Lattice::new(vec![(0.0, 0.06, 7), (0.0, 2.0, 5)]).unwrap();
        let cdf = posterior_cdf_by_quadrature(
            [(0.0, 0.06), (0.0, 2.0)],
            &lattice,
            QuadratureOptions::default(),
            |_, _| Ok(0.0),
        )
        .unwrap();
        for m in lattice.node_indices() {
            let s = lattice.node(&m);
            let want = (s[0] / 0.06) * (s[1] / 2.0);
            assert_abs_diff_eq!(cdf.value(&m), want, epsilon = 1e-12);
        }
    }
}
