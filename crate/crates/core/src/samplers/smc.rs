//! Sequential Monte Carlo ABC over a decreasing threshold schedule.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use super::GaussianKernel;
use crate::abc::{CostCounter, DistanceOracle, ParameterVector, Prior, DEFAULT_BUDGET_CAP};
use crate::error::{Error, Result};
use crate::rng::Seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSummary {
    pub stage: usize,
    pub epsilon: f64,
    pub ess: f64,
    pub weight_sum: f64,
    /// Largest accepted discrepancy; `None` for the prior stage.
    pub max_distance: Option<f64>,
    pub cost: CostCounter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub particles: Vec<ParameterVector>,
    /// Normalised to sum to 1.
    pub weights: Vec<f64>,
    /// Index of the final stage, starting from 1.
    pub stage: usize,
    pub cost: CostCounter,
    pub history: Vec<StageSummary>,
}

impl ParticleEnsemble {
    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.weights)
    }
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    s * s / s2
}

#[derive(Clone, Copy, Debug)]
pub struct SmcOptions {
    pub budget_cap: u64,
}

impl Default for SmcOptions {
    fn default() -> Self {
        SmcOptions {
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Runs the sampler over `schedule = (eps_1, ..., eps_T)`.
///
/// Stage 1 is `n_p` prior draws with equal weights; `eps_1` is not used to
/// filter them. At stage `t >= 2` each particle repeatedly picks an ancestor
/// by weight, perturbs it with the kernel and simulates until the discrepancy
/// is at most `eps_t`. Perturbations outside the prior support are redrawn
/// without simulating.
pub fn smc_abc<O: DistanceOracle + ?Sized>(
    n_p: usize,
    schedule: &[f64],
    kernel: &GaussianKernel,
    prior: &Prior,
    oracle: &O,
    seed: Seed,
    opts: SmcOptions,
) -> Result<ParticleEnsemble> {
    if n_p == 0 || schedule.is_empty() {
        return Err(Error::InvalidArgument("need at least one particle and one stage".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) || !(schedule[schedule.len() - 1] > 0.0) {
        return Err(Error::InvalidArgument("schedule must be positive and strictly decreasing".into()));
    }
    if kernel.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: kernel.dim(),
        });
    }
    let mut rng = seed.child(0).rng();
    let mut particles: Vec<ParameterVector> = (0..n_p).map(|_| prior.sample(&mut rng)).collect();
    let mut weights = vec![1.0 / n_p as f64; n_p];
    let mut cost = CostCounter::default();
    let mut history = vec![StageSummary {
        stage: 1,
        epsilon: schedule[0],
        ess: effective_sample_size(&weights),
        weight_sum: 1.0,
        max_distance: None,
        cost,
    }];
    let used = AtomicU64::new(0);

    for (t, &eps) in schedule.iter().enumerate().skip(1) {
        let stage = t + 1;
        let picker = WeightedIndex::new(&weights).map_err(|_| Error::Degeneracy {
            stage: stage - 1,
            ess: effective_sample_size(&weights),
        })?;
        let prev = &particles;
        let stage_seed = seed.child(stage as u64);
        let moved: Vec<(ParameterVector, f64, u64)> = (0..n_p)
            .into_par_iter()
            .map(|i| -> Result<(ParameterVector, f64, u64)> {
                let mut rng = stage_seed.child(i as u64).rng();
                let mut sims = 0u64;
                loop {
                    let j = picker.sample(&mut rng);
                    let proposal = kernel.sample(&prev[j], &mut rng);
                    if !prior.in_support(&proposal) {
                        continue;
                    }
                    if used.fetch_add(1, Ordering::Relaxed) >= opts.budget_cap {
                        return Err(Error::InvalidArgument(format!(
                            "simulation budget of {} exhausted at stage {stage}",
                            opts.budget_cap
                        )));
                    }
                    let d = oracle.simulate_within(&proposal, eps, &mut rng)?;
                    sims += 1;
                    if d <= eps {
                        return Ok((proposal, d, sims));
                    }
                }
            })
            .collect::<Result<_>>()?;

        let log_prev: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let log_w: Vec<f64> = moved
            .par_iter()
            .map(|(theta, _, _)| -> Result<f64> {
                let mut terms = Vec::with_capacity(n_p);
                for (j, anc) in prev.iter().enumerate() {
                    terms.push(log_prev[j] + kernel.log_density_unnormalised(theta, anc)?);
                }
                Ok(prior.log_density(theta) - log_sum_exp(terms.into_iter()))
            })
            .collect::<Result<_>>()?;
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Degeneracy { stage, ess: 0.0 });
        }
        let raw: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        weights = raw.iter().map(|w| w / total).collect();
        let ess = effective_sample_size(&weights);
        if n_p >= 2 && ess < 1.0 + 1e-9 {
            return Err(Error::Degeneracy { stage, ess });
        }
        let stage_cost: u64 = moved.iter().map(|m| m.2).sum();
        cost.add(stage_cost);
        history.push(StageSummary {
            stage,
            epsilon: eps,
            ess,
            weight_sum: weights.iter().sum(),
            max_distance: Some(moved.iter().map(|m| m.1).fold(0.0, f64::max)),
            cost: CostCounter::new(stage_cost),
        });
        particles = moved.into_iter().map(|m| m.0).collect();
    }
    Ok(ParticleEnsemble {
        particles,
        weights,
        stage: schedule.len(),
        cost,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::FnOracle;
    use rand::Rng;

    fn problem() -> (Prior, impl DistanceOracle) {
        let prior: Prior = "x ~ uniform(0, 1); y ~ uniform(0, 1)".parse().unwrap();
        let o = FnOracle::new(2, |t: &[f64], r: &mut crate::rng::StreamRng| {
            Ok(((t[0] - 0.3).powi(2) + (t[1] - 0.6).powi(2)).sqrt() + 0.05 * r.random::<f64>())
        });
        (prior, o)
    }

    #[test]
    fn single_stage_is_prior_draws() {
        let (prior, o) = problem();
        let k = GaussianKernel::new(&[vec![0.01, 0.0], vec![0.0, 0.01]]).unwrap();
        let e = smc_abc(50, &[0.5], &k, &prior, &o, Seed::new(1), Default::default()).unwrap();
        assert!(e.weights.iter().all(|&w| w == 1.0 / 50.0));
        assert_eq!(e.cost.steps(), 0);
    }

    #[test]
    fn one_particle_keeps_unit_weight() {
        let (prior, o) = problem();
        let k = GaussianKernel::new(&[vec![0.01, 0.0], vec![0.0, 0.01]]).unwrap();
        let e = smc_abc(1, &[1.0, 0.5, 0.2], &k, &prior, &o, Seed::new(2), Default::default()).unwrap();
        assert_eq!(e.weights, vec![1.0]);
    }

    #[test]
    fn stage_invariants_hold() {
        let (prior, o) = problem();
        let k = GaussianKernel::new(&[vec![0.02, 0.0], vec![0.0, 0.02]]).unwrap();
        let sched = [1.0, 0.4, 0.2, 0.1];
        let e = smc_abc(200, &sched, &k, &prior, &o, Seed::new(3), Default::default()).unwrap();
        for s in &e.history {
            assert!((s.weight_sum - 1.0).abs() < 1e-12);
            if let Some(d) = s.max_distance {
                assert!(d <= s.epsilon);
            }
        }
        assert_eq!(e.cost.steps(), e.history.iter().map(|s| s.cost.steps()).sum::<u64>());
        assert!(e.particles.iter().all(|p| prior.in_support(p)));
        let (mx, my) = e
            .particles
            .iter()
            .zip(&e.weights)
            .fold((0.0, 0.0), |(a, b), (p, w)| (a + w * p[0], b + w * p[1]));
        assert!((mx - 0.3).abs() < 0.05 && (my - 0.6).abs() < 0.05);
    }

    #[test]
    fn ancestor_selection_follows_weights() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let picker = WeightedIndex::new(w).unwrap();
        let mut rng = Seed::new(4).rng();
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[picker.sample(&mut rng)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(w)
            .map(|(&c, p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p))
            .sum();
        // 99.9% quantile of chi-square with 3 degrees of freedom.
        assert!(chi2 < 16.27, "{chi2}");
    }

    #[test]
    fn worker_count_does_not_change_the_result() {
        let (prior, o) = problem();
        let k = GaussianKernel::new(&[vec![0.02, 0.0], vec![0.0, 0.02]]).unwrap();
        let run = |w| {
            rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(|| {
                smc_abc(64, &[1.0, 0.3, 0.15], &k, &prior, &o, Seed::new(5), Default::default()).unwrap()
            })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn bad_schedules() {
        let (prior, o) = problem();
        let k = GaussianKernel::new(&[vec![0.02, 0.0], vec![0.0, 0.02]]).unwrap();
        assert!(smc_abc(10, &[1.0, 1.0], &k, &prior, &o, Seed::new(6), Default::default()).is_err());
        assert!(smc_abc(10, &[], &k, &prior, &o, Seed::new(6), Default::default()).is_err());
    }
}
