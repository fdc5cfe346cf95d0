//! Multilevel estimation of a posterior expectation `E[U(theta)]` that keeps
//! only per-axis marginal CDFs instead of a joint lattice.

use super::estimator::{check_schedule, couple_samples, draw_levels, Coupling, LevelPlan, MlmcOptions};
use super::lattice::{AxisGrid, Lattice, MarginalCdf};
use super::smoothing::{bias_correction, level_cdf};
use crate::abc::{DistanceOracle, ParameterVector, Prior, SampleSet};
use crate::error::{Error, Result};
use crate::rng::Seed;

#[derive(Clone, Debug)]
pub struct MlmcExpectation {
    pub estimate: f64,
    /// `P_1` (level mean) followed by the paired corrections `P_l`.
    pub terms: Vec<f64>,
    pub level_costs: Vec<u64>,
}

impl MlmcExpectation {
    pub fn total_cost(&self) -> u64 {
        self.level_costs.iter().sum()
    }
}

fn column_lattices(grids: &[AxisGrid]) -> Vec<Lattice> {
    grids.iter().map(|g| Lattice::from_axes(vec![*g]).expect("one valid axis")).collect()
}

fn columns(samples: &[ParameterVector], j: usize) -> Vec<[f64; 1]> {
    samples.iter().map(|s| [s[j]]).collect()
}

fn marginal(j: usize, grid: &AxisGrid, values: Vec<f64>) -> Result<MarginalCdf> {
    MarginalCdf::new(j, *grid, values)
}

/// Telescoping estimate from per-level samples. Only `Identity` and
/// `MarginalInversion` couplings are meaningful here.
pub fn assemble_expectation<U: Fn(&[f64]) -> f64>(
    levels: &[Vec<ParameterVector>],
    grids: &[AxisGrid],
    u: U,
    coupling: Coupling,
) -> Result<(f64, Vec<f64>)> {
    let first = levels.first().ok_or(Error::EmptySamples)?;
    if first.is_empty() {
        return Err(Error::EmptySamples.at_level(1));
    }
    let k = grids.len();
    if first[0].len() != k {
        return Err(Error::DimensionMismatch {
            expected: first[0].len(),
            got: k,
        });
    }
    if coupling == Coupling::Independent {
        return Err(Error::InvalidArgument("independent coupling is not supported for expectations".into()));
    }
    let lattices = column_lattices(grids);
    let mean = |s: &[ParameterVector]| s.iter().map(|t| u(t)).sum::<f64>() / s.len() as f64;
    let mut terms = vec![mean(first)];
    let mut acc: Vec<MarginalCdf> = (0..k)
        .map(|j| marginal(j, &grids[j], level_cdf(&columns(first, j), &lattices[j])?.into_values()))
        .collect::<Result<_>>()?;
    for (l, samples) in levels.iter().enumerate().skip(1) {
        let wrap = |e: Error| e.at_level(l + 1);
        let partner = match coupling {
            Coupling::Identity => samples.clone(),
            _ => {
                let level: Vec<MarginalCdf> = (0..k)
                    .map(|j| marginal(j, &grids[j], level_cdf(&columns(samples, j), &lattices[j])?.into_values()))
                    .collect::<Result<_>>()
                    .map_err(wrap)?;
                couple_samples(samples, &level, &acc).map_err(wrap)?
            }
        };
        let p: f64 = samples
            .iter()
            .zip(&partner)
            .map(|(a, b)| if a == b { 0.0 } else { u(a) - u(b) })
            .sum::<f64>()
            / samples.len() as f64;
        terms.push(p);
        acc = (0..k)
            .map(|j| {
                let y = bias_correction(&columns(samples, j), &columns(&partner, j), &lattices[j])?;
                let vals = acc[j].values().iter().zip(y.values()).map(|(a, b)| a + b).collect();
                marginal(j, &grids[j], vals)
            })
            .collect::<Result<_>>()
            .map_err(wrap)?;
    }
    Ok((terms.iter().sum(), terms))
}

/// Draws every level and estimates `E[U]` at the finest threshold.
pub fn mlmc_abc_expectation<U, O>(
    u: U,
    prior: &Prior,
    oracle: &O,
    plan: &LevelPlan,
    grids: &[AxisGrid],
    seed: Seed,
    opts: MlmcOptions,
) -> Result<MlmcExpectation>
where
    U: Fn(&[f64]) -> f64,
    O: DistanceOracle + ?Sized,
{
    check_schedule(&plan.epsilons)?;
    let levels = draw_levels(prior, oracle, &plan.epsilons, &plan.allocations, seed, opts)?;
    let samples: Vec<Vec<ParameterVector>> = levels.iter().map(|s| s.samples.clone()).collect();
    let (estimate, terms) = assemble_expectation(&samples, grids, u, opts.coupling)?;
    Ok(MlmcExpectation {
        estimate,
        terms,
        level_costs: levels.iter().map(|s: &SampleSet| s.cost.steps()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::FnOracle;
    use rand::Rng;

    fn setup() -> (Prior, impl DistanceOracle, Vec<AxisGrid>) {
        let prior: Prior = "x ~ uniform(0, 1); y ~ uniform(0, 2)".parse().unwrap();
        let o = FnOracle::new(2, |t: &[f64], r: &mut crate::rng::StreamRng| {
            Ok((t[0] - 0.3).abs() + (t[1] - 1.2).abs() + 0.05 * r.random::<f64>())
        });
        let grids = vec![AxisGrid::new(0.0, 1.0, 101).unwrap(), AxisGrid::new(0.0, 2.0, 101).unwrap()];
        (prior, o, grids)
    }

    #[test]
    fn constant_functional_is_exact() {
        let (prior, o, grids) = setup();
        let plan = LevelPlan::new(vec![1.0, 0.5, 0.25], vec![200, 100, 50]).unwrap();
        let r = mlmc_abc_expectation(|_| 3.25, &prior, &o, &plan, &grids, Seed::new(1), Default::default()).unwrap();
        assert_eq!(r.estimate, 3.25);
        assert!(r.terms[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_level_is_sample_mean() {
        let (prior, o, grids) = setup();
        let plan = LevelPlan::new(vec![0.6], vec![300]).unwrap();
        let r = mlmc_abc_expectation(|t| t[0], &prior, &o, &plan, &grids, Seed::new(2), Default::default()).unwrap();
        let levels = draw_levels(&prior, &o, &[0.6], &[300], Seed::new(2), Default::default()).unwrap();
        let mean = levels[0].column(0).iter().sum::<f64>() / 300.0;
        assert!((r.estimate - mean).abs() < 1e-12);
    }

    #[test]
    fn identity_coupling_returns_level_one_mean() {
        let (prior, o, grids) = setup();
        let levels = draw_levels(&prior, &o, &[1.0, 0.5], &[200, 100], Seed::new(3), Default::default()).unwrap();
        let s: Vec<_> = levels.iter().map(|l| l.samples.clone()).collect();
        let (e, _) = assemble_expectation(&s, &grids, |t| t[1], Coupling::Identity).unwrap();
        let mean = levels[0].column(1).iter().sum::<f64>() / 200.0;
        assert!((e - mean).abs() < 1e-12);
    }
}
