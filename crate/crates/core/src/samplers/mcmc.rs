//! Metropolis-Hastings ABC with a symmetric Gaussian random walk.

use rand::Rng;

use super::GaussianKernel;
use crate::abc::{CostCounter, DistanceOracle, ParameterVector, Prior};
use crate::error::{Error, Result};
use crate::rng::Seed;

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChainTrace {
    /// `theta^1 ... theta^{N_T}`; the initial state is not included.
    pub states: Vec<ParameterVector>,
    pub accepted: u64,
    /// One step per iteration.
    pub cost: CostCounter,
}

impl MarkovChainTrace {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.states.len().max(1) as f64
    }

    /// States after discarding the first `burn_in`.
    pub fn after_burn_in(&self, burn_in: usize) -> &[ParameterVector] {
        &self.states[burn_in.min(self.states.len())..]
    }
}

/// Runs `n_t` iterations from `init`, which should be an ABC posterior draw.
///
/// Each iteration proposes from the kernel and is charged one data-generation
/// step. Proposals outside the prior support have acceptance probability 0
/// and are not simulated. Otherwise the chain moves when the simulation lands
/// within `epsilon` and a uniform draw falls below the prior ratio.
pub fn mcmc_abc<O: DistanceOracle + ?Sized>(
    init: &[f64],
    kernel: &GaussianKernel,
    prior: &Prior,
    oracle: &O,
    epsilon: f64,
    n_t: usize,
    seed: Seed,
) -> Result<MarkovChainTrace> {
    if kernel.dim() != prior.dim() || init.len() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: if kernel.dim() != prior.dim() { kernel.dim() } else { init.len() },
        });
    }
    if !prior.in_support(init) {
        return Err(Error::InvalidArgument(format!("initial state {init:?} is outside the prior support")));
    }
    let mut rng = seed.rng();
    let mut current = ParameterVector::new(init.to_vec())?;
    let mut states = Vec::with_capacity(n_t);
    let mut accepted = 0u64;
    for _ in 0..n_t {
        let proposal = kernel.sample(&current, &mut rng);
        let h = prior.density_ratio(&proposal, &current)?.min(1.0);
        if h > 0.0 {
            let u: f64 = rng.random();
            let d = oracle.simulate_within(&proposal, epsilon, &mut rng)?;
            if d <= epsilon && u <= h {
                current = proposal;
                accepted += 1;
            }
        }
        states.push(current.clone());
    }
    Ok(MarkovChainTrace {
        states,
        accepted,
        cost: CostCounter::new(n_t as u64),
    })
}
