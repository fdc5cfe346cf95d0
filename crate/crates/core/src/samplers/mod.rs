//! Baseline samplers: MCMC-ABC and SMC-ABC.

mod kernel;
mod mcmc;
mod smc;

pub use kernel::GaussianKernel;
pub use mcmc::{mcmc_abc, MarkovChainTrace};
pub use smc::{effective_sample_size, smc_abc, ParticleEnsemble, SmcOptions, StageSummary};
