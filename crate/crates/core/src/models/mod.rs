//! Epidemic simulators, their discrepancy metrics and the exact SIS
//! likelihood.

pub mod data;
pub mod sis;
pub mod problems;
pub mod ssa;
pub mod tb;

pub use data::{ClusterData, TimeSeriesData};
pub use sis::{
    sis_discrepancy, sis_exact_likelihood, sis_exact_log_likelihood, sis_exact_posterior_cdf,
    sis_generator_matrix, sis_simulate, sis_transition_matrix, GeneratorMatrix, QuadratureOptions,
    SisParameters,
};
pub use problems::{SisProblem, TbProblem};
pub use ssa::{ssa_observe, ssa_observe_with, ssa_simulate, ReactionNetwork, StopCondition, Trajectory};
pub use tb::{genetic_diversity, tb_discrepancy, tb_simulate, TbOutcome, TbParameters, TbSettings};
