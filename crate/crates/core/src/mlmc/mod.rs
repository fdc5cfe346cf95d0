pub mod estimator;
pub mod expectation;
pub mod lattice;
pub mod smoothing;

pub use estimator::{
    assemble_cdf, couple_samples, draw_levels, mlmc_abc_cdf, optimal_allocation, optimal_allocation_real, trial_run,
    AllocationOptions, Coupling, LevelPlan, MlmcCdf, MlmcOptions, MlmcRun, TrialStats,
};
pub use expectation::{assemble_expectation, mlmc_abc_expectation, MlmcExpectation};
pub use lattice::{monotonicity_adjust, AxisGrid, Lattice, LatticeCdf, MarginalCdf};
pub use smoothing::{bias_correction, level_cdf, node_variance, smoothed_indicator, smoothing_xi, weighted_level_cdf};
