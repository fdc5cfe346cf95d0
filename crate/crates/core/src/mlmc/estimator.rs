//! The multilevel CDF estimator: level sampling, marginal-matching coupling,
//! telescoping accumulation and sample allocation.

use super::lattice::{monotonicity_adjust, Lattice, LatticeCdf, MarginalCdf};
use super::smoothing::{bias_correction, level_cdf, node_variance, out_of_range_fraction};
use crate::abc::{abc_rejection, DistanceOracle, ParameterVector, Prior, RejectionOptions, SampleSet, DEFAULT_BUDGET_CAP};
use crate::error::{Error, Result};
use crate::rng::Seed;

/// How the level `l - 1` partner of each level `l` sample is produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Componentwise quantile matching against the accumulated marginals.
    #[default]
    MarginalInversion,
    /// Partner equals the sample itself (test hook: every correction is 0).
    Identity,
    /// Partners are an independent sample set at the coarser threshold.
    Independent,
}

#[derive(Clone, Copy, Debug)]
pub struct MlmcOptions {
    pub coupling: Coupling,
    /// Restrict level `l` proposals to the bounding box of level `l - 1`.
    pub truncate: bool,
    pub budget_cap: u64,
}

impl Default for MlmcOptions {
    fn default() -> Self {
        MlmcOptions {
            coupling: Coupling::MarginalInversion,
            truncate: true,
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }
}

/// Thresholds, allocations and (optionally) the trial statistics behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPlan {
    pub epsilons: Vec<f64>,
    pub allocations: Vec<usize>,
    pub trial: Option<TrialStats>,
}

impl LevelPlan {
    pub fn new(epsilons: Vec<f64>, allocations: Vec<usize>) -> Result<Self> {
        check_schedule(&epsilons)?;
        if allocations.len() != epsilons.len() {
            return Err(Error::DimensionMismatch {
                expected: epsilons.len(),
                got: allocations.len(),
            });
        }
        if allocations.contains(&0) {
            return Err(Error::InvalidArgument("every level needs at least one sample".into()));
        }
        Ok(LevelPlan {
            epsilons,
            allocations,
            trial: None,
        })
    }

    pub fn levels(&self) -> usize {
        self.epsilons.len()
    }
}

/// Per-level trial statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialStats {
    /// `v_l`: largest per-node variance of the level-1 statistic or of the
    /// paired correction.
    pub variances: Vec<f64>,
    /// `c_l`: simulations per accepted sample.
    pub costs: Vec<f64>,
    /// `d_l`: simulations run at each level.
    pub simulations: Vec<u64>,
}

pub(crate) fn check_schedule(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidArgument("schedule is empty".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(format!("schedule {eps:?} must be positive and strictly decreasing")));
    }
    Ok(())
}

/// Rejection samples for every level. Level `l > 1` proposals are restricted
/// to the bounding box of the level `l - 1` samples when `opts.truncate` is set.
/// Equal adjacent thresholds are allowed here so that tests can build
/// degenerate schedules.
pub fn draw_levels<O: DistanceOracle + ?Sized>(
    prior: &Prior,
    oracle: &O,
    epsilons: &[f64],
    allocations: &[usize],
    seed: Seed,
    opts: MlmcOptions,
) -> Result<Vec<SampleSet>> {
    if epsilons.len() != allocations.len() || epsilons.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: epsilons.len(),
            got: allocations.len(),
        });
    }
    let mut levels: Vec<SampleSet> = Vec::with_capacity(epsilons.len());
    for (l, (&eps, &n)) in epsilons.iter().zip(allocations).enumerate() {
        let bbox = match levels.last() {
            Some(prev) if opts.truncate => Some(prev.bounding_box()?),
            _ => None,
        };
        let set = abc_rejection(
            prior,
            bbox.as_ref(),
            oracle,
            eps,
            n,
            seed.child(l as u64),
            RejectionOptions {
                budget_cap: opts.budget_cap,
            },
        )
        .map_err(|e| e.at_level(l + 1))?;
        levels.push(set);
    }
    Ok(levels)
}

/// `theta_{l-1,j} = G_{acc,j}(F_{level,j}(theta_{l,j}))` for every component.
pub fn couple_samples(
    level: &[ParameterVector],
    level_marginals: &[MarginalCdf],
    accumulated: &[MarginalCdf],
) -> Result<Vec<ParameterVector>> {
    let k = level_marginals.len();
    if accumulated.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: accumulated.len(),
        });
    }
    if let Some(j) = accumulated.iter().position(MarginalCdf::is_constant) {
        log::warn!("accumulated marginal {j} is constant; matched values collapse to its first node");
    }
    level
        .iter()
        .map(|theta| {
            if theta.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: theta.len(),
                });
            }
            Ok(ParameterVector::new_unchecked(
                (0..k).map(|j| accumulated[j].inverse(level_marginals[j].eval(theta[j]))).collect(),
            ))
        })
        .collect()
}

/// Marginals of a raw level eCDF, made nondecreasing so they can be evaluated.
fn level_marginals(raw: &LatticeCdf) -> Result<Vec<MarginalCdf>> {
    raw.marginals()
        .into_iter()
        .map(|m| MarginalCdf::new(m.axis(), *m.grid(), m.values().to_vec()))
        .collect()
}

/// The assembled estimate and the pieces it was built from.
#[derive(Clone, Debug)]
pub struct MlmcCdf {
    /// Monotonicity-adjusted `F_{eps_L}` estimate.
    pub cdf: LatticeCdf,
    /// `Y_l` for `l >= 2` (index 0 holds the level-1 estimate).
    pub terms: Vec<LatticeCdf>,
    /// Level `l - 1` partners for the level `l` samples; empty for level 1.
    pub partners: Vec<Vec<ParameterVector>>,
    /// Largest fraction of any level's samples outside the lattice.
    pub out_of_range: f64,
}

/// Builds the telescoping estimate from per-level samples.
///
/// `independent` supplies the level `l - 1` partner sets (one per level
/// from 2 to L) and is required exactly when `coupling` is
/// [`Coupling::Independent`].
pub fn assemble_cdf(
    levels: &[Vec<ParameterVector>],
    lattice: &Lattice,
    coupling: Coupling,
    independent: Option<&[Vec<ParameterVector>]>,
) -> Result<MlmcCdf> {
    let first = levels.first().ok_or(Error::EmptySamples)?;
    if coupling == Coupling::Independent && independent.map(<[_]>::len) != Some(levels.len() - 1) {
        return Err(Error::InvalidArgument(
            "independent coupling needs one partner set per level above the first".into(),
        ));
    }
    let mut out_of_range = out_of_range_fraction(first, lattice);
    let f1 = level_cdf(first, lattice).map_err(|e| e.at_level(1))?;
    let mut acc = monotonicity_adjust(&f1);
    let mut terms = vec![f1];
    let mut partners = vec![Vec::new()];
    for (l, samples) in levels.iter().enumerate().skip(1) {
        out_of_range = out_of_range.max(out_of_range_fraction(samples, lattice));
        let partner = match coupling {
            Coupling::Identity => samples.clone(),
            Coupling::Independent => independent.expect("checked above")[l - 1].clone(),
            Coupling::MarginalInversion => {
                let raw = level_cdf(samples, lattice).map_err(|e| e.at_level(l + 1))?;
                couple_samples(samples, &level_marginals(&raw)?, &acc.marginals()).map_err(|e| e.at_level(l + 1))?
            }
        };
        let y = match coupling {
            // Unpaired: the partner set may have a different size.
            Coupling::Independent => level_cdf(samples, lattice)
                .and_then(|a| a.add_scaled(&level_cdf(&partner, lattice)?, -1.0))
                .map_err(|e| e.at_level(l + 1))?,
            _ => bias_correction(samples, &partner, lattice).map_err(|e| e.at_level(l + 1))?,
        };
        acc = monotonicity_adjust(&acc.add_scaled(&y, 1.0)?);
        terms.push(y);
        partners.push(partner);
    }
    if out_of_range > 0.0 {
        log::warn!(
            "up to {:.3}% of a level's samples fall outside the lattice",
            100.0 * out_of_range
        );
    }
    Ok(MlmcCdf {
        cdf: acc,
        terms,
        partners,
        out_of_range,
    })
}

/// A full estimator run with its per-level cost.
#[derive(Clone, Debug)]
pub struct MlmcRun {
    pub estimate: MlmcCdf,
    pub levels: Vec<SampleSet>,
    /// `d_l`, including any independent partner draws.
    pub level_costs: Vec<u64>,
}

impl MlmcRun {
    pub fn total_cost(&self) -> u64 {
        self.level_costs.iter().sum()
    }
}

fn samples_of(levels: &[SampleSet]) -> Vec<Vec<ParameterVector>> {
    levels.iter().map(|s| s.samples.clone()).collect()
}

/// Draws every level and assembles the estimate.
pub fn mlmc_abc_cdf<O: DistanceOracle + ?Sized>(
    prior: &Prior,
    oracle: &O,
    plan: &LevelPlan,
    lattice: &Lattice,
    seed: Seed,
    opts: MlmcOptions,
) -> Result<MlmcRun> {
    check_schedule(&plan.epsilons)?;
    if lattice.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: lattice.dim(),
        });
    }
    let levels = draw_levels(prior, oracle, &plan.epsilons, &plan.allocations, seed, opts)?;
    let mut level_costs: Vec<u64> = levels.iter().map(|s| s.cost.steps()).collect();
    let partners = if opts.coupling == Coupling::Independent {
        // Fresh draws at eps_{l-1}, under the same truncation as level l - 1.
        let mut sets = Vec::new();
        for l in 1..levels.len() {
            let bbox = if opts.truncate && l >= 2 { Some(levels[l - 2].bounding_box()?) } else { None };
            let set = abc_rejection(
                prior,
                bbox.as_ref(),
                oracle,
                plan.epsilons[l - 1],
                plan.allocations[l],
                seed.named("independent").child(l as u64),
                RejectionOptions {
                    budget_cap: opts.budget_cap,
                },
            )
            .map_err(|e| e.at_level(l + 1))?;
            level_costs[l] += set.cost.steps();
            sets.push(set.samples);
        }
        Some(sets)
    } else {
        None
    };
    let estimate = assemble_cdf(&samples_of(&levels), lattice, opts.coupling, partners.as_deref())?;
    Ok(MlmcRun {
        estimate,
        levels,
        level_costs,
    })
}

/// Runs the estimator with `c` samples on every level and records the
/// per-level variance and cost statistics used by [`optimal_allocation`].
pub fn trial_run<O: DistanceOracle + ?Sized>(
    prior: &Prior,
    oracle: &O,
    epsilons: &[f64],
    c: usize,
    lattice: &Lattice,
    seed: Seed,
    opts: MlmcOptions,
) -> Result<TrialStats> {
    if c < 2 {
        return Err(Error::InvalidArgument("trial runs need at least two samples per level".into()));
    }
    let levels = draw_levels(prior, oracle, epsilons, &vec![c; epsilons.len()], seed, opts)?;
    let est = assemble_cdf(&samples_of(&levels), lattice, opts.coupling, None).or_else(|e| match opts.coupling {
        Coupling::Independent => {
            // Use the previous level as the independent partner set.
            let s = samples_of(&levels);
            let partners: Vec<Vec<ParameterVector>> = s[..s.len() - 1].to_vec();
            assemble_cdf(&s, lattice, opts.coupling, Some(&partners))
        }
        _ => Err(e),
    })?;
    let mut variances = Vec::with_capacity(levels.len());
    for (l, set) in levels.iter().enumerate() {
        let v = if l == 0 {
            node_variance(&set.samples, None::<&[ParameterVector]>, lattice)?
        } else {
            node_variance(&set.samples, Some(&est.partners[l][..]), lattice)?
        };
        variances.push(v.values().iter().cloned().fold(0.0, f64::max));
    }
    let simulations: Vec<u64> = levels.iter().map(|s| s.cost.steps()).collect();
    let costs = simulations.iter().map(|&d| d as f64 / c as f64).collect();
    Ok(TrialStats {
        variances,
        costs,
        simulations,
    })
}

/// Continuous allocation `h^-2 sqrt(v_l / c_l) sum_m sqrt(v_m c_m)`.
pub fn optimal_allocation_real(variances: &[f64], costs: &[f64], h: f64) -> Result<Vec<f64>> {
    if variances.len() != costs.len() || variances.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: variances.len(),
            got: costs.len(),
        });
    }
    if costs.iter().any(|c| !(*c > 0.0)) || variances.iter().any(|v| !(*v >= 0.0)) || !(h > 0.0) {
        return Err(Error::InvalidArgument("need positive costs, nonnegative variances and h > 0".into()));
    }
    if variances.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVariance);
    }
    let s: f64 = variances.iter().zip(costs).map(|(v, c)| (v * c).sqrt()).sum();
    Ok(variances.iter().zip(costs).map(|(v, c)| (v / c).sqrt() * s / (h * h)).collect())
}

#[derive(Clone, Copy, Debug)]
pub struct AllocationOptions {
    pub min_samples: usize,
    /// Rescale so that the finest level receives exactly this many samples.
    pub fix_last: Option<usize>,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        AllocationOptions {
            min_samples: 10,
            fix_last: None,
        }
    }
}

/// Integer allocation: the continuous optimum rounded up, optionally
/// rescaled to a prescribed `N_L`, then floored at `min_samples`.
pub fn optimal_allocation(stats: &TrialStats, h: f64, opts: AllocationOptions) -> Result<Vec<usize>> {
    let real = optimal_allocation_real(&stats.variances, &stats.costs, h)?;
    let scaled: Vec<f64> = match opts.fix_last {
        Some(n_l) => {
            let last = real[real.len() - 1];
            if !(last > 0.0) {
                return Err(Error::InvalidArgument("cannot fix N_L: finest-level variance is zero".into()));
            }
            real.iter().map(|n| n * n_l as f64 / last).collect()
        }
        None => real,
    };
    Ok(scaled
        .iter()
        .enumerate()
        .map(|(l, &n)| {
            let n = if opts.fix_last.is_some() && l + 1 == scaled.len() {
                opts.fix_last.unwrap_or(0) as f64
            } else {
                // Guard against 8.000000000001 rounding up to 9.
                (n * (1.0 - 1e-12)).ceil()
            };
            (n as usize).max(opts.min_samples)
        })
        .collect())
}
