//! Replicated runs of one configured sampler with CSV artifacts.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Problem, SamplerKind};
use super::csvio::{fmt_f64, SampleTable};
use super::metrics::rmse_from_errors;
use super::reference::{build_reference, experiment_lattice, Reference};
use crate::abc::{abc_rejection, ParameterVector, Prior, RejectionOptions, DEFAULT_BUDGET_CAP};
use crate::error::{Error, Result};
use crate::mlmc::{
    assemble_cdf, level_cdf, mlmc_abc_cdf, monotonicity_adjust, optimal_allocation, trial_run, weighted_level_cdf,
    AllocationOptions, Coupling, Lattice, LatticeCdf, LevelPlan, MlmcOptions,
};
use crate::rng::Seed;
use crate::samplers::{mcmc_abc, smc_abc, GaussianKernel, ParticleEnsemble, SmcOptions};

/// Resolved sampler parameters.
#[derive(Clone, Debug)]
pub enum Plan {
    Rejection { n: usize },
    Mlmc { plan: LevelPlan, opts: MlmcOptions },
    Mcmc { n_t: usize, burn_in: usize, kernel: GaussianKernel },
    Smc { n_p: usize, kernel: GaussianKernel },
}

/// One replication's results.
#[derive(Clone, Debug)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub seed: u64,
    pub n_s: u64,
    /// Per-level (MLMC) or per-stage (SMC) simulation counts.
    pub level_costs: Vec<u64>,
    pub estimate: Option<LatticeCdf>,
    pub error_sup: Option<f64>,
    pub coupling_bias: Option<f64>,
    /// SMC only: weights normalised and thresholds respected at every stage.
    pub invariants_ok: Option<bool>,
    pub samples: Option<SampleTable>,
    /// `ok` or the error that aborted the replication.
    pub status: String,
    pub wall_seconds: f64,
}

/// A configured experiment with its reference, lattice and allocation.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub prior: Prior,
    pub epsilons: Vec<f64>,
    pub lattice: Lattice,
    pub reference: Option<Reference>,
    pub plan: Plan,
    /// Simulations spent in the trial run (not part of any replication).
    pub trial_cost: u64,
}

fn budget(cfg: &ExperimentConfig) -> u64 {
    cfg.sampler.budget_cap.unwrap_or(DEFAULT_BUDGET_CAP)
}

impl Experiment {
    /// Builds the reference (through `cache_dir` when given) and resolves
    /// trial-based allocations.
    pub fn prepare(config: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let problem = config.problem()?;
        let prior = config.prior()?;
        let epsilons = config.epsilons()?;
        let reference = match &config.reference {
            Some(_) => Some(build_reference(config, cache_dir)?),
            None => None,
        };
        let lattice = experiment_lattice(config, reference.as_ref())?;
        let s = &config.sampler;
        let trial_seed = Seed::new(config.seed).named("trial");
        let mlmc_opts = MlmcOptions {
            coupling: s.coupling,
            truncate: s.truncate,
            budget_cap: budget(config),
        };
        let alloc = |fix_last| AllocationOptions {
            min_samples: s.min_samples,
            fix_last,
        };
        let mut trial_cost = 0;
        let plan = match s.kind {
            SamplerKind::Rejection => {
                let eps = *epsilons.last().expect("nonempty");
                let n = match (s.n, s.h) {
                    (Some(n), _) => n,
                    (None, Some(h)) => {
                        let t = trial_run(&prior, &problem, &[eps], s.trial, &lattice, trial_seed, mlmc_opts)?;
                        trial_cost = t.simulations.iter().sum();
                        optimal_allocation(&t, h, alloc(None))?[0]
                    }
                    (None, None) => unreachable!("validated"),
                };
                Plan::Rejection { n }
            }
            SamplerKind::Mlmc => {
                let allocations = match (&s.allocations, s.h) {
                    (Some(a), _) => a.clone(),
                    (None, Some(h)) => {
                        let t = trial_run(&prior, &problem, &epsilons, s.trial, &lattice, trial_seed, mlmc_opts)?;
                        trial_cost = t.simulations.iter().sum();
                        let a = optimal_allocation(&t, h, alloc(s.n_l))?;
                        log::info!("{}: trial variances {:?}, costs {:?}, allocation {a:?}", config.name, t.variances, t.costs);
                        a
                    }
                    (None, None) => unreachable!("validated"),
                };
                Plan::Mlmc {
                    plan: LevelPlan::new(epsilons.clone(), allocations)?,
                    opts: mlmc_opts,
                }
            }
            SamplerKind::Mcmc => Plan::Mcmc {
                n_t: s.n_t.expect("validated"),
                burn_in: s.burn_in,
                kernel: s.kernel()?,
            },
            SamplerKind::Smc => Plan::Smc {
                n_p: s.n_p.expect("validated"),
                kernel: s.kernel()?,
            },
        };
        Ok(Experiment {
            config: config.clone(),
            problem,
            prior,
            epsilons,
            lattice,
            reference,
            plan,
            trial_cost,
        })
    }

    pub fn replication_seed(&self, r: usize) -> Seed {
        Seed::new(self.config.seed).named("replication").child(r as u64)
    }

    fn final_epsilon(&self) -> f64 {
        *self.epsilons.last().expect("nonempty")
    }

    /// Runs replication `r`. Errors are recorded in the outcome.
    pub fn run_replication(&self, r: usize) -> ReplicationOutcome {
        self.run_with_seed(r, self.replication_seed(r))
    }

    /// Runs one replication from an explicit sub-seed.
    pub fn run_with_seed(&self, replication: usize, seed: Seed) -> ReplicationOutcome {
        let start = Instant::now();
        let mut out = ReplicationOutcome {
            replication,
            seed: seed.0,
            n_s: 0,
            level_costs: Vec::new(),
            estimate: None,
            error_sup: None,
            coupling_bias: None,
            invariants_ok: None,
            samples: None,
            status: "ok".into(),
            wall_seconds: 0.0,
        };
        if let Err(e) = self.fill(&mut out, seed) {
            out.status = e.to_string();
        }
        out.wall_seconds = start.elapsed().as_secs_f64();
        out
    }

    fn fill(&self, out: &mut ReplicationOutcome, seed: Seed) -> Result<()> {
        let names = self.prior.names().to_vec();
        let eps = self.final_epsilon();
        let cap = RejectionOptions {
            budget_cap: budget(&self.config),
        };
        let estimate = match &self.plan {
            Plan::Rejection { n } => {
                let set = abc_rejection(&self.prior, None, &self.problem, eps, *n, seed, cap)?;
                out.n_s = set.cost.steps();
                out.level_costs = vec![out.n_s];
                let cdf = monotonicity_adjust(&level_cdf(&set.samples, &self.lattice)?);
                out.samples = Some(SampleTable::new(names, set.samples));
                cdf
            }
            Plan::Mlmc { plan, opts } => {
                let run = mlmc_abc_cdf(&self.prior, &self.problem, plan, &self.lattice, seed, *opts)?;
                out.n_s = run.total_cost();
                out.level_costs = run.level_costs.clone();
                if self.config.sampler.compare_uncoupled {
                    let s: Vec<Vec<ParameterVector>> = run.levels.iter().map(|l| l.samples.clone()).collect();
                    let unc = assemble_cdf(&s, &self.lattice, Coupling::Independent, Some(&s[..s.len() - 1]))?;
                    out.coupling_bias = Some(run.estimate.cdf.sup_distance(&unc.cdf)?);
                }
                let mut table = SampleTable::new(names, Vec::new());
                let mut levels = Vec::new();
                for (l, set) in run.levels.iter().enumerate() {
                    levels.extend(std::iter::repeat_n(l + 1, set.len()));
                    table.samples.extend(set.samples.iter().cloned());
                }
                table.levels = Some(levels);
                out.samples = Some(table);
                run.estimate.cdf
            }
            Plan::Mcmc { n_t, burn_in, kernel } => {
                let init = abc_rejection(&self.prior, None, &self.problem, eps, 1, seed.named("init"), cap)?;
                let trace = mcmc_abc(&init.samples[0], kernel, &self.prior, &self.problem, eps, *n_t, seed.named("chain"))?;
                out.n_s = init.cost.steps() + trace.cost.steps();
                out.level_costs = vec![init.cost.steps(), trace.cost.steps()];
                let kept = trace.after_burn_in(*burn_in);
                let cdf = monotonicity_adjust(&level_cdf(kept, &self.lattice)?);
                out.samples = Some(SampleTable::new(names, kept.to_vec()));
                cdf
            }
            Plan::Smc { n_p, kernel } => {
                let ens = smc_abc(
                    *n_p,
                    &self.epsilons,
                    kernel,
                    &self.prior,
                    &self.problem,
                    seed,
                    SmcOptions {
                        budget_cap: budget(&self.config),
                    },
                )?;
                out.n_s = ens.cost.steps();
                out.level_costs = ens.history.iter().map(|h| h.cost.steps()).collect();
                out.invariants_ok = Some(smc_invariants_hold(&ens, *n_p));
                let cdf = monotonicity_adjust(&weighted_level_cdf(&ens.particles, &ens.weights, &self.lattice)?);
                let mut table = SampleTable::new(names, ens.particles.clone());
                table.weights = Some(ens.weights.clone());
                out.samples = Some(table);
                cdf
            }
        };
        if let Some(r) = &self.reference {
            out.error_sup = Some(estimate.sup_distance(&r.cdf)?);
        }
        out.estimate = Some(estimate);
        Ok(())
    }
}

/// Final weights normalised and nonnegative, particle count kept, and every
/// simulated stage's accepted discrepancies within its threshold.
pub fn smc_invariants_hold(ens: &ParticleEnsemble, n_p: usize) -> bool {
    let sum: f64 = ens.weights.iter().sum();
    ens.particles.len() == n_p
        && ens.weights.len() == n_p
        && ens.weights.iter().all(|w| *w >= 0.0)
        && (sum - 1.0).abs() <= 1e-12
        && ens.history.iter().all(|h| {
            (h.weight_sum - 1.0).abs() <= 1e-12 && h.max_distance.is_none_or(|d| d <= h.epsilon) && h.ess >= 1.0 - 1e-9
        })
}

/// One row of `report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    pub n_s: u64,
    pub level_costs: Vec<u64>,
    pub error_sup: Option<f64>,
    pub coupling_bias: Option<f64>,
    pub status: String,
}

impl From<&ReplicationOutcome> for ReplicationRow {
    fn from(o: &ReplicationOutcome) -> Self {
        ReplicationRow {
            replication: o.replication,
            seed: o.seed,
            n_s: o.n_s,
            level_costs: o.level_costs.clone(),
            error_sup: o.error_sup,
            coupling_bias: o.coupling_bias,
            status: o.status.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub sampler: SamplerKind,
    pub epsilon: f64,
    pub allocations: Vec<usize>,
    pub trial_cost: u64,
    pub rows: Vec<ReplicationRow>,
}

impl RunReport {
    fn ok_rows(&self) -> impl Iterator<Item = &ReplicationRow> {
        self.rows.iter().filter(|r| r.status == "ok")
    }

    /// RMSE over successful replications with a reference.
    pub fn rmse(&self) -> Option<f64> {
        let errs: Vec<f64> = self.ok_rows().filter_map(|r| r.error_sup).collect();
        (!errs.is_empty()).then(|| rmse_from_errors(&errs))
    }

    pub fn mean_cost(&self) -> f64 {
        let (n, s) = self.ok_rows().fold((0usize, 0u64), |(n, s), r| (n + 1, s + r.n_s));
        s as f64 / n.max(1) as f64
    }

    pub fn mean_coupling_bias(&self) -> Option<f64> {
        let b: Vec<f64> = self.ok_rows().filter_map(|r| r.coupling_bias).collect();
        (!b.is_empty()).then(|| b.iter().sum::<f64>() / b.len() as f64)
    }

    pub fn failures(&self) -> usize {
        self.rows.len() - self.ok_rows().count()
    }

    pub fn write_rows<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replication", "seed", "n_s", "level_costs", "error_sup", "coupling_bias", "status"])?;
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.replication.to_string(),
                r.seed.to_string(),
                r.n_s.to_string(),
                r.level_costs.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
                opt(r.error_sup),
                opt(r.coupling_bias),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_rows<R: std::io::Read>(reader: R) -> Result<Vec<ReplicationRow>> {
        let mut rd = csv::Reader::from_reader(reader);
        let bad = |s: &str| Error::Parse(format!("bad report field `{s}`"));
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(s))
            }
        };
        rd.records()
            .map(|rec| {
                let rec = rec?;
                if rec.len() != 7 {
                    return Err(Error::Parse("report rows need 7 fields".into()));
                }
                Ok(ReplicationRow {
                    replication: rec[0].parse().map_err(|_| bad(&rec[0]))?,
                    seed: rec[1].parse().map_err(|_| bad(&rec[1]))?,
                    n_s: rec[2].parse().map_err(|_| bad(&rec[2]))?,
                    level_costs: rec[3]
                        .split(';')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().map_err(|_| bad(s)))
                        .collect::<Result<_>>()?,
                    error_sup: opt(&rec[4])?,
                    coupling_bias: opt(&rec[5])?,
                    status: rec[6].to_string(),
                })
            })
            .collect()
    }
}

/// Header of `summary.csv`.
pub const SUMMARY_HEADER: [&str; 10] = [
    "name",
    "sampler",
    "epsilon",
    "replications",
    "failures",
    "allocations",
    "trial_cost",
    "mean_n_s",
    "rmse",
    "mean_coupling_bias",
];

impl RunReport {
    pub fn summary_record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        vec![
            self.name.clone(),
            format!("{:?}", self.sampler).to_lowercase(),
            fmt_f64(self.epsilon),
            self.rows.len().to_string(),
            self.failures().to_string(),
            self.allocations.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
            self.trial_cost.to_string(),
            fmt_f64(self.mean_cost()),
            opt(self.rmse()),
            opt(self.mean_coupling_bias()),
        ]
    }
}

fn write_marginals<W: Write>(cdf: &LatticeCdf, names: &[String], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["parameter", "node", "value"])?;
    for m in cdf.marginals() {
        for (s, v) in m.grid().nodes().zip(m.values()) {
            w.write_record([names[m.axis()].clone(), fmt_f64(s), fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs every replication and, when `out` is given, writes
///
/// - `config.toml`, `report.csv`, `summary.csv`, `timing.csv`
/// - `rep-NNN/samples.csv`, `rep-NNN/cdf.csv`, `rep-NNN/marginals.csv`
///
/// Everything except `timing.csv` is a deterministic function of the config.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>, cache_dir: Option<&Path>) -> Result<RunReport> {
    let exp = Experiment::prepare(config, cache_dir)?;
    let outcomes: Vec<ReplicationOutcome> =
        (0..config.replications).into_par_iter().map(|r| exp.run_replication(r)).collect();
    for o in outcomes.iter().filter(|o| o.status != "ok") {
        log::warn!("{} replication {}: {}", config.name, o.replication, o.status);
    }
    let report = RunReport {
        name: config.name.clone(),
        sampler: config.sampler.kind,
        epsilon: exp.final_epsilon(),
        allocations: match &exp.plan {
            Plan::Rejection { n } => vec![*n],
            Plan::Mlmc { plan, .. } => plan.allocations.clone(),
            Plan::Mcmc { n_t, .. } => vec![*n_t],
            Plan::Smc { n_p, .. } => vec![*n_p],
        },
        trial_cost: exp.trial_cost,
        rows: outcomes.iter().map(ReplicationRow::from).collect(),
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), config.to_toml()?)?;
        report.write_rows(File::create(dir.join("report.csv"))?)?;
        let mut s = csv::Writer::from_writer(File::create(dir.join("summary.csv"))?);
        s.write_record(SUMMARY_HEADER)?;
        s.write_record(report.summary_record())?;
        s.flush()?;
        let mut t = csv::Writer::from_writer(File::create(dir.join("timing.csv"))?);
        t.write_record(["replication", "wall_seconds"])?;
        for o in &outcomes {
            t.write_record([o.replication.to_string(), format!("{:.3}", o.wall_seconds)])?;
        }
        t.flush()?;
        let names = exp.prior.names();
        for o in &outcomes {
            let rep = dir.join(format!("rep-{:03}", o.replication));
            fs::create_dir_all(&rep)?;
            if let Some(samples) = &o.samples {
                samples.write_csv(File::create(rep.join("samples.csv"))?)?;
            }
            if let Some(cdf) = &o.estimate {
                cdf.write_csv(File::create(rep.join("cdf.csv"))?, names)?;
                write_marginals(cdf, names, File::create(rep.join("marginals.csv"))?)?;
            }
        }
    }
    Ok(report)
}
