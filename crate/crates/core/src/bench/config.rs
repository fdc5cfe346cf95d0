//! Experiment configuration.
//!
//! Configs are TOML documents (flat keys with dotted sections); the same
//! schema is accepted as JSON. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abc::{DistanceOracle, Prior};
use crate::error::{Error, Result};
use crate::mlmc::{Coupling, Lattice};
use crate::models::{ClusterData, SisProblem, TbProblem, TbSettings, TimeSeriesData};
use crate::rng::StreamRng;
use crate::samplers::GaussianKernel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Sis,
    Tb,
}

pub const SIS_PRIOR: &str = "beta ~ uniform(0, 0.06); gamma ~ uniform(0, 2)";
pub const TB_PRIOR: &str = "alpha ~ uniform(0, 5); delta ~ uniform(0, alpha); mu ~ normal(0.198, 0.06735)";

/// Observed data and model constants. Every field has a model default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file; the bundled dataset when absent.
    pub path: Option<PathBuf>,
    pub s0: Option<u32>,
    pub i0: Option<u32>,
    pub max_infections: Option<u64>,
    pub subsample: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `eps_l = eps1 * m^(1 - l)`, `l = 1..=levels`.
    Geometric { eps1: f64, m: f64, levels: usize },
    /// `eps_i = eps_t + (eps_{i-1} - eps_t) / 2`, with the last entry set to `eps_t`.
    Recursive { eps1: f64, eps_t: f64, stages: usize },
    Explicit { values: Vec<f64> },
}

/// Expands a schedule spec and checks it is positive and strictly decreasing.
pub fn expand_schedule(spec: &ScheduleSpec) -> Result<Vec<f64>> {
    let eps = match *spec {
        ScheduleSpec::Geometric { eps1, m, levels } => (0..levels).map(|l| eps1 * m.powi(-(l as i32))).collect(),
        ScheduleSpec::Recursive { eps1, eps_t, stages } => {
            let mut v: Vec<f64> = Vec::with_capacity(stages);
            for i in 0..stages {
                v.push(match i {
                    0 => eps1,
                    _ if i + 1 == stages => eps_t,
                    _ => eps_t + (v[i - 1] - eps_t) / 2.0,
                });
            }
            v
        }
        ScheduleSpec::Explicit { ref values } => values.clone(),
    };
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!("schedule {eps:?} must be nonempty, positive and strictly decreasing")));
    }
    Ok(eps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Rejection,
    Mlmc,
    Mcmc,
    Smc,
}

fn default_trial() -> usize {
    100
}

fn default_min_samples() -> usize {
    10
}

fn default_true() -> bool {
    true
}

/// Sampler parameters. Which fields are required depends on `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Rejection: sample count.
    pub n: Option<usize>,
    /// Rejection and MLMC: target RMSE for the trial-based allocation.
    pub h: Option<f64>,
    #[serde(default = "default_trial")]
    pub trial: usize,
    /// MLMC: rescale the allocation so the finest level gets this many.
    pub n_l: Option<usize>,
    /// MLMC: explicit per-level sample counts (no trial run).
    pub allocations: Option<Vec<usize>>,
    #[serde(default = "default_min_samples")]
    pub min_samples: usize,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default = "default_true")]
    pub truncate: bool,
    /// MLMC: also report the gap to the estimator built without coupling.
    #[serde(default)]
    pub compare_uncoupled: bool,
    /// MCMC: chain length.
    pub n_t: Option<usize>,
    #[serde(default)]
    pub burn_in: usize,
    /// SMC: particle count.
    pub n_p: Option<usize>,
    /// Kernel preset name (`naive` or `tuned`).
    pub kernel: Option<String>,
    /// Kernel covariance rows; overrides `kernel`.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub budget_cap: Option<u64>,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind) -> Self {
        SamplerConfig {
            kind,
            n: None,
            h: None,
            trial: default_trial(),
            n_l: None,
            allocations: None,
            min_samples: default_min_samples(),
            coupling: Coupling::default(),
            truncate: true,
            compare_uncoupled: false,
            n_t: None,
            burn_in: 0,
            n_p: None,
            kernel: None,
            covariance: None,
            budget_cap: None,
        }
    }

    pub fn kernel(&self) -> Result<GaussianKernel> {
        match (&self.covariance, &self.kernel) {
            (Some(rows), _) => GaussianKernel::new(rows),
            (None, Some(name)) => GaussianKernel::preset(name),
            (None, None) => Err(Error::Config("sampler needs `kernel` or `covariance`".into())),
        }
    }

    fn validate(&self, levels: usize) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{:?} sampler: {what}", self.kind)))
            }
        };
        match self.kind {
            SamplerKind::Rejection => need(self.n.is_some() != self.h.is_some(), "set exactly one of `n` and `h`")?,
            SamplerKind::Mlmc => {
                need(self.allocations.is_some() != self.h.is_some(), "set exactly one of `allocations` and `h`")?;
                if let Some(a) = &self.allocations {
                    need(a.len() == levels && !a.contains(&0), "`allocations` needs one positive count per level")?;
                }
            }
            SamplerKind::Mcmc => {
                need(self.n_t.is_some_and(|n| n > self.burn_in), "`n_t` must exceed `burn_in`")?;
                self.kernel()?;
            }
            SamplerKind::Smc => {
                need(self.n_p.is_some_and(|n| n >= 1), "`n_p` must be positive")?;
                self.kernel()?;
            }
        }
        if let Some(h) = self.h {
            need(h > 0.0, "`h` must be positive")?;
            need(self.trial >= 2, "`trial` must be at least 2")?;
        }
        Ok(())
    }
}

/// Either explicit axes or a box fitted to the reference samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// `(lo, hi, nodes)` per axis.
    pub axes: Option<Vec<(f64, f64, usize)>>,
    /// Nodes per axis when the lattice is fitted to reference samples.
    pub nodes: Option<usize>,
}

impl LatticeConfig {
    pub fn explicit(axes: Vec<(f64, f64, usize)>) -> Self {
        LatticeConfig { axes: Some(axes), nodes: None }
    }

    pub fn fitted(nodes: usize) -> Self {
        LatticeConfig { axes: None, nodes: Some(nodes) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Exact posterior CDF by quadrature (SIS only).
    Exact,
    /// Large rejection sample at the final threshold.
    Rejection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub kind: ReferenceKind,
    pub n: Option<usize>,
    /// Threshold; the final schedule entry when absent.
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    /// Sub-intervals per lattice cell for the quadrature.
    pub refine: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelId,
    /// Prior declaration; the model default when absent.
    pub prior: Option<String>,
    #[serde(default)]
    pub data: DataConfig,
    pub seed: u64,
    pub replications: usize,
    pub output: Option<PathBuf>,
    pub schedule: ScheduleSpec,
    pub sampler: SamplerConfig,
    pub lattice: LatticeConfig,
    pub reference: Option<ReferenceConfig>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("`replications` must be at least 1".into()));
        }
        let eps = expand_schedule(&self.schedule)?;
        self.sampler.validate(eps.len())?;
        let prior = self.prior()?;
        match (&self.lattice.axes, self.lattice.nodes) {
            (Some(axes), None) => {
                if axes.len() != prior.dim() {
                    return Err(Error::Config(format!("lattice has {} axes, prior has {}", axes.len(), prior.dim())));
                }
                Lattice::new(axes.clone())?;
            }
            (None, Some(n)) if n >= 2 => {
                if !matches!(self.reference, Some(ReferenceConfig { kind: ReferenceKind::Rejection, .. })) {
                    return Err(Error::Config("a fitted lattice needs a rejection reference".into()));
                }
            }
            _ => return Err(Error::Config("lattice needs either `axes` or `nodes` (>= 2)".into())),
        }
        if let Some(r) = &self.reference {
            if r.kind == ReferenceKind::Exact && self.model != ModelId::Sis {
                return Err(Error::Config("exact references exist only for the SIS model".into()));
            }
            if r.kind == ReferenceKind::Rejection && r.n.unwrap_or(0) == 0 {
                return Err(Error::Config("rejection references need `n`".into()));
            }
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Result<Vec<f64>> {
        expand_schedule(&self.schedule)
    }

    pub fn prior(&self) -> Result<Prior> {
        let text = self.prior.as_deref().unwrap_or(match self.model {
            ModelId::Sis => SIS_PRIOR,
            ModelId::Tb => TB_PRIOR,
        });
        text.parse()
    }

    pub fn tb_settings(&self) -> TbSettings {
        let d = TbSettings::default();
        TbSettings {
            max_infections: self.data.max_infections.unwrap_or(d.max_infections),
            subsample_n: self.data.subsample.unwrap_or(d.subsample_n),
            ..d
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        Ok(match self.model {
            ModelId::Sis => {
                let base = SisProblem::bundled();
                let data = match &self.data.path {
                    Some(p) => TimeSeriesData::load(p)?,
                    None => base.observed().clone(),
                };
                Problem::Sis(SisProblem::new(
                    data,
                    self.data.s0.unwrap_or(base.s0()),
                    self.data.i0.unwrap_or(base.i0()),
                )?)
            }
            ModelId::Tb => {
                let data = match &self.data.path {
                    Some(p) => ClusterData::load(p)?,
                    None => ClusterData::tuberculosis_observed(),
                };
                Problem::Tb(TbProblem::new(data, self.tb_settings()))
            }
        })
    }
}

/// A configured inference problem.
#[derive(Clone, Debug)]
pub enum Problem {
    Sis(SisProblem),
    Tb(TbProblem),
}

impl DistanceOracle for Problem {
    fn dim(&self) -> usize {
        match self {
            Problem::Sis(p) => p.dim(),
            Problem::Tb(p) => p.dim(),
        }
    }

    fn simulate_distance(&self, theta: &[f64], rng: &mut StreamRng) -> Result<f64> {
        match self {
            Problem::Sis(p) => p.simulate_distance(theta, rng),
            Problem::Tb(p) => p.simulate_distance(theta, rng),
        }
    }

    fn simulate_within(&self, theta: &[f64], epsilon: f64, rng: &mut StreamRng) -> Result<f64> {
        match self {
            Problem::Sis(p) => p.simulate_within(theta, epsilon, rng),
            Problem::Tb(p) => p.simulate_within(theta, epsilon, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
model = "sis"
seed = 3
replications = 2

[schedule]
kind = "geometric"
eps1 = 75.0
m = 2.0
levels = 3

[sampler]
kind = "mlmc"
h = 0.1

[lattice]
axes = [[0.0, 0.06, 10], [0.0, 2.0, 10]]

[reference]
kind = "exact"
"#;

    #[test]
    fn schedules() {
        let g = expand_schedule(&ScheduleSpec::Geometric { eps1: 75.0, m: 2.0, levels: 3 }).unwrap();
        assert_eq!(g, vec![75.0, 37.5, 18.75]);
        let r = expand_schedule(&ScheduleSpec::Recursive { eps1: 1.0, eps_t: 0.0025, stages: 10 }).unwrap();
        assert_eq!(r[1], 0.0025 + (1.0 - 0.0025) / 2.0);
        assert_eq!(r[9], 0.0025);
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(expand_schedule(&ScheduleSpec::Explicit { values: vec![1.0, 1.0] }).is_err());
        assert!(expand_schedule(&ScheduleSpec::Geometric { eps1: 75.0, m: 0.5, levels: 2 }).is_err());
        assert!(expand_schedule(&ScheduleSpec::Explicit { values: vec![] }).is_err());
    }

    #[test]
    fn toml_and_json_agree() {
        let a = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(a.sampler.trial, 100);
        assert_eq!(a.sampler.coupling, Coupling::MarginalInversion);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(ExperimentConfig::parse(&json).unwrap(), a);
        assert_eq!(ExperimentConfig::parse(&a.to_toml().unwrap()).unwrap(), a);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            SAMPLE.replace("replications = 2", "replications = 0"),
            SAMPLE.replace("m = 2.0", "m = 1.0"),
            SAMPLE.replace("h = 0.1", "h = 0.1\nbogus = 1"),
            SAMPLE.replace("h = 0.1", ""),
            SAMPLE.replace("model = \"sis\"", "model = \"tb\""),
            SAMPLE.replace("[0.0, 2.0, 10]", "[2.0, 0.0, 10]"),
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Config(_)) | Err(Error::InvalidArgument(_))), "{text}");
        }
    }
}
