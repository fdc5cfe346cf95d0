//! Desk-scale presets for the four benchmark studies.

use super::config::{
    DataConfig, ExperimentConfig, LatticeConfig, ModelId, ReferenceConfig, ReferenceKind, SamplerConfig, SamplerKind,
    ScheduleSpec,
};
use crate::error::{Error, Result};
use crate::mlmc::Coupling;

pub const PRESETS: [&str; 4] = ["fig1", "fig2", "table1", "table2"];

/// A named group of experiments.
#[derive(Clone, Debug)]
pub struct Study {
    pub name: String,
    pub description: String,
    pub configs: Vec<ExperimentConfig>,
}

pub const SIS_EPS1: f64 = 75.0;
/// Threshold ratio between budget points in the convergence study.
pub const FIG1_M: f64 = std::f64::consts::SQRT_2;
pub const FIG1_POINTS: usize = 5;
/// Target RMSE at `eps = 75`; scaled in proportion to the final threshold.
pub const FIG1_H1: f64 = 0.2;
pub const FIG2_EPS_L: f64 = 37.5;
pub const FIG2_M: [f64; 4] = [4.0, 3.0, 2.0, 1.5];
pub const FIG2_SAMPLES: usize = 10_000;
pub const TB_EPS1: f64 = 1.0;
pub const TB_EPS_L: f64 = 0.04;
pub const TB_LEVELS: usize = 6;
pub const TB_NODES: usize = 40;
pub const TB_REFERENCE_N: usize = 10_000;
pub const TB_REFERENCE_SEED: u64 = 20_240_601;

pub fn sis_lattice() -> LatticeConfig {
    LatticeConfig::explicit(vec![(0.0, 0.06, 100), (0.0, 2.0, 100)])
}

fn exact_reference() -> Option<ReferenceConfig> {
    Some(ReferenceConfig {
        kind: ReferenceKind::Exact,
        n: None,
        epsilon: None,
        seed: None,
        refine: None,
    })
}

fn base(name: String, model: ModelId, schedule: ScheduleSpec, sampler: SamplerConfig, seed: u64, reps: usize) -> ExperimentConfig {
    let (lattice, reference) = match model {
        ModelId::Sis => (sis_lattice(), exact_reference()),
        ModelId::Tb => (
            LatticeConfig::fitted(TB_NODES),
            Some(ReferenceConfig {
                kind: ReferenceKind::Rejection,
                n: Some(TB_REFERENCE_N),
                epsilon: Some(TB_EPS_L),
                seed: Some(TB_REFERENCE_SEED),
                refine: None,
            }),
        ),
    };
    ExperimentConfig {
        output: Some(name.clone().into()),
        name,
        model,
        prior: None,
        data: DataConfig::default(),
        seed,
        replications: reps,
        schedule,
        sampler,
        lattice,
        reference,
    }
}

/// Rejection and MLMC at thresholds `75 * m^(1-L)`, `L = 1..=5`, both with
/// target RMSE proportional to the final threshold.
pub fn fig1() -> Study {
    let mut configs = Vec::new();
    for kind in [SamplerKind::Rejection, SamplerKind::Mlmc] {
        for l in 1..=FIG1_POINTS {
            let eps_l = SIS_EPS1 * FIG1_M.powi(1 - l as i32);
            let mut s = SamplerConfig::new(kind);
            s.h = Some(FIG1_H1 * eps_l / SIS_EPS1);
            let schedule = match kind {
                SamplerKind::Rejection => ScheduleSpec::Explicit { values: vec![eps_l] },
                _ => ScheduleSpec::Geometric {
                    eps1: SIS_EPS1,
                    m: FIG1_M,
                    levels: l,
                },
            };
            let name = format!("fig1-{}-L{l}", if kind == SamplerKind::Mlmc { "mlmc" } else { "rejection" });
            configs.push(base(name, ModelId::Sis, schedule, s, 1000 + l as u64, 20));
        }
    }
    Study {
        name: "fig1".into(),
        description: "SIS RMSE against cost: rejection vs MLMC, exact-posterior reference".into(),
        configs,
    }
}

/// Two-level SIS runs ending at `eps = 37.5` with `eps_1 = 37.5 m`, comparing
/// the coupled estimate with the uncoupled one.
pub fn fig2() -> Study {
    let configs = FIG2_M
        .iter()
        .map(|&m| {
            let mut s = SamplerConfig::new(SamplerKind::Mlmc);
            s.allocations = Some(vec![FIG2_SAMPLES; 2]);
            s.coupling = Coupling::MarginalInversion;
            s.compare_uncoupled = true;
            let schedule = ScheduleSpec::Explicit {
                values: vec![FIG2_EPS_L * m, FIG2_EPS_L],
            };
            base(format!("fig2-m{m}"), ModelId::Sis, schedule, s, 2000, 10)
        })
        .collect();
    Study {
        name: "fig2".into(),
        description: "SIS coupling bias against the threshold ratio m".into(),
        configs,
    }
}

fn tb_schedule() -> ScheduleSpec {
    ScheduleSpec::Recursive {
        eps1: TB_EPS1,
        eps_t: TB_EPS_L,
        stages: TB_LEVELS,
    }
}

fn tb_study(name: &str, kernel: &str, description: &str) -> Study {
    let mut configs = Vec::new();
    for n_l in [25, 50, 100] {
        let mut s = SamplerConfig::new(SamplerKind::Mlmc);
        // With n_l fixed the allocation no longer depends on h.
        s.h = Some(0.1);
        s.n_l = Some(n_l);
        configs.push(base(format!("{name}-mlmc-N{n_l}"), ModelId::Tb, tb_schedule(), s, 3000, 10));
    }
    for n_t in [5_000, 10_000, 20_000] {
        let mut s = SamplerConfig::new(SamplerKind::Mcmc);
        s.n_t = Some(n_t);
        s.kernel = Some(kernel.into());
        let schedule = ScheduleSpec::Explicit { values: vec![TB_EPS_L] };
        configs.push(base(format!("{name}-mcmc-N{n_t}"), ModelId::Tb, schedule, s, 3000, 10));
    }
    for n_p in [25, 50, 100] {
        let mut s = SamplerConfig::new(SamplerKind::Smc);
        s.n_p = Some(n_p);
        s.kernel = Some(kernel.into());
        configs.push(base(format!("{name}-smc-N{n_p}"), ModelId::Tb, tb_schedule(), s, 3000, 10));
    }
    Study {
        name: name.into(),
        description: description.into(),
        configs,
    }
}

pub fn table1() -> Study {
    tb_study("table1", "naive", "TB: MLMC vs MCMC vs SMC with the naive kernel")
}

pub fn table2() -> Study {
    tb_study("table2", "tuned", "TB: MLMC vs MCMC vs SMC with the tuned kernel")
}

pub fn preset(name: &str) -> Result<Study> {
    match name {
        "fig1" => Ok(fig1()),
        "fig2" => Ok(fig2()),
        "table1" => Ok(table1()),
        "table2" => Ok(table2()),
        other => Err(Error::Config(format!("unknown preset `{other}` (expected one of {PRESETS:?})"))),
    }
}
