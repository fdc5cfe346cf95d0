//! Reference CDFs for error measurement, cached on disk.

use std::fs::File;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Problem, ReferenceKind};
use super::csvio::SampleTable;
use crate::abc::{abc_rejection, support_bounding_box, ParameterVector, PriorComponent, RejectionOptions};
use crate::error::{Error, Result};
use crate::mlmc::{level_cdf, monotonicity_adjust, Lattice, LatticeCdf};
use crate::models::{sis_exact_posterior_cdf, QuadratureOptions};
use crate::rng::Seed;

#[derive(Clone, Debug)]
pub struct Reference {
    pub cdf: LatticeCdf,
    /// The rejection sample behind the CDF, for rejection references.
    pub samples: Option<Vec<ParameterVector>>,
    /// Cache file read or written, if caching was enabled.
    pub cache_file: Option<PathBuf>,
}

impl Reference {
    pub fn lattice(&self) -> &Lattice {
        self.cdf.lattice()
    }
}

fn digest(parts: &[String]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
}

fn data_key(problem: &Problem) -> String {
    match problem {
        Problem::Sis(p) => format!("sis {:?} {:?} {} {}", p.observed().times(), p.observed().values(), p.s0(), p.i0()),
        Problem::Tb(p) => format!("tb {:?} {:?}", p.observed().cluster_sizes(), p.settings()),
    }
}

fn axes_key(axes: &[(f64, f64, usize)]) -> String {
    axes.iter().map(|(a, b, n)| format!("{a:e}:{b:e}:{n}")).collect::<Vec<_>>().join(",")
}

fn rejection_epsilon(cfg: &ExperimentConfig) -> Result<f64> {
    let r = cfg.reference.as_ref().ok_or_else(|| Error::Config("no reference configured".into()))?;
    match r.epsilon {
        Some(e) => Ok(e),
        None => Ok(*cfg.epsilons()?.last().expect("nonempty schedule")),
    }
}

/// Lattice fitted to the bounding box of `samples` with `nodes` per axis.
pub fn fitted_lattice(samples: &[ParameterVector], nodes: usize) -> Result<Lattice> {
    let bbox = support_bounding_box(samples)?;
    Lattice::new(bbox.lo().iter().zip(bbox.hi()).map(|(&l, &h)| (l, h, nodes)).collect())
}

/// Builds (or loads from `cache_dir`) the reference CDF for `cfg`.
pub fn build_reference(cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<Reference> {
    let rc = cfg.reference.as_ref().ok_or_else(|| Error::Config("no reference configured".into()))?;
    let problem = cfg.problem()?;
    let prior = cfg.prior()?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
    }
    match rc.kind {
        ReferenceKind::Exact => {
            let axes = cfg.lattice.axes.clone().ok_or_else(|| Error::Config("exact references need lattice axes".into()))?;
            let lattice = Lattice::new(axes.clone())?;
            let Problem::Sis(sis) = &problem else {
                return Err(Error::Config("exact references exist only for the SIS model".into()));
            };
            let mut prior_box = [(0.0, 0.0); 2];
            for (j, c) in prior.components().iter().enumerate() {
                match *c {
                    PriorComponent::Uniform { a, b } if j < 2 => prior_box[j] = (a, b),
                    _ => return Err(Error::Config("exact SIS references need two independent uniform priors".into())),
                }
            }
            let opts = QuadratureOptions {
                refine: rc.refine.unwrap_or(QuadratureOptions::default().refine),
                ..Default::default()
            };
            let key = digest(&[
                "exact".into(),
                data_key(&problem),
                format!("{prior_box:?}"),
                axes_key(&axes),
                format!("{opts:?}"),
            ]);
            let file = cache_dir.map(|d| d.join(format!("exact-{key}.csv")));
            if let Some(f) = file.as_ref().filter(|f| f.exists()) {
                let (cdf, _) = LatticeCdf::read_csv(File::open(f)?)?;
                if cdf.lattice() == &lattice {
                    return Ok(Reference {
                        cdf,
                        samples: None,
                        cache_file: file,
                    });
                }
                log::warn!("cached reference {} does not match the lattice; rebuilding", f.display());
            }
            let cdf = sis_exact_posterior_cdf(prior_box, sis.observed(), sis.s0(), sis.n_pop(), &lattice, opts)?;
            if let Some(f) = &file {
                cdf.write_csv(File::create(f)?, prior.names())?;
            }
            Ok(Reference {
                cdf,
                samples: None,
                cache_file: file,
            })
        }
        ReferenceKind::Rejection => {
            let n = rc.n.ok_or_else(|| Error::Config("rejection references need `n`".into()))?;
            let eps = rejection_epsilon(cfg)?;
            let seed = rc.seed.unwrap_or(cfg.seed);
            let key = digest(&[
                "rejection".into(),
                data_key(&problem),
                prior.to_string(),
                format!("{eps:e}"),
                n.to_string(),
                seed.to_string(),
            ]);
            let file = cache_dir.map(|d| d.join(format!("reference-{key}.csv")));
            let samples = match file.as_ref().filter(|f| f.exists()) {
                Some(f) => SampleTable::read_csv(File::open(f)?)?.samples,
                None => {
                    let cap = cfg.sampler.budget_cap.unwrap_or(crate::abc::DEFAULT_BUDGET_CAP);
                    let set = abc_rejection(
                        &prior,
                        None,
                        &problem,
                        eps,
                        n,
                        Seed::new(seed).named("reference"),
                        RejectionOptions { budget_cap: cap },
                    )?;
                    if let Some(f) = &file {
                        SampleTable::new(prior.names().to_vec(), set.samples.clone()).write_csv(File::create(f)?)?;
                    }
                    set.samples
                }
            };
            let lattice = match (&cfg.lattice.axes, cfg.lattice.nodes) {
                (Some(axes), _) => Lattice::new(axes.clone())?,
                (None, Some(nodes)) => fitted_lattice(&samples, nodes)?,
                (None, None) => return Err(Error::Config("lattice needs `axes` or `nodes`".into())),
            };
            let cdf = monotonicity_adjust(&level_cdf(&samples, &lattice)?);
            Ok(Reference {
                cdf,
                samples: Some(samples),
                cache_file: file,
            })
        }
    }
}

/// The experiment lattice: explicit axes, or fitted to the reference.
pub fn experiment_lattice(cfg: &ExperimentConfig, reference: Option<&Reference>) -> Result<Lattice> {
    match (&cfg.lattice.axes, reference) {
        (Some(axes), _) => Lattice::new(axes.clone()),
        (None, Some(r)) => Ok(r.lattice().clone()),
        (None, None) => Err(Error::Config("a fitted lattice needs the reference".into())),
    }
}
