//! Parameter vectors, priors, cost accounting and the ABC rejection sampler.

mod prior;
mod rejection;

pub use prior::{Prior, PriorComponent};
pub use rejection::{abc_rejection, RejectionOptions, DEFAULT_BUDGET_CAP};

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// A point in parameter space. Components are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("parameter vector needs at least one component".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite parameter in {values:?}")));
        }
        Ok(ParameterVector(values))
    }

    pub(crate) fn new_unchecked(values: Vec<f64>) -> Self {
        ParameterVector(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ParameterVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Axis-aligned box `[lo_j, hi_j]`. Bounds may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidArgument("bounding box needs lo <= hi on every axis".into()));
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn unbounded(dim: usize) -> Self {
        BoundingBox {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(j, &v)| v >= self.lo[j] && v <= self.hi[j])
    }
}

/// Componentwise min and max over a sample set.
pub fn support_bounding_box<T: AsRef<[f64]>>(samples: &[T]) -> Result<BoundingBox> {
    let first = samples.first().ok_or(Error::EmptySamples)?.as_ref();
    let mut lo = first.to_vec();
    let mut hi = first.to_vec();
    for s in samples {
        let s = s.as_ref();
        if s.len() != lo.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: s.len(),
            });
        }
        for j in 0..s.len() {
            lo[j] = lo[j].min(s[j]);
            hi[j] = hi[j].max(s[j]);
        }
    }
    BoundingBox::new(lo, hi)
}

/// Number of data-generation steps (model simulations).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct CostCounter(u64);

impl CostCounter {
    pub fn new(steps: u64) -> Self {
        CostCounter(steps)
    }

    pub fn steps(self) -> u64 {
        self.0
    }

    pub fn add(&mut self, steps: u64) {
        self.0 += steps;
    }

    pub fn merge(self, other: CostCounter) -> CostCounter {
        CostCounter(self.0 + other.0)
    }
}

/// Accepted draws at one threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<ParameterVector>,
    /// Discrepancy of the accepted simulation behind each sample.
    pub distances: Vec<f64>,
    pub epsilon: f64,
    pub cost: CostCounter,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len())
    }

    pub fn bounding_box(&self) -> Result<BoundingBox> {
        support_bounding_box(&self.samples)
    }

    /// Values of component `j` across samples.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[j]).collect()
    }
}

/// Simulates data at `theta` and reports its discrepancy from the observed
/// data. One call is one data-generation step.
pub trait DistanceOracle: Sync {
    fn dim(&self) -> usize;

    fn simulate_distance(&self, theta: &[f64], rng: &mut StreamRng) -> Result<f64>;

    /// Like [`DistanceOracle::simulate_distance`], but may stop early and
    /// return any value above `epsilon` once the outcome exceeds it. The
    /// call still counts as one data-generation step.
    fn simulate_within(&self, theta: &[f64], epsilon: f64, rng: &mut StreamRng) -> Result<f64> {
        let _ = epsilon;
        self.simulate_distance(theta, rng)
    }
}

/// Oracle backed by a closure, mainly for tests and synthetic problems.
pub struct FnOracle<F> {
    dim: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[f64], &mut StreamRng) -> Result<f64> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOracle { dim, f }
    }
}

impl<F> DistanceOracle for FnOracle<F>
where
    F: Fn(&[f64], &mut StreamRng) -> Result<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn simulate_distance(&self, theta: &[f64], rng: &mut StreamRng) -> Result<f64> {
        (self.f)(theta, rng)
    }
}
