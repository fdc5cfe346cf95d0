use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::{BoundingBox, CostCounter, DistanceOracle, ParameterVector, Prior, SampleSet};
use crate::error::{Error, Result};
use crate::rng::Seed;

/// Default cap on simulations per sampler call.
pub const DEFAULT_BUDGET_CAP: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug)]
pub struct RejectionOptions {
    pub budget_cap: u64,
}

impl Default for RejectionOptions {
    fn default() -> Self {
        RejectionOptions {
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }
}

struct Slot {
    accepted: Option<(ParameterVector, f64)>,
    cost: u64,
}

/// Draws `n` samples from the ABC posterior at threshold `epsilon`.
///
/// Proposals come from `prior`, or from `prior` restricted to `truncation`
/// when given. Slot `i` uses the stream `seed.child(i)`, so the output does
/// not depend on the number of worker threads.
pub fn abc_rejection<O: DistanceOracle + ?Sized>(
    prior: &Prior,
    truncation: Option<&BoundingBox>,
    oracle: &O,
    epsilon: f64,
    n: usize,
    seed: Seed,
    opts: RejectionOptions,
) -> Result<SampleSet> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    if oracle.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: oracle.dim(),
        });
    }
    let used = AtomicU64::new(0);
    let slots: Vec<Slot> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Slot> {
            let mut rng = seed.child(i as u64).rng();
            let mut cost = 0u64;
            loop {
                if used.fetch_add(1, Ordering::Relaxed) >= opts.budget_cap {
                    return Ok(Slot { accepted: None, cost });
                }
                let theta = match truncation {
                    Some(b) => prior.sample_truncated(b, &mut rng)?,
                    None => prior.sample(&mut rng),
                };
                let d = oracle.simulate_within(&theta, epsilon, &mut rng)?;
                cost += 1;
                if d <= epsilon {
                    return Ok(Slot {
                        accepted: Some((theta, d)),
                        cost,
                    });
                }
            }
        })
        .collect::<Result<_>>()?;

    let total: u64 = slots.iter().map(|s| s.cost).sum();
    let mut samples = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for (theta, d) in slots.into_iter().filter_map(|s| s.accepted) {
        debug_assert!(d <= epsilon);
        samples.push(theta);
        distances.push(d);
    }
    let set = SampleSet {
        samples,
        distances,
        epsilon,
        cost: CostCounter::new(total),
    };
    if set.len() < n {
        return Err(Error::BudgetExhausted {
            cap: opts.budget_cap,
            accepted: set.len(),
            requested: n,
            partial: Box::new(set),
        });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::FnOracle;
    use rand::Rng;

    fn unit() -> Prior {
        "x ~ uniform(0, 1)".parse().unwrap()
    }

    #[test]
    fn infinite_threshold_accepts_everything() {
        let o = FnOracle::new(1, |_: &[f64], _: &mut _| Ok(1e300));
        let s = abc_rejection(&unit(), None, &o, f64::INFINITY, 500, Seed::new(1), Default::default()).unwrap();
        assert_eq!(s.len(), 500);
        assert_eq!(s.cost.steps(), 500);
    }

    #[test]
    fn accepted_samples_meet_the_threshold_and_cost_covers_them() {
        // d = |x - 0.5| + noise; acceptance below 1.
        let o = FnOracle::new(1, |t: &[f64], r: &mut crate::rng::StreamRng| Ok((t[0] - 0.5).abs() + 0.1 * r.random::<f64>()));
        let s = abc_rejection(&unit(), None, &o, 0.1, 300, Seed::new(2), Default::default()).unwrap();
        assert!(s.distances.iter().all(|&d| d <= 0.1));
        assert!(s.cost.steps() > 300);
        assert!(s.samples.iter().all(|t| (t[0] - 0.5).abs() <= 0.1));
    }

    #[test]
    fn budget_cap_returns_partial_results() {
        let o = FnOracle::new(1, |t: &[f64], _: &mut _| Ok(t[0]));
        match abc_rejection(&unit(), None, &o, 1e-9, 10, Seed::new(3), RejectionOptions { budget_cap: 1000 }) {
            Err(Error::BudgetExhausted { cap, requested, partial, .. }) => {
                assert_eq!(cap, 1000);
                assert_eq!(requested, 10);
                assert!(partial.cost.steps() <= 1000);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn identical_for_any_worker_count() {
        let o = FnOracle::new(1, |t: &[f64], r: &mut crate::rng::StreamRng| Ok(t[0] + r.random::<f64>()));
        let run = |w| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .unwrap()
                .install(|| abc_rejection(&unit(), None, &o, 0.4, 200, Seed::new(4), Default::default()).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn bad_arguments() {
        let o = FnOracle::new(1, |_: &[f64], _: &mut _| Ok(0.0));
        assert!(abc_rejection(&unit(), None, &o, 0.0, 1, Seed::new(0), Default::default()).is_err());
        assert!(abc_rejection(&unit(), None, &o, 1.0, 0, Seed::new(0), Default::default()).is_err());
        let o2 = FnOracle::new(2, |_: &[f64], _: &mut _| Ok(0.0));
        assert!(abc_rejection(&unit(), None, &o2, 1.0, 1, Seed::new(0), Default::default()).is_err());
    }
}
