use mlmc_abc::abc::{abc_rejection, Prior, RejectionOptions};
use mlmc_abc::bench::config::SIS_PRIOR;
use mlmc_abc::bench::metrics::ks_distance;
use mlmc_abc::models::{sis_discrepancy, sis_simulate, SisParameters, SisProblem};
use mlmc_abc::rng::Seed;
use rand::Rng;

fn sis() -> (Prior, SisProblem) {
    (SIS_PRIOR.parse().unwrap(), SisProblem::bundled())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn infinite_threshold_returns_the_prior() {
    let (prior, problem) = sis();
    let set = abc_rejection(&prior, None, &problem, f64::INFINITY, 4000, Seed::new(3), RejectionOptions::default()).unwrap();
    assert_eq!(set.cost.steps(), 4000);
    let mut rng = Seed::new(4).rng();
    for (j, hi) in [(0usize, 0.06), (1, 2.0)] {
        let oracle: Vec<f64> = (0..4000).map(|_| rng.random_range(0.0..hi)).collect();
        assert!(ks_distance(&set.column(j), &oracle) < 0.05);
    }
}

#[test]
fn cost_never_below_sample_count() {
    let (prior, problem) = sis();
    for seed in 0..10 {
        let set = abc_rejection(&prior, None, &problem, 150.0, 50, Seed::new(seed), RejectionOptions::default()).unwrap();
        assert_eq!(set.len(), 50);
        assert!(set.cost.steps() > 50);
        assert!(set.distances.iter().all(|&d| d <= 150.0));
    }
}

#[test]
fn acceptance_rate_falls_with_threshold() {
    let (prior, problem) = sis();
    let schedule = [150.0, 106.0, 75.0, 53.0];
    let rates: Vec<f64> = schedule
        .iter()
        .map(|&eps| {
            let per_seed = (0..10)
                .map(|s| {
                    let set = abc_rejection(&prior, None, &problem, eps, 100, Seed::new(100 + s), RejectionOptions::default()).unwrap();
                    100.0 / set.cost.steps() as f64
                })
                .collect();
            median(per_seed)
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
}

#[test]
fn exhausted_budget_reports_partial_results() {
    let (prior, problem) = sis();
    let err = abc_rejection(&prior, None, &problem, 1.0, 10, Seed::new(1), RejectionOptions { budget_cap: 500 }).unwrap_err();
    assert!(matches!(err, mlmc_abc::Error::BudgetExhausted { cap: 500, .. }), "{err}");
}

/// Marginal ABC posterior CDF of `beta` from per-cell acceptance
/// probabilities estimated by direct simulation at cell midpoints.
fn beta_oracle(eps: f64, cells: usize, sims: usize) -> (Vec<f64>, Vec<f64>) {
    let problem = SisProblem::bundled();
    let obs = problem.observed();
    let (db, dg) = (0.06 / cells as f64, 2.0 / cells as f64);
    let mut rng = Seed::new(77).rng();
    let mut mass = vec![0.0; cells];
    for (i, m) in mass.iter_mut().enumerate() {
        for k in 0..cells {
            let p = SisParameters::new((i as f64 + 0.5) * db, (k as f64 + 0.5) * dg).unwrap();
            let hits = (0..sims)
                .filter(|_| {
                    let sim = sis_simulate(p, problem.s0(), problem.i0(), obs.times(), &mut rng).unwrap();
                    sis_discrepancy(obs, &sim).unwrap() <= eps
                })
                .count();
            *m += hits as f64 / sims as f64;
        }
    }
    let total: f64 = mass.iter().sum();
    let edges: Vec<f64> = (1..=cells).map(|i| i as f64 * db).collect();
    let cdf = mass
        .iter()
        .scan(0.0, |acc, m| {
            *acc += m / total;
            Some(*acc)
        })
        .collect();
    (edges, cdf)
}

#[test]
fn rejection_matches_simulated_abc_posterior() {
    let (prior, problem) = sis();
    let eps = 75.0;
    let n = 10_000;
    let set = abc_rejection(&prior, None, &problem, eps, n, Seed::new(11), RejectionOptions::default()).unwrap();
    let beta = set.column(0);
    let (edges, oracle) = beta_oracle(eps, 24, 200);
    let sup = edges
        .iter()
        .zip(&oracle)
        .map(|(e, f)| (beta.iter().filter(|b| *b <= e).count() as f64 / n as f64 - f).abs())
        .fold(0.0, f64::max);
    // 99% Kolmogorov band for the samples plus slack for the oracle's own
    // Monte Carlo and midpoint error.
    assert!(sup < 1.63 / (n as f64).sqrt() + 0.03, "sup = {sup}");
}
