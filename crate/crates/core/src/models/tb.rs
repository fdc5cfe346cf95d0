//! Tuberculosis transmission with genotype mutation.
//!
//! Each case of genotype `i` transmits at rate `alpha`, ends at rate
//! `delta` and mutates at rate `mu`, the latter moving the case to a brand
//! new genotype. Hazards are per case, so totals are `(alpha + delta + mu) I`.
//! Once the infection count reaches a cap, cases are subsampled without
//! replacement and clustered by genotype.

use rand::Rng;

use super::data::ClusterData;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TbParameters {
    pub alpha: f64,
    pub delta: f64,
    pub mu: f64,
}

impl TbParameters {
    pub fn new(alpha: f64, delta: f64, mu: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(alpha) && ok(delta) && ok(mu)) {
            return Err(Error::InvalidModel(format!(
                "TB rates must be finite and nonnegative (alpha={alpha}, delta={delta}, mu={mu})"
            )));
        }
        Ok(TbParameters { alpha, delta, mu })
    }
}

/// Outcome of one TB realisation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TbOutcome {
    /// The infection died out before reaching the cap.
    Extinct,
    Clusters(ClusterData),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TbSettings {
    pub max_infections: u64,
    pub subsample_n: u64,
    /// Cases of the single founding genotype.
    pub initial_infections: u64,
}

impl Default for TbSettings {
    fn default() -> Self {
        TbSettings {
            max_infections: 10_000,
            subsample_n: 473,
            initial_infections: 1,
        }
    }
}

/// Counts per genotype with prefix sums for proportional selection. Slots of
/// extinct genotypes are reused, so storage is bounded by the live count.
struct GenotypeCounts {
    counts: Vec<u64>,
    tree: Vec<u64>,
    free: Vec<usize>,
    total: u64,
}

impl GenotypeCounts {
    fn with_founder(cases: u64) -> Self {
        let mut g = GenotypeCounts {
            counts: Vec::with_capacity(64),
            tree: vec![0; 65],
            free: Vec::new(),
            total: 0,
        };
        g.push(cases);
        g
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    fn push(&mut self, cases: u64) -> usize {
        if let Some(i) = self.free.pop() {
            self.add(i, cases as i64);
            return i;
        }
        if self.counts.len() == self.capacity() {
            let cap = self.capacity() * 2;
            self.tree = vec![0; cap + 1];
            let old = std::mem::take(&mut self.counts);
            self.total = 0;
            for c in old {
                let i = self.counts.len();
                self.counts.push(0);
                self.add(i, c as i64);
            }
        }
        let i = self.counts.len();
        self.counts.push(0);
        self.add(i, cases as i64);
        i
    }

    fn add(&mut self, i: usize, delta: i64) {
        self.counts[i] = (self.counts[i] as i64 + delta) as u64;
        self.total = (self.total as i64 + delta) as u64;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] = (self.tree[k] as i64 + delta) as u64;
            k += k & k.wrapping_neg();
        }
    }

    fn release(&mut self, i: usize) {
        if self.counts[i] == 0 {
            self.free.push(i);
        }
    }

    /// Genotype holding case number `target` (0-based) in genotype order.
    fn find(&self, mut target: u64) -> usize {
        let mut pos = 0;
        let mut step = self.capacity().next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}

/// Runs the embedded jump chain of the process. The stopping rule depends on
/// counts only, so event times are never needed.
pub fn tb_simulate<R: Rng + ?Sized>(
    params: TbParameters,
    settings: TbSettings,
    rng: &mut R,
) -> Result<TbOutcome> {
    tb_simulate_counted(params, settings, rng).map(|(o, _)| o)
}

/// As [`tb_simulate`], also returning the number of events fired.
pub fn tb_simulate_counted<R: Rng + ?Sized>(
    params: TbParameters,
    settings: TbSettings,
    rng: &mut R,
) -> Result<(TbOutcome, u64)> {
    let params = TbParameters::new(params.alpha, params.delta, params.mu)?;
    if settings.subsample_n == 0 {
        return Err(Error::InvalidArgument("subsample size must be positive".into()));
    }
    if settings.initial_infections == 0 {
        return Ok((TbOutcome::Extinct, 0));
    }
    let rate = params.alpha + params.delta + params.mu;
    let mut pop = GenotypeCounts::with_founder(settings.initial_infections);
    let mut events = 0u64;
    while pop.total < settings.max_infections {
        if rate == 0.0 {
            // No reaction can fire: the realisation is complete as it stands.
            break;
        }
        let u = rng.random::<f64>() * rate;
        let genotype = pop.find(rng.random_range(0..pop.total));
        events += 1;
        if u < params.alpha {
            pop.add(genotype, 1);
        } else if u < params.alpha + params.delta {
            pop.add(genotype, -1);
            if pop.total == 0 {
                return Ok((TbOutcome::Extinct, events));
            }
            pop.release(genotype);
        } else {
            pop.add(genotype, -1);
            pop.release(genotype);
            pop.push(1);
        }
    }
    Ok((TbOutcome::Clusters(subsample(&mut pop, settings.subsample_n, rng)?), events))
}

/// Draws `n` cases uniformly without replacement and groups them by genotype.
fn subsample<R: Rng + ?Sized>(pop: &mut GenotypeCounts, n: u64, rng: &mut R) -> Result<ClusterData> {
    let n = n.min(pop.total);
    let mut taken = vec![0u64; pop.counts.len()];
    for _ in 0..n {
        let g = pop.find(rng.random_range(0..pop.total));
        pop.add(g, -1);
        taken[g] += 1;
    }
    ClusterData::new(taken.into_iter().filter(|&c| c > 0).collect())
}

/// Gene diversity `1 - sum(n_i^2) / n^2`.
pub fn genetic_diversity(data: &ClusterData) -> f64 {
    let n = data.n() as f64;
    let ss: f64 = data.cluster_sizes().iter().map(|&c| (c as f64) * (c as f64)).sum();
    1.0 - ss / (n * n)
}

/// `|g(D) - g(Ds)| / n + |H(D) - H(Ds)|`, with `n` from the observed data.
/// Extinct simulations are infinitely far away.
pub fn tb_discrepancy(observed: &ClusterData, simulated: &TbOutcome) -> f64 {
    match simulated {
        TbOutcome::Extinct => f64::INFINITY,
        TbOutcome::Clusters(sim) => {
            let dg = (observed.g() as f64 - sim.g() as f64).abs() / observed.n() as f64;
            dg + (genetic_diversity(observed) - genetic_diversity(sim)).abs()
        }
    }
}
