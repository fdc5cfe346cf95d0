//! The two epidemic inference problems as distance oracles.

use super::data::{ClusterData, TimeSeriesData};
use super::sis::{SisNetwork, SisParameters};
use super::ssa::ssa_observe_with;
use super::tb::{tb_discrepancy, tb_simulate, TbParameters, TbSettings};
use crate::abc::DistanceOracle;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// SIS inference for `theta = (beta, gamma)` against a susceptible series.
#[derive(Clone, Debug)]
pub struct SisProblem {
    observed: TimeSeriesData,
    s0: u32,
    i0: u32,
}

impl SisProblem {
    pub fn new(observed: TimeSeriesData, s0: u32, i0: u32) -> Result<Self> {
        observed.check_population(s0 + i0)?;
        if observed.is_empty() {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        Ok(SisProblem { observed, s0, i0 })
    }

    /// The bundled observation series: 100 susceptible, 1 infected at t = 0.
    pub fn bundled() -> Self {
        let data = TimeSeriesData::read_csv(include_str!("../../data/sis_observed.csv").as_bytes())
            .expect("bundled SIS data parses");
        SisProblem::new(data, 100, 1).expect("bundled SIS data is valid")
    }

    pub fn observed(&self) -> &TimeSeriesData {
        &self.observed
    }

    pub fn s0(&self) -> u32 {
        self.s0
    }

    pub fn i0(&self) -> u32 {
        self.i0
    }

    pub fn n_pop(&self) -> u32 {
        self.s0 + self.i0
    }
}

impl DistanceOracle for SisProblem {
    fn dim(&self) -> usize {
        2
    }

    fn simulate_distance(&self, theta: &[f64], rng: &mut StreamRng) -> Result<f64> {
        self.simulate_within(theta, f64::INFINITY, rng)
    }

    /// Stops the path once the running sum of squares passes `epsilon^2`.
    fn simulate_within(&self, theta: &[f64], epsilon: f64, rng: &mut StreamRng) -> Result<f64> {
        let params = SisParameters::new(theta[0], theta[1])?;
        let limit = epsilon * epsilon;
        let obs = self.observed.values();
        let mut ss = 0.0;
        ssa_observe_with(
            &SisNetwork(params),
            &[self.s0 as i64, self.i0 as i64],
            self.observed.times(),
            rng,
            |i, s| {
                let d = s[0] as f64 - obs[i] as f64;
                ss += d * d;
                ss <= limit
            },
        )?;
        Ok(ss.sqrt())
    }
}

/// Tuberculosis inference for `theta = (alpha, delta, mu)`.
#[derive(Clone, Debug)]
pub struct TbProblem {
    observed: ClusterData,
    settings: TbSettings,
}

impl TbProblem {
    pub fn new(observed: ClusterData, settings: TbSettings) -> Self {
        TbProblem { observed, settings }
    }

    pub fn bundled(settings: TbSettings) -> Self {
        TbProblem::new(ClusterData::tuberculosis_observed(), settings)
    }

    pub fn observed(&self) -> &ClusterData {
        &self.observed
    }

    pub fn settings(&self) -> TbSettings {
        self.settings
    }
}

impl DistanceOracle for TbProblem {
    fn dim(&self) -> usize {
        3
    }

    /// Parameters with a negative rate cannot generate data and sit at
    /// infinite distance; the normal prior on `mu` reaches them.
    fn simulate_distance(&self, theta: &[f64], rng: &mut StreamRng) -> Result<f64> {
        if theta.iter().any(|&x| x < 0.0) {
            return Ok(f64::INFINITY);
        }
        let params = TbParameters::new(theta[0], theta[1], theta[2])?;
        let out = tb_simulate(params, self.settings, rng)?;
        Ok(tb_discrepancy(&self.observed, &out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sis::{default_obs_times, sis_simulate};
    use crate::rng::Seed;

    #[test]
    fn sis_oracle_matches_simulate_then_discrepancy() {
        let p = SisProblem::bundled();
        let theta = [0.003, 0.1];
        for r in 0..20 {
            let d = p.simulate_distance(&theta, &mut Seed::new(1).child(r).rng()).unwrap();
            let sim = sis_simulate(
                SisParameters::new(0.003, 0.1).unwrap(),
                100,
                1,
                p.observed().times(),
                &mut Seed::new(1).child(r).rng(),
            )
            .unwrap();
            assert_eq!(d, crate::models::sis::sis_discrepancy(p.observed(), &sim).unwrap());
        }
    }

    #[test]
    fn early_stop_agrees_on_the_acceptance_decision() {
        let p = SisProblem::bundled();
        for r in 0..200 {
            let theta = [0.0003 * (r % 20) as f64, 0.05 * (r / 10) as f64];
            let full = p.simulate_distance(&theta, &mut Seed::new(3).child(r).rng()).unwrap();
            for eps in [10.0, 40.0, 80.0] {
                let cut = p.simulate_within(&theta, eps, &mut Seed::new(3).child(r).rng()).unwrap();
                assert_eq!(full <= eps, cut <= eps);
                if full <= eps {
                    assert_eq!(full, cut);
                }
            }
        }
    }

    #[test]
    fn bundled_sis_series_shape() {
        let p = SisProblem::bundled();
        assert_eq!(p.observed().times(), default_obs_times().as_slice());
        assert_eq!(p.n_pop(), 101);
    }

    #[test]
    fn tb_negative_rate_is_infinitely_far() {
        let p = TbProblem::bundled(TbSettings::default());
        let d = p.simulate_distance(&[1.0, 0.1, -0.01], &mut Seed::new(2).rng()).unwrap();
        assert_eq!(d, f64::INFINITY);
    }
}
