//! Direct-method stochastic simulation for discrete-state Markov jump
//! processes.

use rand::Rng;

use crate::error::{Error, Result};

/// A set of reactions over integer species counts.
pub trait ReactionNetwork {
    fn species(&self) -> usize;
    fn reactions(&self) -> usize;
    /// Writes the hazard of every reaction in `state` into `out`.
    fn hazards(&self, state: &[i64], out: &mut [f64]);
    /// Applies reaction `reaction` to `state`.
    fn fire(&self, reaction: usize, state: &mut [i64]);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopCondition {
    /// Simulate until the clock passes this time.
    FinalTime(f64),
    /// Stop after this many events.
    MaxEvents(u64),
    /// Run until every hazard is zero.
    Absorbing,
}

/// A recorded sample path: the initial state followed by one entry per event.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<i64>>,
    pub events: u64,
    /// True when the path ended because all hazards vanished.
    pub absorbed: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &[i64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// State occupied at time `t` (right-continuous path).
    pub fn state_at(&self, t: f64) -> &[i64] {
        let idx = self.times.partition_point(|&s| s <= t);
        &self.states[idx.saturating_sub(1)]
    }
}

struct Stepper {
    hazards: Vec<f64>,
}

enum Step {
    Absorbed,
    Event { dt: f64, reaction: usize },
}

impl Stepper {
    fn new<N: ReactionNetwork + ?Sized>(net: &N) -> Self {
        Stepper {
            hazards: vec![0.0; net.reactions()],
        }
    }

    fn next<N: ReactionNetwork + ?Sized, R: Rng + ?Sized>(
        &mut self,
        net: &N,
        state: &[i64],
        rng: &mut R,
    ) -> Result<Step> {
        net.hazards(state, &mut self.hazards);
        let mut total = 0.0;
        for (r, &h) in self.hazards.iter().enumerate() {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "hazard {r} evaluated to {h} in state {state:?}"
                )));
            }
            total += h;
        }
        if total == 0.0 {
            return Ok(Step::Absorbed);
        }
        // 1 - U lies in (0, 1], so the log is finite.
        let dt = -(1.0 - rng.random::<f64>()).ln() / total;
        let mut target = rng.random::<f64>() * total;
        let mut reaction = self.hazards.len() - 1;
        for (r, &h) in self.hazards.iter().enumerate() {
            if target < h {
                reaction = r;
                break;
            }
            target -= h;
        }
        // Guard against landing on a zero-hazard reaction through roundoff.
        while self.hazards[reaction] == 0.0 {
            reaction -= 1;
        }
        Ok(Step::Event { dt, reaction })
    }
}

/// Simulates one exact sample path from `init` until `stop`.
pub fn ssa_simulate<N, R>(net: &N, init: &[i64], stop: StopCondition, rng: &mut R) -> Result<Trajectory>
where
    N: ReactionNetwork + ?Sized,
    R: Rng + ?Sized,
{
    if init.len() != net.species() {
        return Err(Error::DimensionMismatch {
            expected: net.species(),
            got: init.len(),
        });
    }
    let mut stepper = Stepper::new(net);
    let mut state = init.to_vec();
    let mut t = 0.0;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state.clone()],
        events: 0,
        absorbed: false,
    };
    loop {
        if let StopCondition::MaxEvents(cap) = stop {
            if traj.events >= cap {
                break;
            }
        }
        match stepper.next(net, &state, rng)? {
            Step::Absorbed => {
                traj.absorbed = true;
                break;
            }
            Step::Event { dt, reaction } => {
                if let StopCondition::FinalTime(end) = stop {
                    if t + dt > end {
                        break;
                    }
                }
                t += dt;
                net.fire(reaction, &mut state);
                traj.events += 1;
                traj.times.push(t);
                traj.states.push(state.clone());
            }
        }
    }
    Ok(traj)
}

/// Simulates one path and records the state at each of `obs_times`
/// (which must be nondecreasing). Returns the observed states and the number
/// of events fired.
pub fn ssa_observe<N, R>(
    net: &N,
    init: &[i64],
    obs_times: &[f64],
    rng: &mut R,
) -> Result<(Vec<Vec<i64>>, u64)>
where
    N: ReactionNetwork + ?Sized,
    R: Rng + ?Sized,
{
    let mut out = Vec::with_capacity(obs_times.len());
    let events = ssa_observe_with(net, init, obs_times, rng, |_, s| {
        out.push(s.to_vec());
        true
    })?;
    Ok((out, events))
}

/// As [`ssa_observe`], handing each observation to `visit` as it is made.
/// The path stops early when `visit` returns `false`.
pub fn ssa_observe_with<N, R, F>(net: &N, init: &[i64], obs_times: &[f64], rng: &mut R, mut visit: F) -> Result<u64>
where
    N: ReactionNetwork + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &[i64]) -> bool,
{
    if init.len() != net.species() {
        return Err(Error::DimensionMismatch {
            expected: net.species(),
            got: init.len(),
        });
    }
    let mut stepper = Stepper::new(net);
    let mut state = init.to_vec();
    let mut seen = 0;
    let mut t = 0.0;
    let mut events = 0;
    while seen < obs_times.len() {
        match stepper.next(net, &state, rng)? {
            Step::Absorbed => {
                while seen < obs_times.len() {
                    if !visit(seen, &state) {
                        return Ok(events);
                    }
                    seen += 1;
                }
            }
            Step::Event { dt, reaction } => {
                let t_next = t + dt;
                while seen < obs_times.len() && obs_times[seen] < t_next {
                    if !visit(seen, &state) {
                        return Ok(events);
                    }
                    seen += 1;
                }
                t = t_next;
                net.fire(reaction, &mut state);
                events += 1;
            }
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    /// Pure death process X -> 0 at rate k X.
    struct Decay(f64);

    impl ReactionNetwork for Decay {
        fn species(&self) -> usize {
            1
        }
        fn reactions(&self) -> usize {
            1
        }
        fn hazards(&self, s: &[i64], out: &mut [f64]) {
            out[0] = self.0 * s[0] as f64;
        }
        fn fire(&self, _: usize, s: &mut [i64]) {
            s[0] -= 1;
        }
    }

    #[test]
    fn decay_absorbs_after_exactly_n_events() {
        let mut rng = Seed::new(1).rng();
        let tr = ssa_simulate(&Decay(1.0), &[5], StopCondition::Absorbing, &mut rng).unwrap();
        assert_eq!(tr.events, 5);
        assert!(tr.absorbed);
        assert_eq!(tr.final_state(), &[0]);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn event_cap_is_respected() {
        let mut rng = Seed::new(2).rng();
        let tr = ssa_simulate(&Decay(1.0), &[50], StopCondition::MaxEvents(7), &mut rng).unwrap();
        assert_eq!(tr.events, 7);
        assert_eq!(tr.final_state(), &[43]);
    }

    #[test]
    fn negative_hazard_is_an_error() {
        let mut rng = Seed::new(3).rng();
        let err = ssa_simulate(&Decay(-1.0), &[3], StopCondition::Absorbing, &mut rng);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn decay_mean_matches_exponential_survival() {
        // Each of n0 particles survives to t with probability exp(-k t).
        let (n0, k, t) = (20i64, 0.5, 1.3);
        let runs = 20_000;
        let mut total = 0i64;
        for r in 0..runs {
            let mut rng = Seed::new(4).child(r).rng();
            let (obs, _) = ssa_observe(&Decay(k), &[n0], &[t], &mut rng).unwrap();
            total += obs[0][0];
        }
        let mean = total as f64 / runs as f64;
        let p = (-k * t).exp();
        let se = (n0 as f64 * p * (1.0 - p) / runs as f64).sqrt();
        assert!((mean - n0 as f64 * p).abs() < 4.0 * se, "{mean} vs {}", n0 as f64 * p);
    }
}
