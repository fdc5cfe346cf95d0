//! Product priors with optional dependent-uniform components, and their
//! restriction to bounding boxes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal as NormalDist};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{BoundingBox, ParameterVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum PriorComponent {
    Uniform { a: f64, b: f64 },
    Normal { mean: f64, sd: f64 },
    /// `U(0, theta[reference])` for an earlier component.
    DependentUniform { reference: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    names: Vec<String>,
    components: Vec<PriorComponent>,
}

/// Accept-reject attempts allowed per truncated draw before giving up.
const TRUNCATION_PROBE: u64 = 1_000_000;

impl Prior {
    pub fn new(names: Vec<String>, components: Vec<PriorComponent>) -> Result<Self> {
        if components.is_empty() || names.len() != components.len() {
            return Err(Error::InvalidArgument("prior needs one name per component".into()));
        }
        for (i, c) in components.iter().enumerate() {
            match *c {
                PriorComponent::Uniform { a, b } if !(a.is_finite() && b.is_finite() && a < b) => {
                    return Err(Error::InvalidArgument(format!("uniform({a}, {b}) needs a < b")));
                }
                PriorComponent::Normal { mean, sd } if !(mean.is_finite() && sd.is_finite() && sd > 0.0) => {
                    return Err(Error::InvalidArgument(format!("normal({mean}, {sd}) needs sd > 0")));
                }
                PriorComponent::DependentUniform { reference } if reference >= i => {
                    return Err(Error::InvalidArgument(format!(
                        "component {i} references {reference}, which is not earlier"
                    )));
                }
                _ => {}
            }
        }
        Ok(Prior { names, components })
    }

    /// Parses one `name ~ kind(args)` declaration per entry.
    pub fn parse<S: AsRef<str>>(lines: &[S]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut comps = Vec::new();
        for line in lines {
            let line = line.as_ref();
            let (name, rhs) = line
                .split_once('~')
                .ok_or_else(|| Error::Parse(format!("expected `name ~ dist(...)`, got `{line}`")))?;
            let name = name.trim().to_string();
            let rhs = rhs.trim();
            let open = rhs.find('(').filter(|_| rhs.ends_with(')'));
            let open = open.ok_or_else(|| Error::Parse(format!("bad distribution `{rhs}`")))?;
            let kind = rhs[..open].trim().to_ascii_lowercase();
            let args: Vec<&str> = rhs[open + 1..rhs.len() - 1].split(',').map(str::trim).collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}` in `{line}`")));
            let comp = match (kind.as_str(), args.as_slice()) {
                ("uniform", [a, b]) => match b.parse::<f64>() {
                    Ok(b) => PriorComponent::Uniform { a: num(a)?, b },
                    Err(_) => {
                        if num(a)? != 0.0 {
                            return Err(Error::Parse(format!("dependent uniform must start at 0: `{line}`")));
                        }
                        let reference = names
                            .iter()
                            .position(|n| n == b)
                            .ok_or_else(|| Error::Parse(format!("unknown reference `{b}` in `{line}`")))?;
                        PriorComponent::DependentUniform { reference }
                    }
                },
                ("normal", [m, s]) => PriorComponent::Normal { mean: num(m)?, sd: num(s)? },
                _ => return Err(Error::Parse(format!("unsupported distribution `{rhs}`"))),
            };
            names.push(name);
            comps.push(comp);
        }
        Prior::new(names, comps)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn components(&self) -> &[PriorComponent] {
        &self.components
    }

    /// Draws components in declaration order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        let mut theta = Vec::with_capacity(self.dim());
        for c in &self.components {
            let x = match *c {
                PriorComponent::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
                PriorComponent::Normal { mean, sd } => NormalDist::new(mean, sd).expect("validated").sample(rng),
                PriorComponent::DependentUniform { reference } => theta[reference] * rng.random::<f64>(),
            };
            theta.push(x);
        }
        ParameterVector::new_unchecked(theta)
    }

    /// Draws from the prior conditioned on `bbox`.
    ///
    /// Uniform and normal components are drawn on their truncated intervals
    /// directly. A dependent component `U(0, r)` restricted to `[lo, hi]` is
    /// accepted with probability `|[0, r] ∩ [lo, hi]| / r`, and the whole
    /// vector is redrawn on rejection.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, bbox: &BoundingBox, rng: &mut R) -> Result<ParameterVector> {
        if bbox.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: bbox.dim(),
            });
        }
        let mut attempts = 0u64;
        'outer: loop {
            attempts += 1;
            if attempts > TRUNCATION_PROBE {
                return Err(Error::DegenerateTruncation {
                    floor: 1.0 / TRUNCATION_PROBE as f64,
                    attempts: attempts - 1,
                });
            }
            let mut theta = Vec::with_capacity(self.dim());
            for (j, c) in self.components.iter().enumerate() {
                let (lo, hi) = (bbox.lo()[j], bbox.hi()[j]);
                let x = match *c {
                    PriorComponent::Uniform { a, b } => {
                        let (l, h) = (a.max(lo), b.min(hi));
                        if l > h {
                            return Err(self.empty_axis(j));
                        }
                        l + (h - l) * rng.random::<f64>()
                    }
                    PriorComponent::Normal { mean, sd } => {
                        let n = Normal::new(mean, sd).expect("validated");
                        let (pl, ph) = (n.cdf(lo), n.cdf(hi));
                        if !(ph > pl) {
                            if lo == hi {
                                lo
                            } else {
                                return Err(self.empty_axis(j));
                            }
                        } else {
                            n.inverse_cdf(pl + (ph - pl) * rng.random::<f64>()).clamp(lo, hi)
                        }
                    }
                    PriorComponent::DependentUniform { reference } => {
                        let r = theta[reference];
                        let (l, h) = (lo.max(0.0), hi.min(r));
                        if !(r > 0.0) || l > h {
                            continue 'outer;
                        }
                        if rng.random::<f64>() * r >= h - l && h > l {
                            continue 'outer;
                        }
                        if h == l {
                            // Zero-width slice: only reachable for degenerate boxes.
                            l
                        } else {
                            l + (h - l) * rng.random::<f64>()
                        }
                    }
                };
                theta.push(x);
            }
            return Ok(ParameterVector::new_unchecked(theta));
        }
    }

    fn empty_axis(&self, j: usize) -> Error {
        log::warn!("truncation box misses the support of `{}`", self.names[j]);
        Error::DegenerateTruncation {
            floor: 1.0 / TRUNCATION_PROBE as f64,
            attempts: 0,
        }
    }

    /// Per-component density factors; 0 outside the support.
    fn factors(&self, theta: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let x = theta[j];
                match *c {
                    PriorComponent::Uniform { a, b } => {
                        if x >= a && x <= b {
                            1.0 / (b - a)
                        } else {
                            0.0
                        }
                    }
                    PriorComponent::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").pdf(x),
                    PriorComponent::DependentUniform { reference } => {
                        let r = theta[reference];
                        if r > 0.0 && x >= 0.0 && x <= r {
                            1.0 / r
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect()
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        self.factors(theta).iter().product()
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        self.factors(theta).iter().map(|f| f.ln()).sum()
    }

    pub fn in_support(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && self.factors(theta).iter().all(|&f| f > 0.0)
    }

    /// `pi(num) / pi(den)`, computed factor by factor.
    pub fn density_ratio(&self, num: &[f64], den: &[f64]) -> Result<f64> {
        let (fn_, fd) = (self.factors(num), self.factors(den));
        let num_zero = fn_.iter().any(|&f| f == 0.0);
        let den_zero = fd.iter().any(|&f| f == 0.0);
        match (num_zero, den_zero) {
            (true, true) => Err(Error::UndefinedRatio),
            (true, false) => Ok(0.0),
            (false, true) => Ok(f64::INFINITY),
            (false, false) => {
                let mut r = 1.0;
                for (j, c) in self.components.iter().enumerate() {
                    r *= match *c {
                        PriorComponent::Normal { mean, sd } => {
                            let (a, b) = ((num[j] - mean) / sd, (den[j] - mean) / sd);
                            (0.5 * (b * b - a * a)).exp()
                        }
                        _ => fn_[j] / fd[j],
                    };
                }
                Ok(r)
            }
        }
    }

    /// Smallest box holding the prior support; infinite for normal axes.
    pub fn support_box(&self) -> BoundingBox {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi: Vec<f64> = Vec::with_capacity(self.dim());
        for c in &self.components {
            let (l, h) = match *c {
                PriorComponent::Uniform { a, b } => (a, b),
                PriorComponent::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
                PriorComponent::DependentUniform { reference } => (0.0, hi[reference].max(0.0)),
            };
            lo.push(l);
            hi.push(h);
        }
        BoundingBox::new(lo, hi).expect("support bounds are ordered")
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, c)) in self.names.iter().zip(&self.components).enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            match *c {
                PriorComponent::Uniform { a, b } => write!(f, "{n} ~ uniform({a}, {b})")?,
                PriorComponent::Normal { mean, sd } => write!(f, "{n} ~ normal({mean}, {sd})")?,
                PriorComponent::DependentUniform { reference } => {
                    write!(f, "{n} ~ uniform(0, {})", self.names[reference])?
                }
            }
        }
        Ok(())
    }
}

impl FromStr for Prior {
    type Err = Error;

    /// Declarations separated by `;` or newlines.
    fn from_str(s: &str) -> Result<Self> {
        let lines: Vec<&str> = s.split([';', '\n']).map(str::trim).filter(|l| !l.is_empty()).collect();
        Prior::parse(&lines)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use proptest::prelude::*;

    fn tb() -> Prior {
        "alpha ~ uniform(0, 5); delta ~ uniform(0, alpha); mu ~ normal(0.198, 0.06735)".parse().unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        let p = tb();
        assert_eq!(p.components()[1], PriorComponent::DependentUniform { reference: 0 });
        assert_eq!(p.to_string().parse::<Prior>().unwrap(), p);
        assert!("a ~ uniform(1, 0)".parse::<Prior>().is_err());
        assert!("a ~ uniform(0, b)".parse::<Prior>().is_err());
        assert!("a ~ gamma(1, 2)".parse::<Prior>().is_err());
        assert!("a ~ normal(0, 0)".parse::<Prior>().is_err());
    }

    #[test]
    fn uniform_mean() {
        let p: Prior = "x ~ uniform(0, 1)".parse().unwrap();
        let mut rng = Seed::new(1).rng();
        let n = 100_000;
        let mean = (0..n).map(|_| p.sample(&mut rng)[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 / 12f64.sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn tb_prior_draws() {
        let p = tb();
        let mut rng = Seed::new(2).rng();
        let n = 100_000;
        let draws: Vec<ParameterVector> = (0..n).map(|_| p.sample(&mut rng)).collect();
        assert!(draws.iter().all(|t| t[1] <= t[0] && t[1] >= 0.0));
        let mu: Vec<f64> = draws.iter().map(|t| t[2]).collect();
        let m = mu.iter().sum::<f64>() / n as f64;
        let sd = (mu.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        // Standard error of a normal sample sd is sd / sqrt(2(n-1)).
        assert!((sd - 0.06735).abs() < 3.0 * 0.06735 / (2.0 * (n - 1) as f64).sqrt());
    }

    #[test]
    fn density_ratio_examples() {
        let p = tb();
        let a = [2.0, 1.0, 0.2];
        let b = [4.0, 3.0, 0.2];
        assert_eq!(p.density_ratio(&a, &a).unwrap(), 1.0);
        // Uniform factors 1/5 * 1/alpha: ratio alpha_den / alpha_num.
        assert!((p.density_ratio(&a, &b).unwrap() - 4.0 / 2.0).abs() < 1e-15);
        assert_eq!(p.density_ratio(&[6.0, 1.0, 0.2], &a).unwrap(), 0.0);
        assert_eq!(p.density_ratio(&a, &[2.0, 3.0, 0.2]).unwrap(), f64::INFINITY);
        assert!(matches!(p.density_ratio(&[6.0, 1.0, 0.2], &[-1.0, 0.0, 0.0]), Err(Error::UndefinedRatio)));
    }

    #[test]
    fn truncated_uniform_is_uniform_on_the_box() {
        let p: Prior = "x ~ uniform(0, 2)".parse().unwrap();
        let bbox = BoundingBox::new(vec![0.0], vec![1.0]).unwrap();
        let mut rng = Seed::new(3).rng();
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| p.sample_truncated(&bbox, &mut rng).unwrap()[0]).collect();
        assert!(xs.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 / 12f64.sqrt() / (n as f64).sqrt());
    }

    fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn full_support_truncation_matches_prior_in_law() {
        let p = tb();
        let bbox = BoundingBox::new(vec![0.0, 0.0, -1.0], vec![5.0, 5.0, 2.0]).unwrap();
        let mut r1 = Seed::new(4).rng();
        let mut r2 = Seed::new(5).rng();
        let n = 10_000;
        let a: Vec<ParameterVector> = (0..n).map(|_| p.sample(&mut r1)).collect();
        let b: Vec<ParameterVector> = (0..n).map(|_| p.sample_truncated(&bbox, &mut r2).unwrap()).collect();
        // Two-sample KS critical value at the 1% level.
        let crit = 1.63 * (2.0 / n as f64).sqrt();
        for j in 0..3 {
            let d = ks(a.iter().map(|t| t[j]).collect(), b.iter().map(|t| t[j]).collect());
            assert!(d < crit, "axis {j}: {d}");
        }
    }

    #[test]
    fn dependent_truncation_matches_rejection_from_prior() {
        let p = tb();
        let bbox = BoundingBox::new(vec![1.0, 0.5, 0.1], vec![3.0, 1.5, 0.3]).unwrap();
        let mut r1 = Seed::new(6).rng();
        let mut r2 = Seed::new(7).rng();
        let n = 10_000;
        let mut a = Vec::new();
        while a.len() < n {
            let t = p.sample(&mut r1);
            if bbox.contains(&t) {
                a.push(t);
            }
        }
        let b: Vec<ParameterVector> = (0..n).map(|_| p.sample_truncated(&bbox, &mut r2).unwrap()).collect();
        let crit = 1.63 * (2.0 / n as f64).sqrt();
        for j in 0..3 {
            let d = ks(a.iter().map(|t| t[j]).collect(), b.iter().map(|t| t[j]).collect());
            assert!(d < crit, "axis {j}: {d}");
        }
    }

    #[test]
    fn impossible_truncation_is_an_error() {
        let p = tb();
        let bbox = BoundingBox::new(vec![0.0, 4.0, 0.0], vec![1.0, 5.0, 0.3]).unwrap();
        let mut rng = Seed::new(8).rng();
        assert!(matches!(p.sample_truncated(&bbox, &mut rng), Err(Error::DegenerateTruncation { .. })));
        let bbox = BoundingBox::new(vec![6.0, 0.0, 0.0], vec![7.0, 5.0, 0.3]).unwrap();
        assert!(p.sample_truncated(&bbox, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn truncated_draws_stay_in_box(seed in 0u64..1000, l0 in 0.6f64..4.0, w0 in 0.1f64..1.0, l1 in 0.0f64..0.5, w1 in 0.5f64..3.0) {
            let p = tb();
            let bbox = BoundingBox::new(vec![l0, l1, 0.0], vec![l0 + w0, l1 + w1, 0.4]).unwrap();
            let mut rng = Seed::new(seed).rng();
            let t = p.sample_truncated(&bbox, &mut rng).unwrap();
            prop_assert!(bbox.contains(&t));
            prop_assert!(p.in_support(&t));
        }

        #[test]
        fn ratio_is_reciprocal(seed in 0u64..1000) {
            let p = tb();
            let mut rng = Seed::new(seed).rng();
            let a = p.sample(&mut rng);
            let b = p.sample(&mut rng);
            let r = p.density_ratio(&a, &b).unwrap() * p.density_ratio(&b, &a).unwrap();
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
