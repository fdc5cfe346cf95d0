//! Error metrics and convergence fits.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::mlmc::LatticeCdf;

/// `sqrt(mean_r ||F_r - F||_inf^2)` over replications.
pub fn rmse_linf(estimates: &[LatticeCdf], reference: &LatticeCdf) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::EmptySamples);
    }
    let sq: f64 = estimates
        .iter()
        .map(|e| e.sup_distance(reference).map(|d| d * d))
        .sum::<Result<f64>>()?;
    Ok((sq / estimates.len() as f64).sqrt())
}

/// RMSE from precomputed sup-norm errors.
pub fn rmse_from_errors(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Mean sup-norm gap between paired coupled and uncoupled estimates.
pub fn coupling_bias(coupled: &[LatticeCdf], uncoupled: &[LatticeCdf]) -> Result<f64> {
    if coupled.is_empty() || coupled.len() != uncoupled.len() {
        return Err(Error::DimensionMismatch {
            expected: coupled.len(),
            got: uncoupled.len(),
        });
    }
    let total: f64 = coupled
        .iter()
        .zip(uncoupled)
        .map(|(a, b)| a.sup_distance(b))
        .sum::<Result<f64>>()?;
    Ok(total / coupled.len() as f64)
}

/// Least-squares fit of `log rmse = a + slope * log cost`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval; `None` with two points.
    pub ci: Option<(f64, f64)>,
}

pub fn fit_convergence_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("a slope needs at least two points".into()));
    }
    if points.iter().any(|&(c, r)| !(c > 0.0) || !(r > 0.0)) {
        return Err(Error::InvalidArgument("costs and errors must be positive".into()));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(c, r)| (c.ln(), r.ln())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::InvalidArgument("all costs are equal".into()));
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ci = if xy.len() > 2 {
        let rss: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (rss / (n - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 2.0)
            .map_err(|e| Error::Numerical(e.to_string()))?
            .inverse_cdf(0.975);
        Some((slope - t * se, slope + t * se))
    } else {
        None
    };
    Ok(SlopeFit { slope, intercept, ci })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Critical two-sample KS distance at significance `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}
