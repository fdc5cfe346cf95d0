//! Gaussian random-walk proposal kernels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::abc::ParameterVector;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussianKernel {
    cov: DMatrix<f64>,
    /// `factor * factor^T == cov`.
    factor: DMatrix<f64>,
    /// Inverse covariance, present when `cov` is positive definite.
    precision: Option<DMatrix<f64>>,
}

impl GaussianKernel {
    /// Builds a kernel from a row list. Semidefinite matrices fall back to a
    /// symmetric eigendecomposition.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::KernelDegenerate("covariance must be a non-empty square matrix".into()));
        }
        let cov = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
        if cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::KernelDegenerate("non-finite covariance entry".into()));
        }
        let scale = cov.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        for i in 0..k {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::KernelDegenerate(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        if let Some(ch) = cov.clone().cholesky() {
            let precision = ch.inverse();
            return Ok(GaussianKernel {
                factor: ch.l(),
                cov,
                precision: Some(precision),
            });
        }
        let eig = cov.clone().symmetric_eigen();
        let tol = 1e-12 * scale;
        if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l < -tol) {
            return Err(Error::KernelDegenerate(format!("negative eigenvalue {bad:e}")));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(GaussianKernel {
            cov,
            factor,
            precision: None,
        })
    }

    /// `diag(0.75^2, 0.75^2, 0.03^2)`: no correlation between parameters.
    pub fn naive() -> Self {
        Self::new(&[
            vec![0.75 * 0.75, 0.0, 0.0],
            vec![0.0, 0.75 * 0.75, 0.0],
            vec![0.0, 0.0, 0.03 * 0.03],
        ])
        .expect("preset is positive definite")
    }

    /// Hand-tuned covariance with strong alpha/delta correlation.
    pub fn tuned() -> Self {
        Self::new(&[
            vec![0.5 * 0.5, 0.225, 0.0],
            vec![0.225, 0.5 * 0.5, 0.0],
            vec![0.0, 0.0, 0.015 * 0.015],
        ])
        .expect("preset is positive definite")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "naive" => Ok(Self::naive()),
            "tuned" => Ok(Self::tuned()),
            other => Err(Error::Config(format!("unknown kernel preset `{other}`"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn sample<R: Rng + ?Sized>(&self, center: &[f64], rng: &mut R) -> ParameterVector {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.factor * z;
        ParameterVector::new_unchecked(center.iter().zip(step.iter()).map(|(c, s)| c + s).collect())
    }

    /// `log q(x | center)` up to an additive constant shared by all pairs.
    pub fn log_density_unnormalised(&self, x: &[f64], center: &[f64]) -> Result<f64> {
        let p = self
            .precision
            .as_ref()
            .ok_or_else(|| Error::KernelDegenerate("density needs a positive definite covariance".into()))?;
        let d = DVector::from_iterator(self.dim(), x.iter().zip(center).map(|(a, b)| a - b));
        Ok(-0.5 * d.dot(&(p * &d)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    fn moments(k: &GaussianKernel, n: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
        let mut rng = Seed::new(seed).rng();
        let xs: Vec<ParameterVector> = (0..n).map(|_| k.sample(&[0.0; 3], &mut rng)).collect();
        let mean: Vec<f64> = (0..3).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let cov = DMatrix::from_fn(3, 3, |i, j| {
            xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1) as f64
        });
        (mean, cov)
    }

    #[test]
    fn zero_covariance_returns_center() {
        let k = GaussianKernel::new(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let mut rng = Seed::new(1).rng();
        assert_eq!(&*k.sample(&[0.3, -2.0], &mut rng), &[0.3, -2.0]);
        assert!(k.log_density_unnormalised(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn naive_preset_recovers_standard_deviations() {
        let n = 100_000;
        let (_, cov) = moments(&GaussianKernel::naive(), n, 2);
        for (j, sd) in [0.75, 0.75, 0.03].into_iter().enumerate() {
            let got = cov[(j, j)].sqrt();
            // Standard error of a sample sd is about sd / sqrt(2n).
            assert!((got - sd).abs() < 3.0 * sd / (2.0 * n as f64).sqrt(), "axis {j}: {got}");
        }
    }

    #[test]
    fn tuned_preset_correlation() {
        let n = 100_000;
        let (_, cov) = moments(&GaussianKernel::tuned(), n, 3);
        let r = cov[(0, 1)] / (cov[(0, 0)] * cov[(1, 1)]).sqrt();
        // Standard error of a sample correlation is about (1 - r^2) / sqrt(n).
        assert!((r - 0.9).abs() < 3.0 * (1.0 - 0.81) / (n as f64).sqrt(), "{r}");
    }

    #[test]
    fn semidefinite_and_invalid_inputs() {
        let k = GaussianKernel::new(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let mut rng = Seed::new(4).rng();
        let x = k.sample(&[0.0, 0.0], &mut rng);
        assert!((x[0] - x[1]).abs() < 1e-12);
        assert!(GaussianKernel::new(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(GaussianKernel::new(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(GaussianKernel::new(&[vec![1.0, 0.0]]).is_err());
        assert!(GaussianKernel::preset("fancy").is_err());
    }
}
