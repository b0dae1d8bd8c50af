use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{cov_sqrt, is_psd, psd_cholesky, symmetrize};
use crate::math::{exp, ln};
use crate::{Error, Result};

/// Tolerance for symmetry and eigenvalue checks on covariances.
pub const PSD_TOL: f64 = 1e-10;

/// Multivariate normal belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief<const D: usize> {
    pub mean: SVector<f64, D>,
    pub cov: SMatrix<f64, D, D>,
}

/// Belief over `[position, velocity, prev displacement, displacement]`.
pub type StateBelief = GaussianBelief<4>;
/// Belief over `[d, k, T, W, alpha_c]`.
pub type ParamBelief = GaussianBelief<5>;

impl<const D: usize> GaussianBelief<D> {
    /// Checked constructor: finite, symmetric, PSD within [`PSD_TOL`].
    pub fn new(mean: SVector<f64, D>, cov: SMatrix<f64, D, D>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gaussian belief"));
        }
        if !is_psd(&cov, PSD_TOL) {
            return Err(Error::NotPsd("gaussian belief"));
        }
        Ok(Self { mean, cov })
    }

    /// Independent components with the given standard deviations.
    pub fn from_std(mean: SVector<f64, D>, std: &[f64; D]) -> Result<Self> {
        if std.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("std", "must be finite and >= 0"));
        }
        let cov = SMatrix::<f64, D, D>::from_diagonal(&SVector::from_fn(|i, _| std[i] * std[i]));
        Self::new(mean, cov)
    }

    /// Point mass at `mean`.
    pub fn point(mean: SVector<f64, D>) -> Self {
        Self {
            mean,
            cov: SMatrix::zeros(),
        }
    }

    pub fn std(&self) -> SVector<f64, D> {
        self.cov.diagonal().map(|v| crate::math::sqrt(v.max(0.0)))
    }

    pub fn is_psd(&self) -> bool {
        is_psd(&self.cov, PSD_TOL)
    }

    pub fn is_point_mass(&self) -> bool {
        self.cov.iter().all(|&x| x == 0.0)
    }

    /// Lower-triangular square root of the covariance.
    pub fn sqrt_cov(&self) -> Result<SMatrix<f64, D, D>> {
        cov_sqrt(&self.cov, "gaussian belief")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SVector<f64, D>> {
        let l = self.sqrt_cov()?;
        let eps = SVector::<f64, D>::from_fn(|_, _| rng.sample(StandardNormal));
        Ok(self.mean + l * eps)
    }

    pub(crate) fn symmetrized(mut self) -> Self {
        self.cov = symmetrize(&self.cov);
        self
    }
}

/// `KL(a || b)` between two Gaussians, closed form.
///
/// `b` must be nonsingular. A singular `a` gives `+inf` unless it lies on the
/// support of `b` in the limit, which we do not special-case.
pub fn kl_gaussian<const D: usize>(a: &GaussianBelief<D>, b: &GaussianBelief<D>) -> Result<f64> {
    let chol_b = b.cov.cholesky().ok_or(Error::Singular("kl_gaussian"))?;
    let logdet_b = 2.0 * chol_b.l_dirty().diagonal().iter().map(|x| ln(*x)).sum::<f64>();
    let logdet_a = match psd_cholesky(&symmetrize(&a.cov)) {
        Some(l) if l.diagonal().iter().all(|&x| x > 0.0) => {
            2.0 * l.diagonal().iter().map(|x| ln(*x)).sum::<f64>()
        }
        Some(_) => return Ok(f64::INFINITY),
        None => return Err(Error::NotPsd("kl_gaussian")),
    };
    let b_inv_a = chol_b.solve(&a.cov);
    let diff = b.mean - a.mean;
    let maha = diff.dot(&chol_b.solve(&diff));
    let kl = 0.5 * (b_inv_a.trace() + maha - D as f64 + logdet_b - logdet_a);
    Ok(kl.max(0.0))
}

/// `exp(N(location, cov))`, componentwise; always positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalBelief<const D: usize> {
    pub location: SVector<f64, D>,
    pub cov: SMatrix<f64, D, D>,
}

/// Belief over the two observation-noise standard deviations.
pub type NoiseBelief = LogNormalBelief<2>;

impl<const D: usize> LogNormalBelief<D> {
    pub fn new(location: SVector<f64, D>, cov: SMatrix<f64, D, D>) -> Result<Self> {
        GaussianBelief::new(location, cov)?;
        Ok(Self { location, cov })
    }

    /// Log-normal whose median is `median` (componentwise, all > 0) and whose
    /// log-scale covariance is `log_var * I`.
    pub fn from_median(median: &[f64; D], log_var: f64) -> Result<Self> {
        if median.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::invalid("median", "must be finite and > 0"));
        }
        if !(log_var.is_finite() && log_var >= 0.0) {
            return Err(Error::invalid("log_var", "must be finite and >= 0"));
        }
        Ok(Self {
            location: SVector::from_fn(|i, _| ln(median[i])),
            cov: SMatrix::<f64, D, D>::identity() * log_var,
        })
    }

    pub fn median(&self) -> SVector<f64, D> {
        self.location.map(exp)
    }

    pub fn log_belief(&self) -> GaussianBelief<D> {
        GaussianBelief {
            mean: self.location,
            cov: self.cov,
        }
    }

    pub fn sqrt_cov(&self) -> Result<SMatrix<f64, D, D>> {
        cov_sqrt(&self.cov, "log-normal belief")
    }

    /// Map a standard-normal draw through the distribution.
    #[inline]
    pub fn transform(&self, sqrt_cov: &SMatrix<f64, D, D>, eps: &SVector<f64, D>) -> SVector<f64, D> {
        (self.location + sqrt_cov * eps).map(exp)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SVector<f64, D>> {
        let l = self.sqrt_cov()?;
        let eps = SVector::<f64, D>::from_fn(|_, _| rng.sample(StandardNormal));
        Ok(self.transform(&l, &eps))
    }
}
