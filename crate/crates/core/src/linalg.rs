use nalgebra::SMatrix;

use crate::math::sqrt;
use crate::{Error, Result};

/// Diagonal jitter added once when a covariance fails to factorise.
pub const JITTER: f64 = 1e-9;

/// Lower-triangular `L` with `L Lᵀ = m` for symmetric positive
/// *semi*-definite `m`. Zero pivots produce zero columns instead of failing,
/// so point-mass beliefs keep an exact zero square root. Returns `None` on a
/// clearly negative pivot.
pub fn psd_cholesky<const D: usize>(m: &SMatrix<f64, D, D>) -> Option<SMatrix<f64, D, D>> {
    let mut l = SMatrix::<f64, D, D>::zeros();
    for j in 0..D {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let tol = 1e-10 * m[(j, j)].abs() + f64::MIN_POSITIVE;
        if d > tol {
            let ljj = sqrt(d);
            l[(j, j)] = ljj;
            for i in (j + 1)..D {
                let mut r = m[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = r / ljj;
            }
        } else if d < -tol || !d.is_finite() {
            return None;
        }
    }
    Some(l)
}

/// Square root of a covariance with the one-shot jitter repair.
pub fn cov_sqrt<const D: usize>(
    m: &SMatrix<f64, D, D>,
    context: &'static str,
) -> Result<SMatrix<f64, D, D>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    let sym = symmetrize(m);
    if let Some(l) = psd_cholesky(&sym) {
        return Ok(l);
    }
    let jittered = sym + SMatrix::<f64, D, D>::identity() * JITTER;
    psd_cholesky(&jittered).ok_or(Error::NotPsd(context))
}

pub fn symmetrize<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (m + m.transpose()) * 0.5
}

/// True when `m` is symmetric within `tol` and its eigenvalues are `>= -tol`
/// (up to the pivot tolerance of [`psd_cholesky`]).
pub fn is_psd<const D: usize>(m: &SMatrix<f64, D, D>, tol: f64) -> bool {
    if (m - m.transpose()).abs().max() > tol {
        return false;
    }
    // Eigenvalues >= -tol  <=>  m + tol I is positive semidefinite.
    let shifted = symmetrize(m) + SMatrix::<f64, D, D>::identity() * tol;
    psd_cholesky(&shifted).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn factorises_semidefinite() {
        let v = nalgebra::Vector3::new(1.0, 2.0, -1.0);
        let m: Matrix3<f64> = v * v.transpose();
        let l = psd_cholesky(&m).unwrap();
        assert!((l * l.transpose() - m).abs().max() < 1e-12);
        assert_eq!(psd_cholesky(&Matrix3::<f64>::zeros()).unwrap(), Matrix3::zeros());
    }

    #[test]
    fn rejects_indefinite() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(psd_cholesky(&m).is_none());
        assert!(cov_sqrt(&m, "test").is_err());
    }

    #[test]
    fn jitter_repairs_rounding() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1e-11, 0.0, 0.0, 0.0, 1.0);
        assert!(cov_sqrt(&m, "test").is_ok());
    }
}
