//! Weighted least-squares fitting and the conditioning diagnostics of the
//! information matrix.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Eigenvalue summary of an information matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport<T> {
    pub lambda_min: T,
    pub lambda_max: T,
    /// Condition number `lambda_max / lambda_min` (infinite when `lambda_min <= 0`).
    pub cond: T,
    /// Spectral distance to the identity.
    pub dist_identity: T,
}

impl<T: Real> StabilityReport<T> {
    fn from_extremes(lambda_min: T, lambda_max: T) -> Self {
        let cond = if lambda_min > T::zero() {
            lambda_max / lambda_min
        } else {
            T::infinity()
        };
        let dist_identity = (lambda_max - T::one()).abs().max((T::one() - lambda_min).abs());
        Self {
            lambda_min,
            lambda_max,
            cond,
            dist_identity,
        }
    }

    /// Upper bound `(1 + delta) / (1 - delta)` on the condition number, when `delta < 1`.
    pub fn cond_bound(&self) -> Option<T> {
        (self.dist_identity < T::one())
            .then(|| (T::one() + self.dist_identity) / (T::one() - self.dist_identity))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub coefficients: DVector<T>,
    /// `||W u - W Psi c||_2`.
    pub residual_norm: T,
    pub stability: StabilityReport<T>,
    pub n_samples: usize,
}

impl<T: Real> FitResult<T> {
    /// Mean and variance of the fitted expansion.
    pub fn moments(&self) -> (T, T) {
        pce_moments(&self.coefficients)
    }

    /// Summary comment line followed by one coefficient per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let s = &self.stability;
        writeln!(
            w,
            "# n={} residual={} lambda_min={} lambda_max={} cond={} delta={}",
            self.n_samples, self.residual_norm, s.lambda_min, s.lambda_max, s.cond, s.dist_identity
        )?;
        writeln!(w, "index,coefficient")?;
        for (j, c) in self.coefficients.iter().enumerate() {
            writeln!(w, "{j},{c}")?;
        }
        Ok(())
    }
}

fn check_shapes<T: Real>(psi: &DMatrix<T>, weights: Option<&DVector<T>>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != psi.nrows() {
            return Err(Error::DimensionMismatch {
                expected: psi.nrows(),
                got: w.len(),
            });
        }
    }
    Ok(())
}

/// `W Psi`, with `W = I` when `weights` is `None`.
pub fn weighted_matrix<T: Real>(psi: &DMatrix<T>, weights: Option<&DVector<T>>) -> Result<DMatrix<T>> {
    check_shapes(psi, weights)?;
    let mut a = psi.clone();
    if let Some(w) = weights {
        for (mut row, &wi) in a.row_iter_mut().zip(w.iter()) {
            row *= wi;
        }
    }
    Ok(a)
}

/// Information matrix `(W Psi)^T (W Psi) / N`.
pub fn info_matrix<T: Real>(psi: &DMatrix<T>, weights: Option<&DVector<T>>) -> Result<DMatrix<T>> {
    let a = weighted_matrix(psi, weights)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("information matrix of an empty design".into()));
    }
    Ok(a.tr_mul(&a) / T::from_usize_lossy(n))
}

/// Extreme eigenvalues, condition number and distance to the identity of a symmetric `M`.
pub fn stability_report<T: Real>(m: &DMatrix<T>) -> Result<StabilityReport<T>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.is_empty() {
        return Err(Error::InvalidArgument("empty information matrix".into()));
    }
    let eig = SymmetricEigen::try_new(m.clone(), T::eps(), 0)
        .ok_or_else(|| Error::EigenFailure("symmetric eigensolver did not converge".into()))?;
    let lmin = eig.eigenvalues.iter().copied().fold(T::infinity(), |a, b| a.min(b));
    let lmax = eig.eigenvalues.iter().copied().fold(-T::infinity(), |a, b| a.max(b));
    Ok(StabilityReport::from_extremes(lmin, lmax))
}

/// Weighted least-squares fit through a QR factorization of `W Psi`.
pub fn fit<T: Real>(psi: &DMatrix<T>, weights: Option<&DVector<T>>, u: &DVector<T>) -> Result<FitResult<T>> {
    let um = DMatrix::from_column_slice(u.len(), 1, u.as_slice());
    Ok(fit_multi(psi, weights, &um)?.pop().expect("one right-hand side"))
}

/// Fits every column of `u` against the same design, factorizing it once.
pub fn fit_multi<T: Real>(
    psi: &DMatrix<T>,
    weights: Option<&DVector<T>>,
    u: &DMatrix<T>,
) -> Result<Vec<FitResult<T>>> {
    let (n, p) = psi.shape();
    if u.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.nrows() });
    }
    if n < p {
        return Err(Error::RankDeficient { rank: n, required: p });
    }
    let a = weighted_matrix(psi, weights)?;
    let mut wu = u.clone();
    if let Some(w) = weights {
        for (mut row, &wi) in wu.row_iter_mut().zip(w.iter()) {
            row *= wi;
        }
    }

    let qr = a.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.iter().copied().fold(T::zero(), |x, y| x.max(y));
    let tol = T::lit(RANK_TOLERANCE) * smax;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    if rank < p || smax <= T::zero() {
        return Err(Error::RankDeficient { rank, required: p });
    }
    let qtu = qr.q().tr_mul(&wu);
    let coefs = r
        .solve_upper_triangular(&qtu)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let resid = &wu - &a * &coefs;

    // eigenvalues of M are the squared singular values of W Psi over N
    let nn = T::from_usize_lossy(n);
    let smin = sv.iter().copied().fold(T::infinity(), |x, y| x.min(y));
    let stability = StabilityReport::from_extremes(smin * smin / nn, smax * smax / nn);
    Ok((0..u.ncols())
        .map(|k| FitResult {
            coefficients: coefs.column(k).into_owned(),
            residual_norm: resid.column(k).norm(),
            stability,
            n_samples: n,
        })
        .collect())
}

/// Normal-equation solution `(A^T A)^{-1} A^T W u`. Kept for cross-checking [`fit`].
pub fn fit_normal_equations<T: Real>(
    psi: &DMatrix<T>,
    weights: Option<&DVector<T>>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let a = weighted_matrix(psi, weights)?;
    let wu = match weights {
        Some(w) => u.component_mul(w),
        None => u.clone(),
    };
    let g = a.tr_mul(&a);
    let chol = g.cholesky().ok_or(Error::RankDeficient {
        rank: 0,
        required: psi.ncols(),
    })?;
    Ok(chol.solve(&a.tr_mul(&wu)))
}

/// Relative error `||u_v - Psi_v c|| / ||u_v||`.
pub fn validation_error<T: Real>(c: &DVector<T>, psi_v: &DMatrix<T>, u_v: &DVector<T>) -> Result<T> {
    if psi_v.ncols() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            got: psi_v.ncols(),
        });
    }
    if psi_v.nrows() != u_v.len() {
        return Err(Error::DimensionMismatch {
            expected: psi_v.nrows(),
            got: u_v.len(),
        });
    }
    let denom = u_v.norm();
    if denom <= T::zero() {
        return Err(Error::UndefinedRelativeError);
    }
    Ok((u_v - psi_v * c).norm() / denom)
}

/// Mean (constant coefficient) and variance (sum of the remaining squares).
pub fn pce_moments<T: Real>(c: &DVector<T>) -> (T, T) {
    if c.is_empty() {
        return (T::zero(), T::zero());
    }
    let var = c.iter().skip(1).fold(T::zero(), |acc, &x| acc + x * x);
    (c[0], var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn report_identity_and_diagonal() {
        let r = stability_report(&DMatrix::<f64>::identity(3, 3)).unwrap();
        assert_eq!((r.lambda_min, r.lambda_max, r.cond, r.dist_identity), (1.0, 1.0, 1.0, 0.0));
        let r = stability_report(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.5]))).unwrap();
        assert_relative_eq!(r.lambda_min, 0.5, epsilon = 1e-14);
        assert_relative_eq!(r.lambda_max, 1.5, epsilon = 1e-14);
        assert_relative_eq!(r.cond, 3.0, epsilon = 1e-13);
        assert_relative_eq!(r.dist_identity, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn info_matrix_of_repeated_unit_rows() {
        let psi = DMatrix::from_fn(4, 3, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let m = info_matrix(&psi, None).unwrap();
        let mut e = DMatrix::zeros(3, 3);
        e[(0, 0)] = 1.0;
        assert_eq!(m, e);
    }

    #[test]
    fn exact_data_is_recovered() {
        let psi = DMatrix::from_fn(7, 3, |i, j| ((i * 3 + j * 7) % 5) as f64 - 1.7 + (i as f64).sin());
        let c = DVector::from_vec(vec![0.3, -1.2, 2.5]);
        let u = &psi * &c;
        let f = fit(&psi, None, &u).unwrap();
        assert!((&f.coefficients - &c).norm() / c.norm() < 1e-10);
        assert!(f.residual_norm < 1e-10);
        let w = DVector::from_fn(7, |i, _| 0.5 + i as f64);
        let f1 = fit(&psi, Some(&w), &u).unwrap();
        let f2 = fit(&psi, Some(&(w * 7.5)), &u).unwrap();
        assert!((&f1.coefficients - &f2.coefficients).norm() < 1e-10);
    }

    #[test]
    fn rank_deficiency_reports_rank() {
        let psi = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(fit(&psi, None, &u), Err(Error::RankDeficient { rank: 1, required: 2 }));
    }

    #[test]
    fn validation_error_cases() {
        let psi = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 1.0, -0.5]);
        let c = DVector::from_vec(vec![1.0, 2.0]);
        let u = &psi * &c;
        assert_eq!(validation_error(&c, &psi, &u).unwrap(), 0.0);
        assert_eq!(validation_error(&DVector::zeros(2), &psi, &u).unwrap(), 1.0);
        let c2 = DVector::from_vec(vec![0.7, 1.0]);
        assert_relative_eq!(
            validation_error(&c2, &psi, &u).unwrap(),
            validation_error(&(c2.clone() * 2.0), &psi, &(u.clone() * 2.0)).unwrap()
        );
        assert_eq!(
            validation_error(&c, &psi, &DVector::zeros(2)),
            Err(Error::UndefinedRelativeError)
        );
    }

    #[test]
    fn moments() {
        assert_eq!(pce_moments(&DVector::from_vec(vec![3.0, 0.0, 0.0])), (3.0, 0.0));
        assert_eq!(pce_moments(&DVector::from_vec(vec![0.0, 1.0, 1.0])), (0.0, 2.0));
    }
}
