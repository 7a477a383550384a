use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the PSD check: min eigenvalue >= -tol * max eigenvalue.
pub const PSD_REL_TOL: f64 = 1e-8;

/// Smallest and largest eigenvalues of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// PSD up to `PSD_REL_TOL` relative to the largest eigenvalue magnitude.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    let (min, max) = eigen_range(m);
    min >= -PSD_REL_TOL * max.abs().max(min.abs())
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Relative jitter levels tried after a plain factorization fails.
pub const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Cholesky factor of `m`, adding `rel * mean(diag(m))` to the diagonal for
/// the first rung of `JITTER_LADDER` that makes it succeed. Returns the
/// factor and the absolute jitter added (0 when none was needed).
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let n = m.nrows();
    let scale = (m.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Ok((c, jitter));
        }
    }
    Err(Error::Numerical(format!(
        "Cholesky factorization failed even with jitter {:e} x mean diagonal",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

/// log-determinant from a Cholesky factor.
pub fn chol_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Copies the upper triangle onto the lower one.
pub(crate) fn symmetrize_from_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_detection() {
        let psd = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(is_psd(&psd));
        assert!(!is_psd(&indefinite));
        assert!(is_psd(&DMatrix::zeros(3, 3)));
    }

    #[test]
    fn jitter_escalates_only_when_needed() {
        let pd = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(cholesky_with_jitter(&pd).unwrap().1, 0.0);
        let singular = DMatrix::from_element(3, 3, 1.0);
        let (c, j) = cholesky_with_jitter(&singular).unwrap();
        assert!(j > 0.0 && j <= 1e-4);
        assert!((chol_logdet(&c) - (j * j * (3.0 + j)).ln()).abs() < 1e-6);
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_with_jitter(&indefinite).is_err());
    }
}
