use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the Hermitian symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Which basis of `T^{1,0} X_t` a metric matrix is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Holomorphic log coordinates `w_j = log z_j`, `j = 1..=n`.
    CoordinateW,
    /// The proper frame `W_i = a_i z_i d/dz_i = a_i d/dw_i`.
    ProperFrame,
    /// All `n+1` ambient log coordinates `w_0..w_n` of the polydisk.
    AmbientW,
}

/// Small dense positive definite Hermitian matrix tagged with its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm {
    entries: DMatrix<Complex<f64>>,
    basis: Basis,
}

impl HermitianForm {
    pub fn new(entries: DMatrix<Complex<f64>>, basis: Basis) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::NotPositiveHermitian("matrix must be square and non-empty"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotPositiveHermitian("non-finite entry"));
        }
        let scale = entries.iter().map(|z| z.norm_sqr().sqrt()).fold(0.0, f64::max);
        let dim = entries.nrows();
        for i in 0..dim {
            for j in i..dim {
                if (entries[(i, j)] - entries[(j, i)].conj()).norm_sqr().sqrt() > HERMITIAN_TOL * scale {
                    return Err(Error::NotPositiveHermitian("matrix is not Hermitian"));
                }
            }
        }
        // complex Cholesky takes complex roots of negative pivots instead of failing
        let positive = entries.clone().cholesky().is_some_and(|c| {
            c.l_dirty()
                .diagonal()
                .iter()
                .all(|d| d.re > 0.0 && d.im.abs() <= HERMITIAN_TOL * d.re)
        });
        if !positive {
            return Err(Error::NotPositiveHermitian("matrix is not positive definite"));
        }
        Ok(HermitianForm { entries, basis })
    }

    /// Builds a form from a real symmetric matrix.
    pub fn from_real(entries: DMatrix<f64>, basis: Basis) -> Result<Self> {
        Self::new(entries.map(|x| Complex::new(x, 0.0)), basis)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn entries(&self) -> &DMatrix<Complex<f64>> {
        &self.entries
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Dense determinant. The matrix is equilibrated by its diagonal before
    /// the Cholesky factorization, so widely spread diagonal scales do not
    /// cost relative accuracy.
    pub fn determinant(&self) -> f64 {
        let dim = self.dim();
        let d: Vec<f64> = (0..dim).map(|i| self.entries[(i, i)].re.sqrt()).collect();
        let scaled = DMatrix::from_fn(dim, dim, |i, j| self.entries[(i, j)] / (d[i] * d[j]));
        let chol = scaled
            .cholesky()
            .expect("positive definiteness is checked at construction");
        let l = chol.l_dirty();
        let mut det = 1.0;
        for i in 0..dim {
            det *= l[(i, i)].re * l[(i, i)].re * d[i] * d[i];
        }
        det
    }

    pub fn inverse(&self) -> DMatrix<Complex<f64>> {
        self.entries
            .clone()
            .cholesky()
            .expect("positive definiteness is checked at construction")
            .inverse()
    }

    /// The positive square root of the inverse, `G^{-1/2}`.
    pub fn inverse_sqrt(&self) -> DMatrix<Complex<f64>> {
        let eig = self.entries.clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let dim = self.dim();
        let scales = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                Complex::new(1.0 / eig.eigenvalues[i].sqrt(), 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        v * scales * v.adjoint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian_and_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(HermitianForm::from_real(m, Basis::CoordinateW).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(HermitianForm::from_real(m, Basis::CoordinateW).is_err());
    }

    #[test]
    fn complex_hermitian_spectrum_and_determinant() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(2.0, 0.0),
                Complex::new(0.0, 1.0),
                Complex::new(0.0, -1.0),
                Complex::new(2.0, 0.0),
            ],
        );
        let h = HermitianForm::new(m, Basis::CoordinateW).unwrap();
        let ev = h.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        assert!((h.determinant() - 3.0).abs() < 1e-12);
        let s = h.inverse_sqrt();
        let should_be_identity = &s * h.entries() * &s;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((should_be_identity[(i, j)] - Complex::new(expect, 0.0)).norm_sqr().sqrt() < 1e-12);
            }
        }
    }
}
