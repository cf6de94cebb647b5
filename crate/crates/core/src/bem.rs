//! Discrete Legendre polynomial basis expansion.
//!
//! Columns of `psi` are the orthonormal discrete Legendre polynomials on
//! s = 1..S, generated with the three-term recursion
//!
//! ```text
//! η_q(s) = (2q−3)(S−2s+1)/((q−1)(S−q+1)) η_{q−1}(s)
//!        − (q−2)(S+q−2)/((q−1)(S−q+1)) η_{q−2}(s)
//! ζ_q    = sqrt((2q−3)(S+q−1)/((2q−1)(S−q+1))) ζ_{q−1}
//! ψ_q    = η_q / ζ_q
//! ```
//!
//! seeded by η₁ = 1, η₂ = 1 − 2(s−1)/(S−1), ζ₁ = √S, ζ₂ = √(S(S+1)/(3(S−1))).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{size_err, Error, Result};

/// Residual above which the recursion output is re-orthonormalized.
const REORTHO_TOL: f64 = 1e-9;
/// Residual above which construction fails outright.
const FAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    psi: DMatrix<f64>,
    projector: DMatrix<f64>,
}

impl BasisMatrix {
    /// S×D basis.
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// S×S projector ΨΨᵀ.
    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn order(&self) -> usize {
        self.psi.ncols()
    }

    pub fn len(&self) -> usize {
        self.psi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.nrows() == 0
    }

    /// Max-abs entry of ΨᵀΨ − I.
    pub fn orthonormality_residual(&self) -> f64 {
        gram_residual(&self.psi)
    }
}

fn gram_residual(psi: &DMatrix<f64>) -> f64 {
    let g = psi.transpose() * psi;
    let eye = DMatrix::<f64>::identity(g.nrows(), g.ncols());
    (g - eye).amax()
}

fn modified_gram_schmidt(psi: &mut DMatrix<f64>) {
    for q in 0..psi.ncols() {
        for p in 0..q {
            let r = psi.column(p).dot(&psi.column(q));
            let prev = psi.column(p).clone_owned();
            psi.column_mut(q).axpy(-r, &prev, 1.0);
        }
        let n = psi.column(q).norm();
        psi.column_mut(q).unscale_mut(n);
    }
}

/// Builds the S×D discrete Legendre basis and its projector.
///
/// Orders 1 and 2 are allowed and simply truncate the seeded terms.
pub fn build_basis(len: usize, order: usize) -> Result<BasisMatrix> {
    if len < 2 {
        return Err(size_err(format!("basis length must be >= 2, got {len}")));
    }
    if order == 0 || order > len {
        return Err(size_err(format!(
            "basis order must lie in 1..={len}, got {order}"
        )));
    }
    let sf = len as f64;
    let mut psi = DMatrix::<f64>::zeros(len, order);

    let mut eta_prev2 = DVector::<f64>::from_element(len, 1.0);
    let mut eta_prev1 = DVector::<f64>::from_fn(len, |i, _| 1.0 - 2.0 * i as f64 / (sf - 1.0));
    let zeta1 = sf.sqrt();
    let mut zeta = (sf * (sf + 1.0) / (3.0 * (sf - 1.0))).sqrt();

    psi.set_column(0, &(&eta_prev2 / zeta1));
    if order >= 2 {
        psi.set_column(1, &(&eta_prev1 / zeta));
    }
    for q in 3..=order {
        let qf = q as f64;
        let a = (2.0 * qf - 3.0) / ((qf - 1.0) * (sf - qf + 1.0));
        let b = (qf - 2.0) * (sf + qf - 2.0) / ((qf - 1.0) * (sf - qf + 1.0));
        let eta = DVector::from_fn(len, |i, _| {
            let s = (i + 1) as f64;
            a * (sf - 2.0 * s + 1.0) * eta_prev1[i] - b * eta_prev2[i]
        });
        zeta *= ((2.0 * qf - 3.0) * (sf + qf - 1.0) / ((2.0 * qf - 1.0) * (sf - qf + 1.0))).sqrt();
        psi.set_column(q - 1, &(&eta / zeta));
        eta_prev2 = std::mem::replace(&mut eta_prev1, eta);
    }

    if gram_residual(&psi) > REORTHO_TOL {
        modified_gram_schmidt(&mut psi);
    }
    let residual = gram_residual(&psi);
    if residual.is_nan() || residual > FAIL_TOL {
        return Err(Error::Numerical(format!(
            "basis orthonormality residual {residual:e} for S={len}, D={order}"
        )));
    }
    let projector = &psi * psi.transpose();
    Ok(BasisMatrix { psi, projector })
}

fn check_len(basis: &BasisMatrix, n: usize) -> Result<()> {
    if n != basis.len() {
        return Err(size_err(format!(
            "series length {n} does not match basis length {}",
            basis.len()
        )));
    }
    Ok(())
}

/// ΨΨᵀ·x, applied to real and imaginary parts independently.
pub fn project(basis: &BasisMatrix, series: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(basis, series.len())?;
    let mut out = vec![Complex64::new(0.0, 0.0); series.len()];
    project_into(basis.projector(), series, &mut out);
    Ok(out)
}

pub(crate) fn project_into(projector: &DMatrix<f64>, series: &[Complex64], out: &mut [Complex64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = projector
            .row(i)
            .iter()
            .zip(series)
            .map(|(p, x)| x * *p)
            .sum();
    }
}

/// Expansion coefficients Ψᵀ·x.
pub fn coefficients(basis: &BasisMatrix, series: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(basis, series.len())?;
    Ok(basis
        .psi
        .column_iter()
        .map(|col| col.iter().zip(series).map(|(p, x)| x * *p).sum())
        .collect())
}

/// Ψ·c.
pub fn synthesize(basis: &BasisMatrix, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if coeffs.len() != basis.order() {
        return Err(size_err(format!(
            "{} coefficients for a basis of order {}",
            coeffs.len(),
            basis.order()
        )));
    }
    Ok(basis
        .psi
        .row_iter()
        .map(|row| row.iter().zip(coeffs).map(|(p, c)| c * *p).sum())
        .collect())
}
