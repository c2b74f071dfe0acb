//! Symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalues in (-CLAMP·scale, 0) are treated as roundoff and set to zero.
pub const PSD_CLAMP: f64 = 1e-12;

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= tol * scale
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn eigen(m: &Mat) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

/// Q f(Λ) Qᵀ for a symmetric matrix.
pub fn sym_fn(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let e = eigen(m);
    let d = e.eigenvalues.map(f);
    &e.eigenvectors * Mat::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Eigendecomposition square root of a PSD matrix with a roundoff clamp.
pub fn psd_sqrt(m: &Mat) -> Result<Mat> {
    psd_sqrt_with(m, PSD_CLAMP)
}

pub fn psd_sqrt_with(m: &Mat, clamp: f64) -> Result<Mat> {
    let e = eigen(m);
    let scale = e.eigenvalues.amax().max(1.0);
    let mut d = e.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < 0.0 {
            if *v > -clamp * scale {
                *v = 0.0;
            } else {
                return Err(Error::numeric(format!("matrix is not PSD: eigenvalue {v:e}")));
            }
        }
        *v = v.sqrt();
    }
    Ok(&e.eigenvectors * Mat::from_diagonal(&d) * e.eigenvectors.transpose())
}

/// Factor F with F Fᵀ = m, built from the clamped eigendecomposition.
pub fn psd_factor(m: &Mat, clamp: f64) -> Result<Mat> {
    let e = eigen(m);
    let scale = e.eigenvalues.amax().max(1.0);
    let mut d = e.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < 0.0 {
            if *v >= -clamp * scale {
                *v = 0.0;
            } else {
                return Err(Error::numeric(format!(
                    "covariance is not PSD: eigenvalue {v:e}"
                )));
            }
        }
        *v = v.sqrt();
    }
    let mut f = e.eigenvectors.clone();
    for (j, s) in d.iter().enumerate() {
        f.column_mut(j).scale_mut(*s);
    }
    Ok(f)
}

pub fn commutes(a: &Mat, b: &Mat, tol: f64) -> bool {
    let scale = (a.amax() * b.amax()).max(1.0);
    (a * b - b * a).amax() <= tol * scale
}

/// ⟨A, B⟩ = tr(AᵀB).
pub fn frob_inner(a: &Mat, b: &Mat) -> f64 {
    a.component_mul(b).sum()
}

/// ⟨A, v⊗v⟩ = vᵀAv.
pub fn quad_form(a: &Mat, v: &Vector) -> f64 {
    v.dot(&(a * v))
}
