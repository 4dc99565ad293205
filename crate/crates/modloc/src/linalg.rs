//! Thin dense-matrix layer over `faer`.
//!
//! Everything downstream works with complex Hermitian matrices stored as
//! [`CMat`] and complex state vectors stored as `Vec<C64>`.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Dense complex matrix.
pub type CMat = Mat<C64>;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("eigensolver did not converge")]
    EigenFailure,
    #[error("singular value decomposition did not converge")]
    SvdFailure,
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
}

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entrywise deviation of `a` from Hermitian symmetry.
pub fn asymmetry(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut m: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `(A + A†)/2`.
pub fn hermitize(a: MatRef<'_, C64>) -> CMat {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Entrywise linear combination `Σ w_i A_i` of equally sized matrices.
pub fn combine(terms: &[(C64, MatRef<'_, C64>)]) -> CMat {
    let (r, cl) = (terms[0].1.nrows(), terms[0].1.ncols());
    Mat::from_fn(r, cl, |i, j| terms.iter().map(|(w, m)| *w * m[(i, j)]).sum())
}

pub fn scaled(a: MatRef<'_, C64>, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c(1.0) } else { c(0.0) })
}

/// `AB − BA`.
pub fn commutator(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> CMat {
    let ab = a * b;
    let ba = b * a;
    &ab - &ba
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, C64>) -> Result<f64, LinalgError> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let s = a.singular_values().map_err(|_| LinalgError::SvdFailure)?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// Leading `p × p` block, the compression onto the first `p` basis vectors.
pub fn leading(a: MatRef<'_, C64>, p: usize) -> MatRef<'_, C64> {
    a.submatrix(0, 0, p, p)
}

/// Number of basis vectors kept by an interior projector of the given fraction.
pub fn interior_size(m: usize, fraction: f64) -> usize {
    ((fraction * m as f64).ceil() as usize).clamp(1, m)
}

pub fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn matvec(a: MatRef<'_, C64>, v: &[C64]) -> Vec<C64> {
    let n = a.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (j, vj) in v.iter().enumerate() {
        if *vj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * vj;
        }
    }
    out
}

pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sq(v).sqrt()
}

/// Real part of `⟨v, A v⟩`.
pub fn expectation(a: MatRef<'_, C64>, v: &[C64]) -> f64 {
    dot(v, &matvec(a, v)).re
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(a: MatRef<'_, C64>) -> Result<Eigh, LinalgError> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::EigenFailure)?;
    let s = e.S().column_vector();
    let values = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok(Eigh {
        values,
        vectors: e.U().to_owned(),
    })
}

pub fn eigvalsh(a: MatRef<'_, C64>) -> Result<Vec<f64>, LinalgError> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LinalgError::EigenFailure)
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V f(Λ) V†` for a complex-valued spectral function.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMat {
        let n = self.dim();
        let v = &self.vectors;
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * fv[j]);
        &scaled * v.adjoint()
    }

    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> CMat {
        self.map(|x| c(f(x)))
    }

    /// Coefficients of `x` in the eigenbasis, `V† x`.
    pub fn to_eigenbasis(&self, x: &[C64]) -> Vec<C64> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let col = self.vectors.col(j);
                (0..n).map(|i| col[i].conj() * x[i]).sum()
            })
            .collect()
    }

    pub fn from_eigenbasis(&self, y: &[C64]) -> Vec<C64> {
        matvec(self.vectors.as_ref(), y)
    }

    /// `f(A) x` without forming `f(A)`.
    pub fn apply(&self, f: impl Fn(f64) -> C64, x: &[C64]) -> Vec<C64> {
        let y: Vec<C64> = self
            .to_eigenbasis(x)
            .into_iter()
            .zip(&self.values)
            .map(|(yi, &l)| yi * f(l))
            .collect();
        self.from_eigenbasis(&y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> CMat {
        let a = Mat::from_fn(n, n, |i, j| {
            C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.1)
        });
        hermitize(a.as_ref())
    }

    #[test]
    fn eigh_reconstructs() {
        let a = sample(12);
        let e = eigh(a.as_ref()).unwrap();
        let back = e.map_real(|x| x);
        assert!(max_abs_diff(a.as_ref(), back.as_ref()) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn apply_matches_map() {
        let a = sample(9);
        let e = eigh(a.as_ref()).unwrap();
        let x: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0)).collect();
        let u = e.map(|l| (I * l).exp());
        let lhs = matvec(u.as_ref(), &x);
        let rhs = e.apply(|l| (I * l).exp(), &x);
        for (p, q) in lhs.iter().zip(&rhs) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = Mat::from_fn(4, 4, |i, j| if i == j { c(-(i as f64) - 1.0) } else { c(0.0) });
        assert!((spectral_norm(d.as_ref()).unwrap() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn hermitize_records_asymmetry() {
        let a = Mat::from_fn(2, 2, |i, j| if i < j { c(1.0) } else { c(0.0) });
        assert!((asymmetry(a.as_ref()) - 1.0).abs() < 1e-15);
        let h = hermitize(a.as_ref());
        assert_eq!(asymmetry(h.as_ref()), 0.0);
    }
}
