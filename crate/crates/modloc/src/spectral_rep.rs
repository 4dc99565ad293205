//! Truncated generator matrices, their spectral calculus, and unitary flows.
//!
//! Matrix elements are computed by Gauss–Laguerre quadrature of products of
//! Laguerre functions, which is exact for the polynomial-times-weight
//! integrands that appear. All operators are the compressions `P_M X P_M`
//! onto the first `M` basis vectors.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laguerre::{BasisKind, BasisSpec, LaguerreError, gauss_laguerre, laguerre_jet};
use crate::linalg::{self, CMat, Eigh, LinalgError, c};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Laguerre(#[from] LaguerreError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("quadrature under-resolved: asymmetry {0:e} before Hermitization")]
    QuadratureUnderResolved(f64),
    #[error("H is singular on the truncated space (min eigenvalue {0:e})")]
    SingularH(f64),
    #[error("spectrum out of domain: eigenvalue {value:e} below cut {cut:e}")]
    SpectrumOutOfDomain { value: f64, cut: f64 },
    #[error("expected a {expected:?} generator set, got {got:?}")]
    WrongVariant { expected: Variant, got: Variant },
    #[error("native tilde build needs k > 1/2, got {0}")]
    UnsupportedWeight(f64),
}

/// Asymmetry above this fails the build.
pub const MAX_ASYMMETRY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Plain,
    Tilde,
}

/// A Hermitian generator triple in a named basis.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    pub h: CMat,
    pub d: CMat,
    pub c: CMat,
    /// Parameters of the basis the matrices are expressed in.
    pub spec: BasisSpec,
    pub basis: BasisKind,
    pub variant: Variant,
    /// Lowest weight `k` of the plain representation this set derives from.
    pub weight: f64,
    pub quadrature_order: usize,
    /// Largest entrywise asymmetry before Hermitization.
    pub asymmetry: f64,
}

impl GeneratorSet {
    pub fn dim(&self) -> usize {
        self.spec.m
    }

    /// `(H + C)/2`.
    pub fn rotation_generator(&self) -> CMat {
        linalg::combine(&[(c(0.5), self.h.as_ref()), (c(0.5), self.c.as_ref())])
    }

    pub fn lowest_rotation_eigenvalue(&self) -> Result<f64, SpectralError> {
        Ok(linalg::eigvalsh(self.rotation_generator().as_ref())?[0])
    }

    /// The same representation in the basis with scale `s·β`.
    ///
    /// Basis functions at scale `sβ` are dilates of those at `β`, so the
    /// matrices transform exactly: `H → H/s`, `D → D`, `C → sC`.
    pub fn rescaled(&self, s: f64) -> GeneratorSet {
        let mut out = self.clone();
        out.h = linalg::scaled(self.h.as_ref(), 1.0 / s);
        out.c = linalg::scaled(self.c.as_ref(), s);
        out.spec.beta *= s;
        out
    }

    pub fn hermitian(&self, which: Generator) -> HermitianOperator {
        let m = match which {
            Generator::H => &self.h,
            Generator::D => &self.d,
            Generator::C => &self.c,
        };
        HermitianOperator::new(m.clone(), self.basis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    H,
    D,
    C,
}

/// Quadrature order used by [`build_generators`].
pub fn plain_quadrature_order(spec: &BasisSpec) -> usize {
    2 * spec.m + (2.0 * spec.k).ceil() as usize + 4
}

/// `Σ_q F[i,q] w_q G[j,q]` for column-major sample tables.
fn weighted_gram(f: &Mat<f64>, w: &[f64], g: &Mat<f64>) -> Mat<f64> {
    let fw = Mat::<f64>::from_fn(f.nrows(), f.ncols(), |i, q| f[(i, q)] * w[q]);
    &fw * g.transpose()
}

fn to_complex(a: &Mat<f64>, factor: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| factor * a[(i, j)])
}

/// Plain triple `H = E`, `D = −i√E ∂_E √E`, `C = −√E ∂²_E √E + (k²−k)/E`
/// in the `Z` basis.
pub fn build_generators(spec: &BasisSpec) -> Result<GeneratorSet, SpectralError> {
    let spec = BasisSpec::new(spec.k, spec.beta, spec.m)?;
    let (k, beta, m) = (spec.k, spec.beta, spec.m);
    let order = plain_quadrature_order(&spec);
    let rule = gauss_laguerre(order, spec.alpha())?;
    let mut f0 = Mat::<f64>::zeros(m, order);
    let mut dp = Mat::<f64>::zeros(m, order);
    let mut cp = Mat::<f64>::zeros(m, order);
    for (q, &x) in rule.nodes.iter().enumerate() {
        let jet = laguerre_jet(m, spec.alpha(), x);
        for n in 0..m {
            let (a, b, d2) = (jet.f0[n], jet.f1[n], jet.f2[n]);
            f0[(n, q)] = a;
            dp[(n, q)] = (k - 0.5 * x) * a + x * b;
            cp[(n, q)] = k * a - 2.0 * k * b - x * (d2 - b + 0.25 * a);
        }
    }
    let w = &rule.scaled_weights;
    let wx: Vec<f64> = w.iter().zip(&rule.nodes).map(|(w, x)| w * x).collect();
    let h = to_complex(&weighted_gram(&f0, &wx, &f0), c(1.0 / (2.0 * beta)));
    let d = to_complex(&weighted_gram(&f0, w, &dp), C64::new(0.0, -1.0));
    let cm = to_complex(&weighted_gram(&f0, w, &cp), c(2.0 * beta));
    finish(h, d, cm, spec, BasisKind::Z, Variant::Plain, k, order)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    h: CMat,
    d: CMat,
    cm: CMat,
    spec: BasisSpec,
    basis: BasisKind,
    variant: Variant,
    weight: f64,
    order: usize,
) -> Result<GeneratorSet, SpectralError> {
    let asym = [&h, &d, &cm]
        .iter()
        .map(|a| linalg::asymmetry(a.as_ref()))
        .fold(0.0, f64::max);
    if !(asym <= MAX_ASYMMETRY) {
        return Err(SpectralError::QuadratureUnderResolved(asym));
    }
    Ok(GeneratorSet {
        h: linalg::hermitize(h.as_ref()),
        d: linalg::hermitize(d.as_ref()),
        c: linalg::hermitize(cm.as_ref()),
        spec,
        basis,
        variant,
        weight,
        quadrature_order: order,
        asymmetry: asym,
    })
}

/// Lowest weight `k/2 + 1/4` of the tilde triple.
pub fn tilde_weight(k: f64) -> f64 {
    0.5 * k + 0.25
}

/// Tilde triple `H̃ = H²/2`, `D̃ = D/2`, `C̃ = H^{−1/2}CH^{−1/2}/2`, formed from
/// truncated plain matrices.
///
/// Cheap, but `H^{−1/2}` is nonlocal in the basis index, so truncation
/// errors spread into the interior block.
pub fn build_tilde_generators(g: &GeneratorSet) -> Result<GeneratorSet, SpectralError> {
    if g.variant != Variant::Plain {
        return Err(SpectralError::WrongVariant { expected: Variant::Plain, got: g.variant });
    }
    let eh = linalg::eigh(g.h.as_ref())?;
    if eh.values[0] <= 1e-12 {
        return Err(SpectralError::SingularH(eh.values[0]));
    }
    let hm = eh.map_real(|x| x.powf(-0.5));
    let h2 = &g.h * &g.h;
    let ct = &(&hm * &g.c) * &hm;
    let mut out = g.clone();
    out.h = linalg::hermitize(linalg::scaled(h2.as_ref(), 0.5).as_ref());
    out.d = linalg::scaled(g.d.as_ref(), 0.5);
    out.c = linalg::hermitize(linalg::scaled(ct.as_ref(), 0.5).as_ref());
    out.variant = Variant::Tilde;
    Ok(out)
}

/// Tilde triple `H̃ = E²/2`, `D̃ = D/2`, `C̃ = ½(−∂²_E + (k²−k)/E²)` built
/// directly in its own lowest-weight basis `Z̃` of weight `k/2 + 1/4` and
/// scale `β̃`.
pub fn build_native_tilde(k: f64, beta_tilde: f64, m: usize) -> Result<GeneratorSet, SpectralError> {
    if !(k > 0.5) {
        return Err(SpectralError::UnsupportedWeight(k));
    }
    let kappa = tilde_weight(k);
    let spec = BasisSpec::new(kappa, beta_tilde, m)?;
    let alpha = spec.alpha();
    let order = 2 * m + 8;
    let rule = gauss_laguerre(order, alpha)?;
    let mut f0 = Mat::<f64>::zeros(m, order);
    let mut dp = Mat::<f64>::zeros(m, order);
    for (q, &u) in rule.nodes.iter().enumerate() {
        let jet = laguerre_jet(m, alpha, u);
        for n in 0..m {
            f0[(n, q)] = jet.f0[n];
            dp[(n, q)] = (kappa - 0.5 * u) * jet.f0[n] + u * jet.f1[n];
        }
    }
    let w = &rule.scaled_weights;
    let wu: Vec<f64> = w.iter().zip(&rule.nodes).map(|(w, u)| w * u).collect();
    let h = to_complex(&weighted_gram(&f0, &wu, &f0), c(1.0 / (4.0 * beta_tilde)));
    let d = to_complex(&weighted_gram(&f0, w, &dp), C64::new(0.0, -1.0));

    // quadratic form of C̃ integrated against u^{α−1}e^{−u}
    let rule2 = gauss_laguerre(order, alpha - 1.0)?;
    let mut g = Mat::<f64>::zeros(m, order);
    let mut p = Mat::<f64>::zeros(m, order);
    for (q, &u) in rule2.nodes.iter().enumerate() {
        let jet = laguerre_jet(m, alpha, u);
        for n in 0..m {
            g[(n, q)] = jet.f0[n] * (2.0 * kappa - 0.5 - u) + 2.0 * u * jet.f1[n];
            p[(n, q)] = jet.f0[n];
        }
    }
    let w2: Vec<f64> = rule2
        .scaled_weights
        .iter()
        .zip(&rule2.nodes)
        .map(|(w, u)| w / u)
        .collect();
    let kin = weighted_gram(&g, &w2, &g);
    let pot = weighted_gram(&p, &w2, &p);
    let cm = Mat::from_fn(m, m, |i, j| c(beta_tilde * (kin[(i, j)] + (k * k - k) * pot[(i, j)])));
    finish(h, d, cm, spec, BasisKind::Ztilde, Variant::Tilde, k, order)
}

/// `U†CU` etc. for `U = e^{iaH}` in closed form: `(H, D + aH, C + 2aD + a²H)`.
pub fn translate_generators(g: &GeneratorSet, a: f64) -> Result<GeneratorSet, SpectralError> {
    if g.variant != Variant::Plain {
        return Err(SpectralError::WrongVariant { expected: Variant::Plain, got: g.variant });
    }
    let mut out = g.clone();
    out.d = linalg::combine(&[(c(1.0), g.d.as_ref()), (c(a), g.h.as_ref())]);
    out.c = linalg::combine(&[
        (c(1.0), g.c.as_ref()),
        (c(2.0 * a), g.d.as_ref()),
        (c(a * a), g.h.as_ref()),
    ]);
    Ok(out)
}

/// A Hermitian matrix tagged with its basis, with a cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    pub matrix: CMat,
    pub basis: BasisKind,
    eig: std::sync::OnceLock<Eigh>,
}

impl HermitianOperator {
    pub fn new(matrix: CMat, basis: BasisKind) -> Self {
        HermitianOperator { matrix, basis, eig: std::sync::OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigen(&self) -> Result<&Eigh, SpectralError> {
        if let Some(e) = self.eig.get() {
            return Ok(e);
        }
        let e = linalg::eigh(self.matrix.as_ref())?;
        Ok(self.eig.get_or_init(|| e))
    }

    pub fn expectation(&self, v: &[C64]) -> f64 {
        linalg::expectation(self.matrix.as_ref(), v)
    }

    /// `self + s·1`.
    pub fn shifted(&self, s: f64) -> HermitianOperator {
        let n = self.dim();
        let m = Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] + if i == j { c(s) } else { c(0.0) });
        HermitianOperator::new(m, self.basis)
    }
}

/// Spectral functions available through [`matrix_function`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction {
    Sqrt,
    InvSqrt,
    Log,
    /// `e^{sA}`.
    ExpScaled(f64),
    Power(f64),
}

/// Relative eigenvalue cut for `log`, `inv_sqrt` and negative powers.
pub const EPS_CUT: f64 = 1e-10;

/// Applies `f` to the eigenvalues of `A`. Eigenvalues below the cut raise
/// [`SpectralError::SpectrumOutOfDomain`] instead of being clamped.
pub fn matrix_function(a: &HermitianOperator, f: MatrixFunction) -> Result<HermitianOperator, SpectralError> {
    let e = a.eigen()?;
    let top = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = EPS_CUT * top;
    let lo = e.values[0];
    let strict = matches!(f, MatrixFunction::InvSqrt | MatrixFunction::Log)
        || matches!(f, MatrixFunction::Power(p) if p < 0.0);
    let semidef = matches!(f, MatrixFunction::Sqrt | MatrixFunction::Power(_));
    if strict && lo <= cut {
        return Err(SpectralError::SpectrumOutOfDomain { value: lo, cut });
    }
    if semidef && lo < -cut {
        return Err(SpectralError::SpectrumOutOfDomain { value: lo, cut: -cut });
    }
    let m = match f {
        MatrixFunction::Sqrt => e.map_real(|x| x.max(0.0).sqrt()),
        MatrixFunction::InvSqrt => e.map_real(|x| 1.0 / x.sqrt()),
        MatrixFunction::Log => e.map_real(f64::ln),
        MatrixFunction::ExpScaled(s) => e.map_real(|x| (s * x).exp()),
        MatrixFunction::Power(p) if p == 0.0 => linalg::identity(a.dim()),
        MatrixFunction::Power(p) => e.map_real(|x| x.max(0.0).powf(p)),
    };
    Ok(HermitianOperator::new(linalg::hermitize(m.as_ref()), a.basis))
}

/// `T = ½ log(2C̃)`.
pub fn build_t(gt: &GeneratorSet) -> Result<HermitianOperator, SpectralError> {
    if gt.variant != Variant::Tilde {
        return Err(SpectralError::WrongVariant { expected: Variant::Tilde, got: gt.variant });
    }
    let two_ct = HermitianOperator::new(linalg::scaled(gt.c.as_ref(), 2.0), gt.basis);
    let log = matrix_function(&two_ct, MatrixFunction::Log)?;
    Ok(HermitianOperator::new(linalg::scaled(log.matrix.as_ref(), 0.5), gt.basis))
}

/// `(T_h, T_c) = (log H, log C)`.
pub fn build_th_tc(g: &GeneratorSet) -> Result<(HermitianOperator, HermitianOperator), SpectralError> {
    if g.variant != Variant::Plain {
        return Err(SpectralError::WrongVariant { expected: Variant::Plain, got: g.variant });
    }
    let th = matrix_function(&g.hermitian(Generator::H), MatrixFunction::Log)?;
    let tc = matrix_function(&g.hermitian(Generator::C), MatrixFunction::Log)?;
    Ok((th, tc))
}

/// `U(t) = e^{i·sign·t·A}`.
///
/// The modular flow `V(t) = Δ^{it/(2π)} = e^{−itD}` is `UnitaryFlow::new(D, −1)`.
#[derive(Debug, Clone)]
pub struct UnitaryFlow {
    pub generator: HermitianOperator,
    pub sign: f64,
    pub parameter: &'static str,
}

impl UnitaryFlow {
    pub fn new(generator: HermitianOperator, sign: f64) -> Self {
        UnitaryFlow { generator, sign: sign.signum(), parameter: "t" }
    }

    pub fn modular(d: HermitianOperator) -> Self {
        UnitaryFlow::new(d, -1.0)
    }

    pub fn at(&self, t: f64) -> Result<CMat, SpectralError> {
        let s = self.sign * t;
        Ok(self.generator.eigen()?.map(|x| C64::new(0.0, s * x).exp()))
    }

    pub fn apply(&self, t: f64, v: &[C64]) -> Result<Vec<C64>, SpectralError> {
        let s = self.sign * t;
        Ok(self.generator.eigen()?.apply(|x| C64::new(0.0, s * x).exp(), v))
    }
}

/// `e^{itA}` via the eigendecomposition.
pub fn unitary_flow(a: &HermitianOperator, t: f64) -> Result<CMat, SpectralError> {
    UnitaryFlow::new(a.clone(), 1.0).at(t)
}

/// `J`: complex conjugation of coefficients in a real basis.
pub fn conjugation_j(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

/// `J X J` for a matrix in a real basis.
pub fn conjugate_matrix(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}
