//! Brute-force finite-difference backend on a uniform energy grid.
//!
//! Nodes are `E_j = j·h`, `j = 1..=N`, `h = E_max/(N+1)`, with Dirichlet
//! conditions at both ends. Every operator is tridiagonal; states are sample
//! vectors with the discrete inner product `h Σ conj(f_j) g_j`.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMat, I, c};
use crate::spectral_rep::{SpectralError, Variant};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 16 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid extent must be positive and finite, got {0}")]
    InvalidExtent(f64),
    #[error("state support escapes the grid under dilation by {t}")]
    SupportEscapesGrid { t: f64 },
    #[error("sample count {got} does not match grid size {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("dense grid path limited to N <= {limit}, got {n}")]
    TooLargeForDense { n: usize, limit: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub e_max: f64,
}

impl GridSpec {
    pub fn new(n: usize, e_max: f64) -> Result<Self, GridError> {
        if n < 16 {
            return Err(GridError::TooFewPoints(n));
        }
        if !(e_max > 0.0 && e_max.is_finite()) {
            return Err(GridError::InvalidExtent(e_max));
        }
        Ok(GridSpec { n, e_max })
    }

    pub fn spacing(&self) -> f64 {
        self.e_max / (self.n + 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }
}

/// Samples of `ψ̃₊` at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub grid: GridSpec,
    pub samples: Vec<C64>,
}

impl GridState {
    pub fn new(grid: GridSpec, samples: Vec<C64>) -> Result<Self, GridError> {
        if samples.len() != grid.n {
            return Err(GridError::SizeMismatch { expected: grid.n, got: samples.len() });
        }
        Ok(GridState { grid, samples })
    }

    pub fn sample(grid: GridSpec, f: impl Fn(f64) -> C64) -> Self {
        GridState { grid, samples: grid.nodes().into_iter().map(f).collect() }
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.spacing() * self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn inner(&self, other: &GridState) -> C64 {
        self.grid.spacing() * crate::linalg::dot(&self.samples, &other.samples)
    }

    /// Value at an arbitrary energy by 6-point Lagrange interpolation, with
    /// the Dirichlet zeros at `0` and `E_max` as extra nodes.
    pub fn interpolate(&self, e: f64) -> C64 {
        let h = self.grid.spacing();
        let n = self.grid.n as isize;
        if e <= 0.0 || e >= self.grid.e_max {
            return c(0.0);
        }
        // padded node index p ↔ energy p·h, p = 0..=N+1
        let at = |p: isize| -> C64 {
            if p <= 0 || p > n { c(0.0) } else { self.samples[(p - 1) as usize] }
        };
        let s = e / h;
        let base = (s.floor() as isize - 2).clamp(0, (n + 1 - 5).max(0));
        let mut out = c(0.0);
        for i in 0..6 {
            let pi = base + i;
            let mut l = 1.0;
            for j in 0..6 {
                if j != i {
                    let pj = base + j;
                    l *= (s - pj as f64) / (pi - pj) as f64;
                }
            }
            out += at(pi) * l;
        }
        out
    }
}

/// Hermitian tridiagonal matrix: `diag` plus the superdiagonal `upper`;
/// the subdiagonal is its conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<C64>,
    pub upper: Vec<C64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let mut out: Vec<C64> = self.diag.iter().zip(v).map(|(d, x)| d * x).collect();
        for j in 0..n.saturating_sub(1) {
            out[j] += self.upper[j] * v[j + 1];
            out[j + 1] += self.upper[j].conj() * v[j];
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Tridiagonal {
        Tridiagonal {
            diag: self.diag.iter().map(|z| z * s).collect(),
            upper: self.upper.iter().map(|z| z * s).collect(),
        }
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j == i + 1 {
                self.upper[i]
            } else if i == j + 1 {
                self.upper[j].conj()
            } else {
                c(0.0)
            }
        })
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut r = self.diag[i].norm();
                if i > 0 {
                    r += self.upper[i - 1].norm();
                }
                if i + 1 < n {
                    r += self.upper[i].norm();
                }
                r
            })
            .fold(0.0, f64::max)
    }
}

/// The discretized triple for one weight `k`.
#[derive(Debug, Clone)]
pub struct GridOps {
    pub grid: GridSpec,
    pub k: f64,
    pub variant: Variant,
    pub h: Tridiagonal,
    pub d: Tridiagonal,
    pub c: Tridiagonal,
}

/// Plain triple: `H = E`, `D = −i√E D₁ √E`, `C = −√E D₂ √E + (k²−k)/E`.
pub fn build_grid_ops(grid: GridSpec, k: f64) -> GridOps {
    let n = grid.n;
    let h = grid.spacing();
    let e = grid.nodes();
    let s: Vec<f64> = e.iter().map(|x| x.sqrt()).collect();
    let pot = k * k - k;
    let hm = Tridiagonal { diag: e.iter().map(|&x| c(x)).collect(), upper: vec![c(0.0); n - 1] };
    let dm = Tridiagonal {
        diag: vec![c(0.0); n],
        upper: (0..n - 1).map(|j| -I * (s[j] * s[j + 1] / (2.0 * h))).collect(),
    };
    let cm = Tridiagonal {
        diag: e.iter().map(|&x| c(2.0 * x / (h * h) + pot / x)).collect(),
        upper: (0..n - 1).map(|j| c(-s[j] * s[j + 1] / (h * h))).collect(),
    };
    GridOps { grid, k, variant: Variant::Plain, h: hm, d: dm, c: cm }
}

/// Tilde triple: `H̃ = E²/2`, `D̃ = D/2`, `C̃ = ½(−D₂ + (k²−k)/E²)`.
pub fn build_grid_tilde_ops(grid: GridSpec, k: f64) -> GridOps {
    let plain = build_grid_ops(grid, k);
    let n = grid.n;
    let h = grid.spacing();
    let e = grid.nodes();
    let pot = k * k - k;
    let hm = Tridiagonal { diag: e.iter().map(|&x| c(0.5 * x * x)).collect(), upper: vec![c(0.0); n - 1] };
    let cm = Tridiagonal {
        diag: e.iter().map(|&x| c(1.0 / (h * h) + 0.5 * pot / (x * x))).collect(),
        upper: vec![c(-0.5 / (h * h)); n - 1],
    };
    GridOps { grid, k, variant: Variant::Tilde, h: hm, d: plain.d.scaled(0.5), c: cm }
}

impl GridOps {
    /// `Re ⟨f, X f⟩` in the discrete inner product.
    pub fn expectation(&self, x: &Tridiagonal, f: &[C64]) -> f64 {
        self.grid.spacing() * crate::linalg::dot(f, &x.apply(f)).re
    }

    /// Relative residuals of `[H,D] = iH`, `[C,D] = −iC`, `[H,C] = 2iD` on a
    /// set of test vectors, `‖R V‖_F / ‖Z V‖_F`.
    pub fn commutator_residuals(&self, vectors: &[Vec<C64>]) -> [f64; 3] {
        let rel = |x: &Tridiagonal, y: &Tridiagonal, z: &Tridiagonal, coef: C64| {
            let (mut num, mut den) = (0.0, 0.0);
            for v in vectors {
                let xy = x.apply(&y.apply(v));
                let yx = y.apply(&x.apply(v));
                let zv = z.apply(v);
                for i in 0..v.len() {
                    num += (xy[i] - yx[i] - coef * zv[i]).norm_sqr();
                    den += zv[i].norm_sqr();
                }
            }
            (num / den).sqrt()
        };
        [
            rel(&self.h, &self.d, &self.h, I),
            rel(&self.c, &self.d, &self.c, -I),
            rel(&self.h, &self.c, &self.d, 2.0 * I),
        ]
    }

    /// `e^{−itD} v` by a Taylor series, split into substeps with `‖sD‖ ≤ ½`.
    pub fn dilation_flow(&self, t: f64, v: &[C64]) -> Vec<C64> {
        let steps = ((t.abs() * self.d.norm_bound()) / 0.5).ceil().max(1.0) as usize;
        let s = t / steps as f64;
        let mut x = v.to_vec();
        for _ in 0..steps {
            let mut term = x.clone();
            let mut acc = x.clone();
            for m in 1..40 {
                let dt = self.d.apply(&term);
                let f = -I * s / m as f64;
                term = dt.into_iter().map(|z| z * f).collect();
                let size: f64 = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
                for (a, b) in acc.iter_mut().zip(&term) {
                    *a += b;
                }
                if size < 1e-18 {
                    break;
                }
            }
            x = acc;
        }
        x
    }
}

/// Smooth test vectors for commutator checks: Gaussians centred in the
/// middle of the grid, at least seven widths clear of either boundary.
pub fn smooth_test_vectors(grid: GridSpec) -> Vec<Vec<C64>> {
    let l = grid.e_max;
    let e = grid.nodes();
    let mut out = Vec::new();
    for &w in &[l / 40.0, l / 20.0] {
        for &c0 in &[0.35 * l, 0.5 * l, 0.65 * l] {
            out.push(e.iter().map(|&x| c((-(x - c0).powi(2) / (2.0 * w * w)).exp())).collect());
        }
    }
    out
}

/// Orthonormal DST-I, `S_i = √(2/(N+1)) Σ_j f_j sin(π i j/(N+1))`, by FFT.
pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dst1 { n, fft: planner.plan_fft_forward(2 * (n + 1)) }
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut buf = vec![c(0.0); 2 * (n + 1)];
        for j in 0..n {
            buf[j + 1] = f[j];
            buf[2 * (n + 1) - 1 - j] = -f[j];
        }
        self.fft.process(&mut buf);
        let scale = (2.0 / (n + 1) as f64).sqrt();
        (1..=n).map(|i| buf[i] * C64::new(0.0, 0.5) * scale).collect()
    }
}

/// Eigenvalues of the Dirichlet `−D₂` on the grid, matching the DST modes.
pub fn dirichlet_laplacian_eigenvalues(grid: GridSpec) -> Vec<f64> {
    let h = grid.spacing();
    let n = grid.n;
    (1..=n)
        .map(|i| (2.0 - 2.0 * (std::f64::consts::PI * i as f64 / (n + 1) as f64).cos()) / (h * h))
        .collect()
}

/// Largest `N` for which [`grid_t`] forms a dense matrix.
pub const DENSE_LIMIT: usize = 1024;

/// `T = ½ log(2C̃)` as a dense matrix, through its eigendecomposition.
pub fn grid_t(tilde: &GridOps) -> Result<CMat, GridError> {
    if tilde.variant != Variant::Tilde {
        return Err(SpectralError::WrongVariant { expected: Variant::Tilde, got: tilde.variant }.into());
    }
    if tilde.grid.n > DENSE_LIMIT {
        return Err(GridError::TooLargeForDense { n: tilde.grid.n, limit: DENSE_LIMIT });
    }
    let op = crate::spectral_rep::HermitianOperator::new(
        tilde.c.scaled(2.0).to_dense(),
        crate::laguerre::BasisKind::Z,
    );
    let log = crate::spectral_rep::matrix_function(&op, crate::spectral_rep::MatrixFunction::Log)?;
    Ok(crate::linalg::scaled(log.matrix.as_ref(), 0.5))
}

/// `⟨f, T f⟩` in the discrete inner product. At `k = 1`, `2C̃` is the
/// Dirichlet Laplacian and the sine transform diagonalizes it exactly;
/// other weights fall back to [`grid_t`].
pub fn grid_t_expectation(tilde: &GridOps, f: &[C64]) -> Result<f64, GridError> {
    if tilde.variant != Variant::Tilde {
        return Err(SpectralError::WrongVariant { expected: Variant::Tilde, got: tilde.variant }.into());
    }
    let h = tilde.grid.spacing();
    if (tilde.k - 1.0).abs() < 1e-15 || tilde.k.abs() < 1e-15 {
        let s = Dst1::new(tilde.grid.n).apply(f);
        let lam = dirichlet_laplacian_eigenvalues(tilde.grid);
        return Ok(h * s.iter().zip(&lam).map(|(z, l)| 0.5 * l.ln() * z.norm_sqr()).sum::<f64>());
    }
    let t = grid_t(tilde)?;
    Ok(h * crate::linalg::expectation(t.as_ref(), f))
}

/// Richardson extrapolation for a second-order scheme from spacings `2h`, `h`.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Number of eigenvalues of a real symmetric tridiagonal matrix below `x`
/// (Sturm sequence count).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `count` smallest eigenvalues of a real symmetric tridiagonal matrix by
/// bisection.
pub fn tridiagonal_lowest_eigenvalues(diag: &[f64], off: &[f64], count: usize) -> Vec<f64> {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (0..count.min(n))
        .map(|idx| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                if sturm_count(diag, off, m) > idx { b = m } else { a = m }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Lowest `count` eigenvalues of `C̃` on the grid.
pub fn grid_ctilde_eigenvalues(tilde: &GridOps, count: usize) -> Vec<f64> {
    let diag: Vec<f64> = tilde.c.diag.iter().map(|z| z.re).collect();
    let off: Vec<f64> = tilde.c.upper.iter().map(|z| z.re).collect();
    tridiagonal_lowest_eigenvalues(&diag, &off, count)
}

/// Observed order `log₂(|λ_N − λ_2N| / |λ_2N − λ_4N|)` from three successive
/// refinements.
pub fn observed_order(coarse: f64, mid: f64, fine: f64) -> f64 {
    ((coarse - mid).abs() / (mid - fine).abs()).log2()
}

/// `(V(t)ψ)(E) = e^{−t/2} ψ(e^{−t}E)`, the integrated action of `e^{−itD}`,
/// evaluated by interpolation.
pub fn grid_dilation(state: &GridState, t: f64) -> Result<GridState, GridError> {
    let grid = state.grid;
    let top = state.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(state.clone());
    }
    // samples at E with e^{t}E beyond the grid would be pushed off it
    let limit = grid.e_max * (-t).exp();
    let escapes = state
        .samples
        .iter()
        .enumerate()
        .any(|(j, z)| grid.node(j) >= limit && z.norm() > 1e-12 * top);
    if escapes {
        return Err(GridError::SupportEscapesGrid { t });
    }
    let scale = (-0.5 * t).exp();
    let samples = grid
        .nodes()
        .into_iter()
        .map(|e| state.interpolate((-t).exp() * e) * scale)
        .collect();
    Ok(GridState { grid, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: GridSpec, c0: f64, w: f64) -> GridState {
        GridState::sample(grid, |e| c((-(e - c0).powi(2) / (2.0 * w * w)).exp()))
    }

    #[test]
    fn h_is_the_node_coordinates() {
        let g = GridSpec::new(64, 10.0).unwrap();
        let ops = build_grid_ops(g, 1.0);
        for j in 0..g.n {
            assert_eq!(ops.h.diag[j].re, g.node(j));
        }
    }

    #[test]
    fn dst_diagonalizes_the_laplacian() {
        let g = GridSpec::new(40, 3.0).unwrap();
        let ops = build_grid_tilde_ops(g, 1.0);
        let f: Vec<C64> = (0..g.n).map(|j| C64::new((j as f64 * 0.3).sin(), j as f64 * 0.01)).collect();
        let s = Dst1::new(g.n).apply(&f);
        let lam = dirichlet_laplacian_eigenvalues(g);
        // ⟨f, −D₂ f⟩ = 2⟨f, C̃ f⟩ at k = 1
        let lhs = 2.0 * crate::linalg::dot(&f, &ops.c.apply(&f)).re;
        let rhs: f64 = s.iter().zip(&lam).map(|(z, l)| l * z.norm_sqr()).sum();
        assert!((lhs - rhs).abs() < 1e-9 * rhs);
        // orthonormality
        let n2: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((n2 - crate::linalg::norm_sq(&f)).abs() < 1e-12 * n2);
    }

    #[test]
    fn laplacian_spectrum_is_second_order() {
        let l = 5.0;
        let mut errs = Vec::new();
        for n in [127, 255, 511] {
            let g = GridSpec::new(n, l).unwrap();
            let ev = grid_ctilde_eigenvalues(&build_grid_tilde_ops(g, 1.0), 3);
            let exact: Vec<f64> = (1..=3).map(|i| 0.5 * (i as f64 * PI / l).powi(2)).collect();
            errs.push((ev[2] - exact[2]).abs() / exact[2]);
        }
        let p = (errs[0] / errs[1]).log2();
        assert!((p - 2.0).abs() < 0.05, "order {p}");
        assert!(errs[2] < 1e-4);
    }

    #[test]
    fn sturm_bisection_matches_dense() {
        let g = GridSpec::new(60, 20.0).unwrap();
        let ops = build_grid_tilde_ops(g, 2.0);
        let ev = grid_ctilde_eigenvalues(&ops, 5);
        let dense = crate::linalg::eigvalsh(ops.c.to_dense().as_ref()).unwrap();
        for i in 0..5 {
            assert!((ev[i] - dense[i]).abs() < 1e-10 * dense[i].abs().max(1.0));
        }
    }

    #[test]
    fn grid_commutators_are_second_order_small() {
        let g = GridSpec::new(4096, 40.0).unwrap();
        let v = smooth_test_vectors(g);
        for k in [1.0, 1.5, 2.0] {
            for ops in [build_grid_ops(g, k), build_grid_tilde_ops(g, k)] {
                let r = ops.commutator_residuals(&v);
                assert!(r.iter().all(|x| *x < 1e-3), "k={k} {:?} {r:?}", ops.variant);
            }
        }
    }

    #[test]
    fn lowest_t_eigenvalue_tracks_extent() {
        let g = GridSpec::new(255, 8.0).unwrap();
        let ops = build_grid_tilde_ops(g, 1.0);
        let t = grid_t(&ops).unwrap();
        let lo = crate::linalg::eigvalsh(t.as_ref()).unwrap()[0];
        assert!((lo - (PI / 8.0).ln()).abs() < 1e-4);
    }

    #[test]
    fn dst_and_dense_t_agree() {
        let g = GridSpec::new(200, 10.0).unwrap();
        let ops = build_grid_tilde_ops(g, 1.0);
        let f = gaussian(g, 5.0, 0.7).samples;
        let fast = grid_t_expectation(&ops, &f).unwrap();
        let t = grid_t(&ops).unwrap();
        let slow = g.spacing() * crate::linalg::expectation(t.as_ref(), &f);
        assert!((fast - slow).abs() < 1e-10 * slow.abs());
    }

    #[test]
    fn dilation_preserves_norm_and_matches_matrix_flow() {
        let g = GridSpec::new(4096, 40.0).unwrap();
        let psi = gaussian(g, 8.0, 1.0);
        let t = 2f64.ln();
        let out = grid_dilation(&psi, t).unwrap();
        assert!((out.norm() - psi.norm()).abs() < 1e-6 * psi.norm());
        let ops = build_grid_ops(g, 1.0);
        let flowed = ops.dilation_flow(t, &psi.samples);
        let diff: f64 = flowed.iter().zip(&out.samples).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        let rel = (g.spacing() * diff).sqrt() / psi.norm();
        assert!(rel < 1e-3, "rel {rel}");
        // centre moves from 8 to 16
        let peak = out.samples.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        assert!((g.node(peak) - 16.0).abs() < 0.1);
    }

    #[test]
    fn dilation_identity_and_escape() {
        let g = GridSpec::new(512, 20.0).unwrap();
        let psi = gaussian(g, 8.0, 1.0);
        let same = grid_dilation(&psi, 0.0).unwrap();
        for (a, b) in same.samples.iter().zip(&psi.samples) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(matches!(grid_dilation(&psi, 2.0), Err(GridError::SupportEscapesGrid { .. })));
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(matches!(GridSpec::new(8, 1.0), Err(GridError::TooFewPoints(8))));
        assert!(GridSpec::new(16, -1.0).is_err());
    }
}
