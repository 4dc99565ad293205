//! Generalized Laguerre polynomials, Laguerre functions and Gauss–Laguerre rules.
//!
//! The workhorse is the orthonormal Laguerre function
//! `ψ_n(x) = N_n x^{α/2} e^{−x/2} L_n^{(α)}(x)` with `N_n = √(n!/Γ(n+α+1))`,
//! evaluated by its own three-term recurrence with a running log-scale so that
//! neither the prefactor nor the polynomial overflows.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LaguerreError {
    #[error("tridiagonal eigensolver did not converge")]
    EigenFailure,
    #[error("quadrature order must be at least 1")]
    EmptyRule,
    #[error("weight exponent alpha = {0} must exceed -1")]
    BadAlpha(f64),
    #[error("lowest weight k = {0} is below 1/2")]
    WeightBelowHalf(f64),
    #[error("scale beta = {0} must be positive and finite")]
    BadScale(f64),
    #[error("truncation M must be at least 1")]
    EmptyBasis,
}

/// `L_n^{(α)}(x)` by the three-term recurrence.
pub fn laguerre_eval(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

const RESCALE: f64 = 1e100;

/// `ψ_0(x), …, ψ_{n−1}(x)` for `x > 0`.
pub fn laguerre_functions(n: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let mut log_scale = 0.5 * alpha * x.ln() - 0.5 * x - 0.5 * ln_gamma(alpha + 1.0);
    let mut prev = 0.0;
    let mut cur = 1.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = cur * log_scale.exp();
        let jf = j as f64;
        let next = ((2.0 * jf + alpha + 1.0 - x) * cur - (jf * (jf + alpha)).sqrt() * prev)
            / ((jf + 1.0) * (jf + alpha + 1.0)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    out
}

/// Laguerre functions with their first two derivative factors.
///
/// `f1[n] = x^{α/2}e^{−x/2}N_n L_n'(x)` and `f2[n]` the same with `L_n''`.
#[derive(Debug, Clone)]
pub struct LaguerreJet {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

pub fn laguerre_jet(n: usize, alpha: f64, x: f64) -> LaguerreJet {
    let f0 = laguerre_functions(n, alpha, x);
    let g1 = laguerre_functions(n.saturating_sub(1), alpha + 1.0, x);
    let g2 = laguerre_functions(n.saturating_sub(2), alpha + 2.0, x);
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    for j in 1..n {
        f1[j] = -(j as f64).sqrt() * g1[j - 1] / x.sqrt();
    }
    for j in 2..n {
        f2[j] = ((j * (j - 1)) as f64).sqrt() * g2[j - 2] / x;
    }
    LaguerreJet { f0, f1, f2 }
}

/// Gauss rule for the weight `x^α e^{−x}` on `(0, ∞)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `w_i e^{x_i} x_i^{−α}`, finite even where `weights` underflow.
    pub scaled_weights: Vec<f64>,
    pub order: usize,
    pub alpha: f64,
}

impl QuadratureRule {
    /// `Σ w_i f(x_i) ≈ ∫ x^α e^{−x} f(x) dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes from the Jacobi matrix, polished by Newton steps on `L_order`;
/// weights from the Christoffel function `1/Σ ψ_n(x)²`.
pub fn gauss_laguerre(order: usize, alpha: f64) -> Result<QuadratureRule, LaguerreError> {
    if order == 0 {
        return Err(LaguerreError::EmptyRule);
    }
    if alpha <= -1.0 || !alpha.is_finite() {
        return Err(LaguerreError::BadAlpha(alpha));
    }
    let jac = Mat::<f64>::from_fn(order, order, |i, j| {
        if i == j {
            2.0 * i as f64 + alpha + 1.0
        } else if i.abs_diff(j) == 1 {
            let n = i.max(j) as f64;
            -(n * (n + alpha)).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes = jac
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LaguerreError::EigenFailure)?;
    let q = order as f64;
    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let f = laguerre_functions(order + 1, alpha, *x);
            let (pq, pq1) = (f[order], f[order - 1]);
            let den = q * pq - (q * (q + alpha)).sqrt() * pq1;
            if den != 0.0 {
                let step = *x * pq / den;
                if step.is_finite() && step.abs() < 0.1 * *x {
                    *x -= step;
                }
            }
        }
    }
    let scaled_weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / laguerre_functions(order, alpha, x).iter().map(|v| v * v).sum::<f64>())
        .collect();
    let weights = nodes
        .iter()
        .zip(&scaled_weights)
        .map(|(&x, &s)| s * (alpha * x.ln() - x).exp())
        .collect();
    Ok(QuadratureRule { nodes, weights, scaled_weights, order, alpha })
}

/// Golub–Welsch weights `μ₀ v₀²` from the Jacobi eigenvectors.
///
/// Kept as an independent cross-check of the Christoffel weights; it loses
/// relative accuracy once the weights underflow.
pub fn golub_welsch_weights(order: usize, alpha: f64) -> Result<(Vec<f64>, Vec<f64>), LaguerreError> {
    let jac = Mat::<f64>::from_fn(order, order, |i, j| {
        if i == j {
            2.0 * i as f64 + alpha + 1.0
        } else if i.abs_diff(j) == 1 {
            let n = i.max(j) as f64;
            -(n * (n + alpha)).sqrt()
        } else {
            0.0
        }
    });
    let e = jac
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LaguerreError::EigenFailure)?;
    let mu0 = ln_gamma(alpha + 1.0).exp();
    let s = e.S().column_vector();
    let u = e.U();
    let nodes = (0..order).map(|i| s[i]).collect();
    let weights = (0..order).map(|i| mu0 * u[(0, i)] * u[(0, i)]).collect();
    Ok((nodes, weights))
}

/// Which of the two energy-space bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// `Z_m(E)`, Laguerre in `2βE`.
    Z,
    /// `Z̃_m(E)`, Laguerre in `2βE²`.
    Ztilde,
}

/// Parameters of a truncated basis. Internal index `n = m − k ∈ {0..M−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub k: f64,
    pub beta: f64,
    pub m: usize,
}

impl BasisSpec {
    pub fn new(k: f64, beta: f64, m: usize) -> Result<Self, LaguerreError> {
        if !(k >= 0.5) || !k.is_finite() {
            return Err(LaguerreError::WeightBelowHalf(k));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(LaguerreError::BadScale(beta));
        }
        if m == 0 {
            return Err(LaguerreError::EmptyBasis);
        }
        Ok(BasisSpec { k, beta, m })
    }

    /// `k ≥ 1`.
    pub fn is_psl2(&self) -> bool {
        self.k >= 1.0
    }

    /// Laguerre parameter `2k − 1`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.k - 1.0
    }

    /// All `M` basis functions at `E > 0`.
    pub fn column(&self, e: f64, which: BasisKind) -> Vec<f64> {
        match which {
            BasisKind::Z => {
                let s = (2.0 * self.beta).sqrt();
                let mut v = laguerre_functions(self.m, self.alpha(), 2.0 * self.beta * e);
                v.iter_mut().for_each(|x| *x *= s);
                v
            }
            BasisKind::Ztilde => {
                let s = 2.0 * self.beta.sqrt() * e.sqrt();
                let mut v = laguerre_functions(self.m, self.alpha(), 2.0 * self.beta * e * e);
                v.iter_mut().for_each(|x| *x *= s);
                v
            }
        }
    }
}

/// The `n`-th basis function (`m = n + k`) at `E > 0`.
pub fn basis_eval(spec: &BasisSpec, n: usize, e: f64, which: BasisKind) -> f64 {
    assert!(n < spec.m, "basis index {n} out of range");
    let mut col = *spec;
    col.m = n + 1;
    col.column(e, which)[n]
}

/// The printed closed forms, with the Γ-ratio taken in log space. Used as an
/// independent oracle for [`basis_eval`].
pub fn basis_eval_closed_form(spec: &BasisSpec, n: usize, e: f64, which: BasisKind) -> f64 {
    let k = spec.k;
    let nf = n as f64;
    let log_ratio = ln_gamma(nf + 1.0) - ln_gamma(nf + 2.0 * k);
    let (arg, lead) = match which {
        BasisKind::Z => (2.0 * spec.beta * e, 0.0),
        BasisKind::Ztilde => (2.0 * spec.beta * e * e, 2f64.ln()),
    };
    let log_pref = 0.5 * (lead + log_ratio - e.ln()) + k * arg.ln() - 0.5 * arg;
    log_pref.exp() * laguerre_eval(n, 2.0 * k - 1.0, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize, alpha: f64, x: f64) -> f64 {
        // L_n^α(x) = Σ_i (−1)^i C(n+α, n−i) x^i / i!
        (0..=n)
            .map(|i| {
                let lc = ln_gamma(n as f64 + alpha + 1.0)
                    - ln_gamma((n - i) as f64 + 1.0)
                    - ln_gamma(alpha + i as f64 + 1.0);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (lc + i as f64 * x.ln() - ln_gamma(i as f64 + 1.0)).exp()
            })
            .sum()
    }

    #[test]
    fn low_order_values() {
        assert_eq!(laguerre_eval(0, 3.7, 11.0), 1.0);
        assert_eq!(laguerre_eval(1, 2.0, 3.0), 0.0);
        let v = laguerre_eval(5, 1.5, 2.3);
        assert!((v - series(5, 1.5, 2.3)).abs() < 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn recurrence_matches_series() {
        for &alpha in &[0.0, 0.5, 1.0, 2.0] {
            for n in 0..=30 {
                for &x in &[0.01, 0.7, 3.0, 9.5, 20.0, 50.0] {
                    let r = laguerre_eval(n, alpha, x);
                    let s = series(n, alpha, x);
                    let scale = (0..=n).map(|i| {
                        (ln_gamma(n as f64 + alpha + 1.0) - ln_gamma((n - i) as f64 + 1.0)
                            - ln_gamma(alpha + i as f64 + 1.0) + i as f64 * x.ln()
                            - ln_gamma(i as f64 + 1.0)).exp()
                    }).fold(1.0f64, f64::max);
                    assert!((r - s).abs() <= 1e-11 * scale, "n={n} a={alpha} x={x}: {r} vs {s}");
                }
            }
        }
    }

    #[test]
    fn functions_match_closed_form() {
        let alpha = 1.0;
        let x = 2.5;
        let f = laguerre_functions(6, alpha, x);
        for (n, v) in f.iter().enumerate() {
            let nf = n as f64;
            let norm = (ln_gamma(nf + 1.0) - ln_gamma(nf + alpha + 1.0)).exp().sqrt();
            let want = norm * x.powf(alpha / 2.0) * (-x / 2.0).exp() * laguerre_eval(n, alpha, x);
            assert!((v - want).abs() < 1e-14, "{n}");
        }
    }

    #[test]
    fn functions_finite_at_extremes() {
        for &x in &[1e-8, 1e-3, 10.0, 1e3, 2e4] {
            let f = laguerre_functions(512, 1.0, x);
            assert!(f.iter().all(|v| v.is_finite()), "x={x}");
        }
    }

    #[test]
    fn single_point_rule() {
        let r = gauss_laguerre(1, 0.0).unwrap();
        assert!((r.nodes[0] - 1.0).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn twenty_point_fifth_moment() {
        let r = gauss_laguerre(20, 0.0).unwrap();
        let m5 = r.integrate(|x| x.powi(5));
        assert!((m5 - 120.0).abs() < 1e-12 * 120.0);
    }

    #[test]
    fn sixty_four_point_moments() {
        let r = gauss_laguerre(64, 1.0).unwrap();
        for j in 0..=40 {
            let want = ln_gamma(1.0 + j as f64 + 1.0);
            // compare in log space to keep Γ(42) representable
            let got: f64 = r.integrate(|x| (j as f64 * x.ln() - want).exp());
            assert!((got - 1.0).abs() < 1e-10, "j={j}: {got}");
        }
    }

    #[test]
    fn christoffel_weights_match_golub_welsch() {
        let r = gauss_laguerre(40, 0.5).unwrap();
        let (nodes, w) = golub_welsch_weights(40, 0.5).unwrap();
        for i in 0..10 {
            assert!((r.nodes[i] - nodes[i]).abs() < 1e-11 * nodes[i].max(1.0));
            assert!((r.weights[i] - w[i]).abs() < 1e-9 * w[i]);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(gauss_laguerre(0, 0.0).unwrap_err(), LaguerreError::EmptyRule);
        assert_eq!(gauss_laguerre(3, -1.0).unwrap_err(), LaguerreError::BadAlpha(-1.0));
        assert!(BasisSpec::new(0.4, 1.0, 8).is_err());
    }

    #[test]
    fn ground_state_closed_form() {
        let spec = BasisSpec::new(1.0, 1.0, 4).unwrap();
        for &e in &[0.5, 1.0, 2.0] {
            // Z_0 = √(1/E)·2E·e^{−E} = 2√E e^{−E}
            let want = 2.0 * f64::sqrt(e) * (-e).exp();
            assert!((basis_eval(&spec, 0, e, BasisKind::Z) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn recurrence_agrees_with_printed_forms() {
        for which in [BasisKind::Z, BasisKind::Ztilde] {
            let spec = BasisSpec::new(1.5, 0.7, 40).unwrap();
            for n in [0, 1, 7, 39] {
                for &e in &[0.2, 1.3, 4.0] {
                    let a = basis_eval(&spec, n, e, which);
                    let b = basis_eval_closed_form(&spec, n, e, which);
                    assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{which:?} n={n} E={e}");
                }
            }
        }
    }

    fn gram_deviation(spec: &BasisSpec, which: BasisKind, order: usize) -> f64 {
        // substitute x = 2βE (or u = 2βE²) and integrate against e^{−x} x^α
        let r = gauss_laguerre(order, spec.alpha()).unwrap();
        let m = spec.m;
        let mut g = vec![0.0; m * m];
        for (&x, &w) in r.nodes.iter().zip(&r.scaled_weights) {
            let (e, jac) = match which {
                BasisKind::Z => (x / (2.0 * spec.beta), 1.0 / (2.0 * spec.beta)),
                BasisKind::Ztilde => {
                    let e = (x / (2.0 * spec.beta)).sqrt();
                    (e, 1.0 / (4.0 * spec.beta * e))
                }
            };
            let col = spec.column(e, which);
            for i in 0..m {
                for j in 0..m {
                    g[i * m + j] += w * col[i] * col[j] * jac;
                }
            }
        }
        (0..m * m)
            .map(|ij| (g[ij] - if ij / m == ij % m { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gram_identity() {
        for k in [0.5, 1.0, 1.5, 2.0] {
            let spec = BasisSpec::new(k, 1.3, 32).unwrap();
            for which in [BasisKind::Z, BasisKind::Ztilde] {
                let dev = gram_deviation(&spec, which, 2 * 32 + (2.0 * k).ceil() as usize);
                assert!(dev < 1e-9, "k={k} {which:?}: {dev}");
            }
        }
    }

    #[test]
    fn gram_converges_with_order() {
        // order M+k already integrates every product exactly
        let spec = BasisSpec::new(1.0, 1.0, 24).unwrap();
        let devs: Vec<f64> = [12, 24 + 1, 48 + 2, 96 + 4]
            .iter()
            .map(|&q| gram_deviation(&spec, BasisKind::Z, q))
            .collect();
        assert!(devs[0] > 1e-3, "{devs:?}");
        assert!(devs[1..].iter().all(|&d| d < 1e-13), "{devs:?}");
    }
}
