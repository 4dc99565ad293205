//! Local wavefunctions on the half line and their energy-space images.
//!
//! A real bump `ψ(x)` supported in `[a, b] ⊂ (0, ∞)` is sampled on `[0, x_max]`.
//! Its positive-energy transform is
//!
//! ```text
//! ψ̂(E)  = ∫ e^{iEx} ψ(x) dx
//! ψ̃₊(E) = √(E/π) ψ̂(E)
//! ```
//!
//! normalized so that `‖ψ̃₊‖² = iσ(ψ̄₊, ψ₊)`, where `ψ₊` is the
//! positive-frequency part of `ψ`. From the energy samples a state is either
//! projected onto a Laguerre basis or sampled on an energy grid.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid_oracle::{GridError, GridSpec, GridState};
use crate::laguerre::{BasisKind, BasisSpec};
use crate::linalg::c;
use crate::mobius_geometry::{ExtReal, MoebiusMap};
use crate::spectral_rep::SpectralError;

pub const STATE_FORMAT_VERSION: u32 = 1;

/// States losing more than this fraction of `‖ψ̃₊‖²` are rejected.
pub const PROJECTION_LOSS_LIMIT: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("interval [{a}, {b}] must satisfy 0 < a < b < inf")]
    InvalidInterval { a: f64, b: f64 },
    #[error("interval [{a}, {b}] is narrower than 4 x-grid spacings ({spacing:e})")]
    DegenerateInterval { a: f64, b: f64, spacing: f64 },
    #[error("bump shape does not fit its interval: {0}")]
    InvalidBump(String),
    #[error("energies up to {e_max} exceed the x-grid Nyquist limit {limit}")]
    NyquistViolation { e_max: f64, limit: f64 },
    #[error("projection lost {loss:e} of the norm (limit {limit:e})")]
    ProjectionLoss { loss: f64, limit: f64 },
    #[error("localization is implemented for k = 1 only, got {0}")]
    UnsupportedWeight(f64),
    #[error("transformed support leaves the output x-grid")]
    SupportEscapesGrid,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("state file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpFamily {
    /// `exp(p − p/(1−u²))`, smooth.
    Mollifier,
    /// `cos(πu/2)^{4p}`.
    SineWindow,
    /// `(1−u²)^{4p}`.
    PolynomialWindow,
}

impl std::str::FromStr for BumpFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mollifier" => Ok(BumpFamily::Mollifier),
            "sine-window" => Ok(BumpFamily::SineWindow),
            "polynomial-window" => Ok(BumpFamily::PolynomialWindow),
            _ => Err(format!("unknown bump family {s:?}")),
        }
    }
}

fn default_power() -> f64 {
    1.0
}
fn default_samples() -> usize {
    4096
}
fn default_extent() -> f64 {
    4.0
}

/// A real bump in `[a, b]`, profile `f((x−center)/half_width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub a: f64,
    pub b: f64,
    pub family: BumpFamily,
    /// Defaults to the midpoint.
    #[serde(default)]
    pub center: Option<f64>,
    /// Defaults to `(b − a)/2`.
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default = "default_power")]
    pub power: f64,
    /// Multiply by `(x − x̄)` so that `∫ψ = 0`.
    #[serde(default)]
    pub moment_free: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// The x-grid is `[0, extent·b]`.
    #[serde(default = "default_extent")]
    pub extent: f64,
}

impl BumpSpec {
    pub fn new(a: f64, b: f64, family: BumpFamily) -> Result<Self, LocalizationError> {
        let s = BumpSpec {
            a,
            b,
            family,
            center: None,
            half_width: None,
            power: 1.0,
            moment_free: false,
            samples: default_samples(),
            extent: default_extent(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn mollifier(a: f64, b: f64) -> Result<Self, LocalizationError> {
        Self::new(a, b, BumpFamily::Mollifier)
    }

    pub fn center(&self) -> f64 {
        self.center.unwrap_or(0.5 * (self.a + self.b))
    }

    pub fn half_width(&self) -> f64 {
        self.half_width.unwrap_or(0.5 * (self.b - self.a))
    }

    pub fn x_max(&self) -> f64 {
        self.extent * self.b
    }

    pub fn spacing(&self) -> f64 {
        self.x_max() / (self.samples - 1) as f64
    }

    pub fn validate(&self) -> Result<(), LocalizationError> {
        let (a, b) = (self.a, self.b);
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(LocalizationError::InvalidInterval { a, b });
        }
        if self.samples < 16 || !(self.extent > 1.0) {
            return Err(LocalizationError::InvalidBump("need >= 16 samples and extent > 1".into()));
        }
        let dx = self.spacing();
        if b - a < 4.0 * dx {
            return Err(LocalizationError::DegenerateInterval { a, b, spacing: dx });
        }
        let (c0, w) = (self.center(), self.half_width());
        let slack = 1e-12 * b;
        if !(w > 0.0) || c0 - w < a - slack || c0 + w > b + slack {
            return Err(LocalizationError::InvalidBump(format!(
                "support [{}, {}] not inside [{a}, {b}]",
                c0 - w,
                c0 + w
            )));
        }
        if w < 2.0 * dx {
            return Err(LocalizationError::DegenerateInterval { a, b, spacing: dx });
        }
        if !(self.power > 0.0) {
            return Err(LocalizationError::InvalidBump(format!("power {} must be positive", self.power)));
        }
        Ok(())
    }

    fn profile(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let p = self.power;
        match self.family {
            BumpFamily::Mollifier => (p - p / (1.0 - u * u)).exp(),
            BumpFamily::SineWindow => (0.5 * std::f64::consts::PI * u).cos().powf(4.0 * p),
            BumpFamily::PolynomialWindow => (1.0 - u * u).powf(4.0 * p),
        }
    }
}

/// Seeded bumps in `[a, b]`: half-width in `[0.35, 0.5]·(b−a)`, power in
/// `[1, 2]`, centre uniform among positions that keep the support inside.
pub fn fixture_bumps(a: f64, b: f64, count: usize, seed: u64, moment_free: bool) -> Result<Vec<BumpSpec>, LocalizationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w = (0.35 + 0.15 * rng.random::<f64>()) * (b - a);
            let power = 1.0 + rng.random::<f64>();
            let lo = a + w;
            let hi = b - w;
            let center = lo + (hi - lo) * rng.random::<f64>();
            let mut s = BumpSpec::mollifier(a, b)?;
            s.center = Some(center);
            s.half_width = Some(w);
            s.power = power;
            s.moment_free = moment_free;
            s.validate()?;
            Ok(s)
        })
        .collect()
}

/// Real samples `ψ(x_j)` at `x_j = j·x_max/(n−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XFunction {
    pub x_max: f64,
    pub values: Vec<f64>,
}

impl XFunction {
    pub fn sample(x_max: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let dx = x_max / (n - 1) as f64;
        XFunction { x_max, values: (0..n).map(|j| f(j as f64 * dx)).collect() }
    }

    pub fn dx(&self) -> f64 {
        self.x_max / (self.values.len() - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Index range of the nonzero samples.
    pub fn support(&self) -> Option<(usize, usize)> {
        let lo = self.values.iter().position(|v| *v != 0.0)?;
        let hi = self.values.iter().rposition(|v| *v != 0.0)?;
        Some((lo, hi))
    }

    /// `π/dx`, the largest energy the samples resolve.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    /// 6-point Lagrange interpolation; zero outside `[0, x_max]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.values.len() as isize;
        if !(x >= 0.0 && x <= self.x_max) {
            return 0.0;
        }
        let s = x / self.dx();
        let base = (s.floor() as isize - 2).clamp(0, n - 6);
        let mut out = 0.0;
        for i in 0..6 {
            let pi = base + i;
            let mut l = 1.0;
            for j in 0..6 {
                if j != i {
                    let pj = base + j;
                    l *= (s - pj as f64) / (pi - pj) as f64;
                }
            }
            out += self.values[pi as usize] * l;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Samples the bump, subtracts its first moment if requested, and scales to
/// `max |ψ| = 1`.
pub fn make_bump(spec: &BumpSpec) -> Result<XFunction, LocalizationError> {
    spec.validate()?;
    let (c0, w) = (spec.center(), spec.half_width());
    let mut f = XFunction::sample(spec.x_max(), spec.samples, |x| spec.profile((x - c0) / w));
    if spec.moment_free {
        let m0: f64 = f.values.iter().sum();
        let m1: f64 = f.values.iter().enumerate().map(|(j, v)| v * j as f64).sum();
        let jbar = m1 / m0;
        let dx = f.dx();
        for (j, v) in f.values.iter_mut().enumerate() {
            *v *= (j as f64 - jbar) * dx;
        }
    }
    let top = f.max_abs();
    f.values.iter_mut().for_each(|v| *v /= top);
    Ok(f)
}

/// `ψ̂(E) = ∫ e^{iEx} ψ(x) dx` by the trapezoid rule. The supports are
/// compact, so the end corrections vanish.
pub fn psi_hat(psi: &XFunction, energies: &[f64]) -> Vec<C64> {
    let Some((lo, hi)) = psi.support() else {
        return vec![c(0.0); energies.len()];
    };
    let dx = psi.dx();
    let vals = &psi.values[lo..=hi];
    energies
        .iter()
        .map(|&e| {
            let step = C64::from_polar(1.0, e * dx);
            let mut acc = c(0.0);
            let mut w = c(0.0);
            for (j, v) in vals.iter().enumerate() {
                if j % 128 == 0 {
                    w = C64::from_polar(1.0, e * psi.x(lo + j));
                }
                acc += w * *v;
                w *= step;
            }
            acc * dx
        })
        .collect()
}

/// `ψ̃₊(E) = √(E/π) ψ̂(E)`.
pub fn psi_tilde(psi: &XFunction, energies: &[f64]) -> Vec<C64> {
    psi_hat(psi, energies)
        .into_iter()
        .zip(energies)
        .map(|(z, &e)| z * (e / std::f64::consts::PI).sqrt())
        .collect()
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Composite 16-point Gauss–Legendre mesh on `[0, e_max]`. Panels grow
/// geometrically away from `E = 0` and never exceed three local wavelengths.
#[derive(Debug, Clone)]
pub struct EMesh {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EMesh {
    pub fn adaptive(e_max: f64, wavenumber: impl Fn(f64) -> f64) -> Self {
        let mut edges = vec![0.0, 1e-8];
        let mut e = 1e-8;
        while e < e_max {
            let h = (0.5 * e + 1e-6).min(3.0 / wavenumber(e));
            e = (e + h).min(e_max);
            edges.push(e);
        }
        let (g, gw) = gauss_legendre(16);
        let mut nodes = Vec::with_capacity(16 * edges.len());
        let mut weights = Vec::with_capacity(16 * edges.len());
        for p in edges.windows(2) {
            let half = 0.5 * (p[1] - p[0]);
            for (x, w) in g.iter().zip(&gw) {
                nodes.push(p[0] + half * (x + 1.0));
                weights.push(half * w);
            }
        }
        EMesh { nodes, weights }
    }

    /// Mesh resolving `ψ̃₊` of `psi` and every basis in `targets`.
    pub fn for_targets(psi: &XFunction, targets: &[Target]) -> Self {
        let (lo, hi) = psi.support().unwrap_or((0, psi.values.len() - 1));
        let x_hi = psi.x(hi).max(psi.dx());
        let half = (0.5 * (psi.x(hi) - psi.x(lo))).max(psi.dx());
        let e_max = (250.0 / half).max(1200.0 / x_hi).min(0.9 * psi.nyquist());
        let targets = targets.to_vec();
        EMesh::adaptive(e_max, move |e| {
            let mut k = x_hi;
            for t in &targets {
                if let Target::Spectral { spec, kind } = t {
                    let m = spec.m as f64;
                    k += match kind {
                        BasisKind::Z => (2.0 * spec.beta * m / e).sqrt(),
                        BasisKind::Ztilde => (8.0 * spec.beta * m).sqrt(),
                    };
                }
            }
            k
        })
    }

    pub fn e_max(&self) -> f64 {
        self.nodes.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Where a state is sent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Spectral { spec: BasisSpec, kind: BasisKind },
    Grid(GridSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Representation {
    /// Coefficients in `Z_n` of weight `k` and scale `beta`.
    ZSpectral { k: f64, beta: f64, m: usize },
    /// Coefficients in `Z̃_n`; `k` is the basis weight, not the plain weight.
    ZtildeSpectral { k: f64, beta: f64, m: usize },
    /// Samples at `E_j = j·e_max/(n+1)`.
    EGrid { n: usize, e_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Provenance {
    Bump(BumpSpec),
    Synthetic { description: String, seed: Option<u64> },
}

/// A state in one of the backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub format_version: u32,
    pub representation: Representation,
    /// Weight of the plain representation the state belongs to.
    pub k: f64,
    pub coefficients: Vec<C64>,
    pub norm: f64,
    /// Fraction of `‖ψ̃₊‖²` that did not make it into the representation.
    pub projection_loss: f64,
    pub provenance: Provenance,
}

impl StateVector {
    /// Rejects states whose projection loss exceeds `limit`.
    pub fn accepted(self, limit: f64) -> Result<Self, LocalizationError> {
        if self.projection_loss > limit {
            return Err(LocalizationError::ProjectionLoss { loss: self.projection_loss, limit });
        }
        Ok(self)
    }

    pub fn grid_state(&self) -> Option<GridState> {
        match self.representation {
            Representation::EGrid { n, e_max } => Some(GridState {
                grid: GridSpec { n, e_max },
                samples: self.coefficients.clone(),
            }),
            _ => None,
        }
    }

    /// `ψ̃₊(E)` reconstructed from the stored representation.
    pub fn evaluate(&self, e: f64) -> C64 {
        if !(e > 0.0) {
            return c(0.0);
        }
        match self.representation {
            Representation::ZSpectral { k, beta, m } | Representation::ZtildeSpectral { k, beta, m } => {
                let kind = if matches!(self.representation, Representation::ZSpectral { .. }) {
                    BasisKind::Z
                } else {
                    BasisKind::Ztilde
                };
                let col = BasisSpec { k, beta, m }.column(e, kind);
                col.iter().zip(&self.coefficients).map(|(z, a)| a * *z).sum()
            }
            Representation::EGrid { .. } => self.grid_state().expect("grid").interpolate(e),
        }
    }

    /// `(E, ψ̃₊(E))` at `n` equally spaced energies in `(0, e_max]`.
    pub fn export_points(&self, e_max: f64, n: usize) -> Vec<(f64, C64)> {
        (1..=n)
            .map(|i| {
                let e = e_max * i as f64 / n as f64;
                (e, self.evaluate(e))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String, LocalizationError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LocalizationError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `ψ̃₊` of one function on an energy mesh, ready to be sent to targets.
#[derive(Debug, Clone)]
pub struct PositiveFrequency {
    pub mesh: EMesh,
    pub values: Vec<C64>,
    /// `∫|ψ̃₊|² dE` on the mesh.
    pub norm_sq: f64,
}

impl PositiveFrequency {
    pub fn compute(psi: &XFunction, mesh: EMesh) -> Result<Self, LocalizationError> {
        if mesh.e_max() > psi.nyquist() {
            return Err(LocalizationError::NyquistViolation { e_max: mesh.e_max(), limit: psi.nyquist() });
        }
        let values = psi_tilde(psi, &mesh.nodes);
        let norm_sq = values.iter().zip(&mesh.weights).map(|(z, w)| w * z.norm_sqr()).sum();
        Ok(PositiveFrequency { mesh, values, norm_sq })
    }

    fn loss(&self, kept: f64) -> f64 {
        if self.norm_sq == 0.0 { 0.0 } else { (1.0 - kept / self.norm_sq).max(0.0) }
    }

    /// Coefficients `⟨Z_n, ψ̃₊⟩` by mesh quadrature.
    pub fn project_basis(&self, spec: &BasisSpec, kind: BasisKind, k: f64, provenance: Provenance) -> StateVector {
        let mut coef = vec![c(0.0); spec.m];
        for ((&e, &w), v) in self.mesh.nodes.iter().zip(&self.mesh.weights).zip(&self.values) {
            let wv = v * w;
            for (a, z) in coef.iter_mut().zip(spec.column(e, kind)) {
                *a += wv * z;
            }
        }
        let n2: f64 = coef.iter().map(|z| z.norm_sqr()).sum();
        let representation = match kind {
            BasisKind::Z => Representation::ZSpectral { k: spec.k, beta: spec.beta, m: spec.m },
            BasisKind::Ztilde => Representation::ZtildeSpectral { k: spec.k, beta: spec.beta, m: spec.m },
        };
        StateVector {
            format_version: STATE_FORMAT_VERSION,
            representation,
            k,
            coefficients: coef,
            norm: n2.sqrt(),
            projection_loss: self.loss(n2),
            provenance,
        }
    }

    /// `ψ̃₊` at the grid nodes. The loss is the mesh mass beyond `E_max`.
    pub fn sample_grid(&self, psi: &XFunction, grid: GridSpec, k: f64, provenance: Provenance) -> Result<StateVector, LocalizationError> {
        check_grid_nyquist(psi, grid)?;
        let samples = psi_tilde(psi, &grid.nodes());
        let inside: f64 = self
            .mesh
            .nodes
            .iter()
            .zip(&self.mesh.weights)
            .zip(&self.values)
            .filter(|((e, _), _)| **e < grid.e_max)
            .map(|((_, w), z)| w * z.norm_sqr())
            .sum();
        let state = GridState { grid, samples };
        Ok(StateVector {
            format_version: STATE_FORMAT_VERSION,
            representation: Representation::EGrid { n: grid.n, e_max: grid.e_max },
            k,
            norm: state.norm(),
            coefficients: state.samples,
            projection_loss: self.loss(inside),
            provenance,
        })
    }
}

fn check_grid_nyquist(psi: &XFunction, grid: GridSpec) -> Result<(), LocalizationError> {
    if grid.e_max > psi.nyquist() {
        return Err(LocalizationError::NyquistViolation { e_max: grid.e_max, limit: psi.nyquist() });
    }
    // ψ̃₊ oscillates like e^{iEx} with x up to the support end
    let x_hi = psi.support().map(|(_, hi)| psi.x(hi)).unwrap_or(0.0);
    let limit = std::f64::consts::PI / (2.0 * x_hi.max(f64::MIN_POSITIVE));
    if grid.spacing() > limit {
        return Err(LocalizationError::NyquistViolation { e_max: grid.spacing(), limit });
    }
    Ok(())
}

/// One-shot transform of `psi` into `target`, rejecting lossy projections.
pub fn positive_frequency(psi: &XFunction, target: &Target, k: f64, provenance: Provenance) -> Result<StateVector, LocalizationError> {
    let mesh = EMesh::for_targets(psi, std::slice::from_ref(target));
    let pf = PositiveFrequency::compute(psi, mesh)?;
    let state = match target {
        Target::Spectral { spec, kind } => pf.project_basis(spec, *kind, k, provenance),
        Target::Grid(g) => pf.sample_grid(psi, *g, k, provenance)?,
    };
    state.accepted(PROJECTION_LOSS_LIMIT)
}

const D8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// Eighth-order centred first derivative. Outside the samples the function
/// is taken as zero, or periodic when `periodic` is set.
pub fn derivative<T>(v: &[T], dx: f64, periodic: bool) -> Vec<T>
where
    T: Copy + Default + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::AddAssign,
{
    let n = v.len() as isize;
    let at = |i: isize| -> T {
        if periodic {
            v[i.rem_euclid(n) as usize]
        } else if i < 0 || i >= n {
            T::default()
        } else {
            v[i as usize]
        }
    };
    (0..n)
        .map(|i| {
            let mut acc = T::default();
            for (m, w) in D8.iter().enumerate() {
                let s = m as isize + 1;
                acc += (at(i + s) - at(i - s)) * (w / dx);
            }
            acc
        })
        .collect()
}

/// `σ(ψ, ψ′) = ∫(ψ∂ψ′ − ψ′∂ψ) dx` for real samples on a common grid.
pub fn symplectic(psi: &XFunction, phi: &XFunction) -> f64 {
    let dx = psi.dx();
    let dpsi = derivative(&psi.values, dx, false);
    let dphi = derivative(&phi.values, dx, false);
    dx * (0..psi.values.len())
        .map(|j| psi.values[j] * dphi[j] - phi.values[j] * dpsi[j])
        .sum::<f64>()
}

/// Complex bilinear `σ(f, g)` for periodic samples.
pub fn symplectic_periodic(f: &[C64], g: &[C64], dx: f64) -> C64 {
    let df = derivative(f, dx, true);
    let dg = derivative(g, dx, true);
    (0..f.len()).map(|j| f[j] * dg[j] - g[j] * df[j]).sum::<C64>() * dx
}

/// `ψ₊` sampled on a periodic extension of the x-grid, `pad` times longer
/// (rounded to a power of two). The zero mode is split evenly between `ψ₊`
/// and its conjugate.
pub fn positive_frequency_part(psi: &XFunction, pad: usize) -> (f64, Vec<C64>) {
    let len = (psi.values.len() * pad.max(1)).next_power_of_two();
    let dx = psi.dx();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<C64> = (0..len).map(|j| c(psi.values.get(j).copied().unwrap_or(0.0))).collect();
    // Σ_j ψ_j e^{+iE_m x_j} = unnormalized inverse DFT
    planner.plan_fft_inverse(len).process(&mut buf);
    let period = len as f64 * dx;
    for (m, z) in buf.iter_mut().enumerate() {
        let keep = if m == 0 { 0.5 } else if m < len / 2 { 1.0 } else { 0.0 };
        *z *= keep * dx;
    }
    // ψ₊(x_j) = (1/P) Σ_m ψ̂_m e^{−iE_m x_j}
    planner.plan_fft_forward(len).process(&mut buf);
    buf.iter_mut().for_each(|z| *z /= period);
    (dx, buf)
}

/// `iσ(ψ̄₊, ψ₊)`, the one-particle norm computed in x-space.
pub fn sigma_norm_sq(psi: &XFunction) -> f64 {
    let (dx, plus) = positive_frequency_part(psi, 128);
    let bar: Vec<C64> = plus.iter().map(|z| z.conj()).collect();
    (C64::new(0.0, 1.0) * symplectic_periodic(&bar, &plus, dx)).re
}

/// `max |ψ₊ + conj ψ₊ − ψ| / max |ψ|`: how well the positive-frequency part
/// reproduces the real function it came from.
pub fn realness_residual(psi: &XFunction) -> f64 {
    let top = psi.max_abs();
    if top == 0.0 {
        return 0.0;
    }
    let (_, plus) = positive_frequency_part(psi, 4);
    psi.values
        .iter()
        .zip(&plus)
        .map(|(v, p)| (2.0 * p.re - v).abs())
        .fold(0.0, f64::max)
        / top
}

/// `(U_g ψ)(x) = ψ(g⁻¹x) − ψ(g⁻¹∞)`, resampled on `[0, x_max]` with `n`
/// points.
pub fn moebius_on_wavefunction(g: &MoebiusMap, psi: &XFunction, x_max: f64, n: usize) -> Result<XFunction, LocalizationError> {
    let Some((lo, hi)) = psi.support() else {
        return Ok(XFunction { x_max, values: vec![0.0; n] });
    };
    let (x_lo, x_hi) = (psi.x(lo.saturating_sub(1)), psi.x((hi + 1).min(psi.values.len() - 1)));
    if g.c != 0.0 {
        let pole = -g.d / g.c;
        if pole >= x_lo && pole <= x_hi {
            return Err(LocalizationError::SupportEscapesGrid);
        }
    }
    let out_dx = x_max / (n - 1) as f64;
    for x in [x_lo, x_hi] {
        match g.act(x) {
            ExtReal::Finite(y) if y > 4.0 * out_dx && y < x_max - 4.0 * out_dx => {}
            _ => return Err(LocalizationError::SupportEscapesGrid),
        }
    }
    let inv = g.inverse();
    let at_inf = match inv.act_point(ExtReal::Infinity) {
        ExtReal::Finite(y) => psi.interpolate(y),
        ExtReal::Infinity => 0.0,
    };
    Ok(XFunction::sample(x_max, n, |x| match inv.act(x) {
        ExtReal::Finite(y) => psi.interpolate(y) - at_inf,
        ExtReal::Infinity => -at_inf,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_support_and_symmetry() {
        let spec = BumpSpec::mollifier(1.0, 2.0).unwrap();
        let f = make_bump(&spec).unwrap();
        for (j, v) in f.values.iter().enumerate() {
            let x = f.x(j);
            if x <= 1.0 || x >= 2.0 {
                assert_eq!(*v, 0.0);
            }
        }
        let (lo, hi) = f.support().unwrap();
        // grid symmetric about 1.5 up to one sample
        let mid = (lo + hi) / 2;
        assert!((f.x(mid) - 1.5).abs() < 2.0 * f.dx());
        assert!((f.max_abs() - 1.0).abs() < 1e-15);
        let g = XFunction::sample(f.x_max, f.values.len(), |x| {
            let u: f64 = (x - 1.5) / 0.5;
            if u.abs() < 1.0 { (1.0 - 1.0 / (1.0 - u * u)).exp() } else { 0.0 }
        });
        let r = XFunction::sample(f.x_max, f.values.len(), |x| g.interpolate(3.0 - x));
        for (a, b) in g.values.iter().zip(&r.values) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_and_inverted_intervals() {
        assert!(matches!(BumpSpec::mollifier(2.0, 1.0), Err(LocalizationError::InvalidInterval { .. })));
        assert!(matches!(BumpSpec::mollifier(1.0, 1.0005), Err(LocalizationError::DegenerateInterval { .. })));
        assert!(matches!(BumpSpec::mollifier(0.0, 1.0), Err(LocalizationError::InvalidInterval { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn psi_hat_of_box_like_gaussian() {
        // ∫ e^{iEx} e^{−(x−4)²/2} dx = √(2π) e^{4iE − E²/2}
        let f = XFunction::sample(8.0 * 2.0, 8192, |x| (-(x - 8.0) * (x - 8.0) / 2.0).exp());
        let es = [0.0, 0.5, 1.3, 3.0];
        for (e, z) in es.iter().zip(psi_hat(&f, &es)) {
            let exact = C64::from_polar((2.0 * std::f64::consts::PI).sqrt() * (-e * e / 2.0).exp(), 8.0 * e);
            assert!((z - exact).norm() < 1e-10, "{e}: {z} vs {exact}");
        }
    }

    #[test]
    fn zero_function_gives_zero_state() {
        let f = XFunction { x_max: 8.0, values: vec![0.0; 4096] };
        let target = Target::Spectral { spec: BasisSpec::new(1.0, 2.0, 32).unwrap(), kind: BasisKind::Z };
        let s = positive_frequency(&f, &target, 1.0, Provenance::Synthetic { description: "zero".into(), seed: None })
            .unwrap();
        assert!(s.coefficients.iter().all(|z| *z == c(0.0)));
        assert_eq!(s.norm, 0.0);
    }

    #[test]
    fn sigma_norm_matches_energy_norm() {
        for moment_free in [false, true] {
            let mut spec = BumpSpec::mollifier(1.0, 2.0).unwrap();
            spec.moment_free = moment_free;
            let f = make_bump(&spec).unwrap();
            let pf = PositiveFrequency::compute(&f, EMesh::for_targets(&f, &[])).unwrap();
            let s = sigma_norm_sq(&f);
            assert!((s - pf.norm_sq).abs() < 1e-6 * pf.norm_sq, "{moment_free}: {s} vs {}", pf.norm_sq);
        }
    }

    #[test]
    fn realness_is_reproduced() {
        let f = make_bump(&BumpSpec::mollifier(1.0, 2.0).unwrap()).unwrap();
        assert!(realness_residual(&f) < 1e-6);
    }

    #[test]
    fn small_energy_law() {
        let f = make_bump(&BumpSpec::mollifier(1.0, 2.0).unwrap()).unwrap();
        let es = [1e-2, 1e-3, 1e-4, 1e-5];
        let r: Vec<f64> = psi_tilde(&f, &es).iter().zip(&es).map(|(z, e)| z.norm() / e.sqrt()).collect();
        let limit = f.values.iter().sum::<f64>() * f.dx() / std::f64::consts::PI.sqrt();
        assert!((r[3] - limit).abs() < 1e-6 * limit);
        assert!(limit > 0.0);
    }

    #[test]
    fn symplectic_form_basics() {
        let a = make_bump(&BumpSpec::mollifier(1.0, 2.0).unwrap()).unwrap();
        assert_eq!(symplectic(&a, &a), 0.0);
        let mut s2 = BumpSpec::mollifier(3.0, 4.0).unwrap();
        s2.extent = 2.0;
        let b = make_bump(&s2).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        assert!((a.x_max - b.x_max).abs() < 1e-15);
        assert!(symplectic(&a, &b).abs() < 1e-12);
    }

    #[test]
    fn symplectic_matches_refined_oracle() {
        let f = |x: f64, c0: f64| {
            let u: f64 = (x - c0) / 0.5;
            if u.abs() < 1.0 { (1.0 - 1.0 / (1.0 - u * u)).exp() } else { 0.0 }
        };
        let coarse = |n: usize| {
            let a = XFunction::sample(4.0, n, |x| f(x, 1.5));
            let b = XFunction::sample(4.0, n, |x| x * f(x, 1.8));
            symplectic(&a, &b)
        };
        let (s1, s2) = (coarse(4096), coarse(32768));
        assert!((s1 - s2).abs() < 1e-8 * s2.abs(), "{s1} {s2}");
    }

    #[test]
    fn dilation_moves_support() {
        let f = make_bump(&BumpSpec::mollifier(1.0, 2.0).unwrap()).unwrap();
        let g = MoebiusMap::dilation(2.0).unwrap();
        let out = moebius_on_wavefunction(&g, &f, 32.0, 4096).unwrap();
        let (lo, hi) = out.support().unwrap();
        assert!((out.x(lo) - 4.0).abs() < 2.0 * out.dx());
        assert!((out.x(hi) - 8.0).abs() < 2.0 * out.dx());
        let id = moebius_on_wavefunction(&MoebiusMap::identity(), &f, f.x_max, f.values.len()).unwrap();
        for (a, b) in id.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-14);
        }
        let too_far = MoebiusMap::dilation(4.0).unwrap();
        assert!(matches!(
            moebius_on_wavefunction(&too_far, &f, 8.0, 4096),
            Err(LocalizationError::SupportEscapesGrid)
        ));
    }

    #[test]
    fn state_json_round_trip() {
        let f = make_bump(&BumpSpec::mollifier(1.0, 2.0).unwrap()).unwrap();
        let grid = GridSpec::new(256, 100.0).unwrap();
        let s = positive_frequency(&f, &Target::Grid(grid), 1.0, Provenance::Bump(BumpSpec::mollifier(1.0, 2.0).unwrap()))
            .unwrap();
        let back = StateVector::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
