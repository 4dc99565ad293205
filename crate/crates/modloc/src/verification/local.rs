//! Expectation values of local states in both backends.

use serde::{Deserialize, Serialize};

use crate::grid_oracle::{GridSpec, build_grid_ops, build_grid_tilde_ops, grid_t_expectation};
use crate::laguerre::BasisKind;
use crate::linalg;
use crate::localization::{
    BumpSpec, EMesh, LocalizationError, PositiveFrequency, Provenance, StateVector, Target, XFunction, make_bump,
    PROJECTION_LOSS_LIMIT,
};
use crate::spectral_rep::{GeneratorSet, HermitianOperator, build_t};

/// Plain and tilde triples at reference scales `β₀` and `β̃₀`, from which
/// the scales matched to an interval are obtained by exact rescaling.
#[derive(Debug, Clone)]
pub struct SpectralBackend {
    pub plain: GeneratorSet,
    pub tilde: GeneratorSet,
}

/// The backend rescaled to `β = bβ₀`, `β̃ = b²β̃₀`, with `T` built.
#[derive(Debug, Clone)]
pub struct ScaledBackend {
    pub plain: GeneratorSet,
    pub tilde: GeneratorSet,
    pub t: HermitianOperator,
}

impl SpectralBackend {
    pub fn new(plain: GeneratorSet, tilde: GeneratorSet) -> Result<Self, LocalizationError> {
        if (plain.spec.k - 1.0).abs() > 1e-12 {
            return Err(LocalizationError::UnsupportedWeight(plain.spec.k));
        }
        Ok(SpectralBackend { plain, tilde })
    }

    pub fn at_scale(&self, b: f64) -> Result<ScaledBackend, LocalizationError> {
        let plain = self.plain.rescaled(b);
        let tilde = self.tilde.rescaled(b * b);
        let t = build_t(&tilde)?;
        Ok(ScaledBackend { plain, tilde, t })
    }
}

/// Unnormalized expectation values. Plain quantities are taken against
/// `norm_sq`, tilde quantities against `norm_sq_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub norm_sq: f64,
    pub norm_sq_tilde: f64,
    pub h: f64,
    pub c: f64,
    pub d: f64,
    pub ct: f64,
    pub t: f64,
}

impl Moments {
    /// `(⟨H⟩, ⟨C⟩, ⟨D⟩, ⟨C̃⟩, ⟨T⟩)` per unit norm.
    pub fn normalized(&self) -> [f64; 5] {
        [
            self.h / self.norm_sq,
            self.c / self.norm_sq,
            self.d / self.norm_sq,
            self.ct / self.norm_sq_tilde,
            self.t / self.norm_sq_tilde,
        ]
    }
}

/// A bump carried into both backends.
#[derive(Debug, Clone)]
pub struct LocalizedState {
    pub bump: BumpSpec,
    pub psi: XFunction,
    pub z: StateVector,
    pub zt: StateVector,
    pub spectral: Moments,
    /// Richardson-extrapolated grid values, and the two grids used.
    pub grid: Moments,
    pub grids: (GridSpec, GridSpec),
    /// `‖ψ̃₊‖²` on the energy mesh.
    pub mesh_norm_sq: f64,
}

/// Grid extent for an interval ending at `b`.
pub fn local_grid_extent(scale: f64, b: f64) -> f64 {
    scale / b
}

fn spectral_moments(z: &StateVector, zt: &StateVector, be: &ScaledBackend) -> Moments {
    let (p, t) = (&be.plain, &be.tilde);
    let v = &z.coefficients;
    let w = &zt.coefficients;
    Moments {
        norm_sq: linalg::norm_sq(v),
        norm_sq_tilde: linalg::norm_sq(w),
        h: linalg::expectation(p.h.as_ref(), v),
        c: linalg::expectation(p.c.as_ref(), v),
        d: linalg::expectation(p.d.as_ref(), v),
        ct: linalg::expectation(t.c.as_ref(), w),
        t: be.t.expectation(w),
    }
}

/// Grid moments of `ψ̃₊` at weight 1.
pub fn grid_moments(psi: &XFunction, grid: GridSpec) -> Result<Moments, LocalizationError> {
    let f = crate::localization::psi_tilde(psi, &grid.nodes());
    let plain = build_grid_ops(grid, 1.0);
    let tilde = build_grid_tilde_ops(grid, 1.0);
    let n2 = grid.spacing() * linalg::norm_sq(&f);
    Ok(Moments {
        norm_sq: n2,
        norm_sq_tilde: n2,
        h: plain.expectation(&plain.h, &f),
        c: plain.expectation(&plain.c, &f),
        d: plain.expectation(&plain.d, &f),
        ct: tilde.expectation(&tilde.c, &f),
        t: grid_t_expectation(&tilde, &f)?,
    })
}

/// Richardson on normalized values, for spacings `h_c > h_f` of a second
/// order scheme. The result is expressed with unit norm.
pub fn extrapolate(coarse: &Moments, h_c: f64, fine: &Moments, h_f: f64) -> Moments {
    let r2 = (h_c / h_f).powi(2);
    let (a, b) = (coarse.normalized(), fine.normalized());
    let x: Vec<f64> = (0..5).map(|i| (r2 * b[i] - a[i]) / (r2 - 1.0)).collect();
    Moments { norm_sq: 1.0, norm_sq_tilde: 1.0, h: x[0], c: x[1], d: x[2], ct: x[3], t: x[4] }
}

/// Localizes `bump` into the spectral backend (at `β = bβ₀`) and onto two
/// grids of `n/2` and `n` points over `[0, grid_scale/b]`.
pub fn localize_bump(
    bump: &BumpSpec,
    backend: &ScaledBackend,
    grid_n: usize,
    grid_scale: f64,
) -> Result<LocalizedState, LocalizationError> {
    let psi = make_bump(bump)?;
    localize_function(psi, bump.clone(), backend, grid_n, grid_scale)
}

/// As [`localize_bump`] for an already sampled function; `bump` records the
/// interval the function is attributed to.
pub fn localize_function(
    psi: XFunction,
    bump: BumpSpec,
    backend: &ScaledBackend,
    grid_n: usize,
    grid_scale: f64,
) -> Result<LocalizedState, LocalizationError> {
    let targets = [
        Target::Spectral { spec: backend.plain.spec, kind: BasisKind::Z },
        Target::Spectral { spec: backend.tilde.spec, kind: BasisKind::Ztilde },
    ];
    let pf = PositiveFrequency::compute(&psi, EMesh::for_targets(&psi, &targets))?;
    let prov = Provenance::Bump(bump.clone());
    let z = pf
        .project_basis(&backend.plain.spec, BasisKind::Z, 1.0, prov.clone())
        .accepted(PROJECTION_LOSS_LIMIT)?;
    let zt = pf
        .project_basis(&backend.tilde.spec, BasisKind::Ztilde, 1.0, prov)
        .accepted(PROJECTION_LOSS_LIMIT)?;
    let e_max = local_grid_extent(grid_scale, bump.b);
    let fine = GridSpec::new(grid_n, e_max)?;
    let coarse = GridSpec::new(grid_n / 2, e_max)?;
    let gc = grid_moments(&psi, coarse)?;
    let gf = grid_moments(&psi, fine)?;
    Ok(LocalizedState {
        spectral: spectral_moments(&z, &zt, backend),
        grid: extrapolate(&gc, coarse.spacing(), &gf, fine.spacing()),
        grids: (coarse, fine),
        mesh_norm_sq: pf.norm_sq,
        bump,
        psi,
        z,
        zt,
    })
}

/// One row of the `localize` summary table. Values are absent when the
/// state could not be built.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LocalRow {
    pub a: f64,
    pub b: f64,
    pub norm: Option<f64>,
    pub h: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub t: Option<f64>,
    pub log_a: f64,
    pub log_b: f64,
    pub in_bounds: bool,
    pub grid_t: Option<f64>,
    pub projection_loss: Option<f64>,
    pub error: Option<String>,
}

impl LocalRow {
    pub fn from_state(s: &LocalizedState) -> Self {
        let m = s.spectral.normalized();
        let (a, b) = (s.bump.a, s.bump.b);
        LocalRow {
            a,
            b,
            norm: Some(s.spectral.norm_sq.sqrt()),
            h: Some(m[0]),
            c: Some(m[1]),
            d: Some(m[2]),
            t: Some(m[4]),
            log_a: a.ln(),
            log_b: b.ln(),
            in_bounds: m[4] >= a.ln() - 1e-6 && m[4] <= b.ln() + 1e-6,
            grid_t: Some(s.grid.t),
            projection_loss: Some(s.z.projection_loss.max(s.zt.projection_loss)),
            error: None,
        }
    }

    pub fn failed(a: f64, b: f64, err: &LocalizationError) -> Self {
        LocalRow {
            a,
            b,
            norm: None,
            h: None,
            c: None,
            d: None,
            t: None,
            log_a: a.ln(),
            log_b: b.ln(),
            in_bounds: false,
            grid_t: None,
            projection_loss: None,
            error: Some(err.to_string()),
        }
    }
}
