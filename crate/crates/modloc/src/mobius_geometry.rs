//! PSL(2,ℝ) and the reflection acting on the compactified real line.
//!
//! Maps are stored as 2×2 real matrices normalized to `|det| = 1`. Matrices
//! differing by an overall sign are the same map. Orientation-reversing maps
//! (`det = −1`) are allowed so that reflections and their conjugates fit in
//! the same type.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("singular matrix (det = {0:e})")]
    Singular(f64),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("improper interval: endpoints coincide")]
    Improper,
    #[error("Iwasawa decomposition failed: |d| = {0:e} underflows")]
    DecompositionFailure(f64),
    #[error("map is orientation reversing; no Iwasawa factors")]
    OrientationReversing,
}

/// A point of ℝ ∪ {∞}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinity => None,
        }
    }

    /// Angle on the circle via `θ = 2·atan(x)`, with ∞ at `π`.
    pub fn angle(self) -> f64 {
        match self {
            ExtReal::Finite(x) => 2.0 * x.atan(),
            ExtReal::Infinity => std::f64::consts::PI,
        }
    }

    pub fn approx_eq(self, other: ExtReal, tol: f64) -> bool {
        match (self, other) {
            (ExtReal::Infinity, ExtReal::Infinity) => true,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
            _ => false,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        if x.is_infinite() {
            ExtReal::Infinity
        } else {
            ExtReal::Finite(x)
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinity => write!(f, "∞"),
        }
    }
}

/// `x ↦ (ax+b)/(cx+d)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MoebiusMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PartialEq for MoebiusMap {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, 0.0)
    }
}

impl MoebiusMap {
    /// Builds the map and rescales the matrix to `|det| = 1`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeometryError> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let det = a * d - b * c;
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
        if scale == 0.0 || det.abs() <= 1e-14 * scale * scale {
            return Err(GeometryError::Singular(det));
        }
        let s = det.abs().sqrt();
        Ok(MoebiusMap { a: a / s, b: b / s, c: c / s, d: d / s })
    }

    pub fn identity() -> Self {
        MoebiusMap { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// `T(t)`: `x ↦ x + t`.
    pub fn translation(t: f64) -> Self {
        MoebiusMap { a: 1.0, b: t, c: 0.0, d: 1.0 }
    }

    /// `Λ(y) = diag(y, 1/y)`: `x ↦ y²x`.
    pub fn dilation(y: f64) -> Result<Self, GeometryError> {
        MoebiusMap::new(y, 0.0, 0.0, 1.0 / y)
    }

    /// Dilation in the modular parametrization, `x ↦ e^{2πs}x`.
    ///
    /// With this parameter `Λ(s)T(t)Λ(−s) = T(e^{2πs}t)`.
    pub fn modular_dilation(s: f64) -> Self {
        let y = (std::f64::consts::PI * s).exp();
        MoebiusMap { a: y, b: 0.0, c: 0.0, d: 1.0 / y }
    }

    /// `P(z)`: lower-left entry `−z`, so `x ↦ x/(1 − zx)`.
    pub fn special_conformal(z: f64) -> Self {
        MoebiusMap { a: 1.0, b: 0.0, c: -z, d: 1.0 }
    }

    /// Rotation of the circle generated by `(h+c)/2`; `R(π)` is `x ↦ −1/x`.
    pub fn rotation(theta: f64) -> Self {
        let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
        let (s, c) = (0.5 * theta).sin_cos();
        let (s, c) = (snap(s), snap(c));
        MoebiusMap { a: c, b: s, c: -s, d: c }
    }

    /// The reflection `x ↦ −x`.
    pub fn reflection() -> Self {
        MoebiusMap { a: -1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_orientation_preserving(&self) -> bool {
        self.det() > 0.0
    }

    pub fn compose(&self, h: &MoebiusMap) -> MoebiusMap {
        MoebiusMap {
            a: self.a * h.a + self.b * h.c,
            b: self.a * h.b + self.b * h.d,
            c: self.c * h.a + self.d * h.c,
            d: self.c * h.b + self.d * h.d,
        }
    }

    pub fn inverse(&self) -> MoebiusMap {
        let det = self.det();
        MoebiusMap { a: self.d / det, b: -self.b / det, c: -self.c / det, d: self.a / det }
    }

    /// Projective comparison: equal up to an overall sign within `tol`.
    pub fn approx_eq(&self, o: &MoebiusMap, tol: f64) -> bool {
        self.distance(o) <= tol
    }

    /// Entrywise distance modulo the sign ambiguity.
    pub fn distance(&self, o: &MoebiusMap) -> f64 {
        let d = |s: f64| {
            (self.a - s * o.a)
                .abs()
                .max((self.b - s * o.b).abs())
                .max((self.c - s * o.c).abs())
                .max((self.d - s * o.d).abs())
        };
        d(1.0).min(d(-1.0))
    }

    /// `g s g⁻¹`.
    pub fn conjugate(&self, s: &MoebiusMap) -> MoebiusMap {
        self.compose(s).compose(&self.inverse())
    }

    pub fn act_point(&self, x: ExtReal) -> ExtReal {
        match x {
            ExtReal::Infinity => {
                if self.c == 0.0 {
                    ExtReal::Infinity
                } else {
                    ExtReal::Finite(self.a / self.c)
                }
            }
            ExtReal::Finite(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    ExtReal::Infinity
                } else {
                    ExtReal::Finite((self.a * x + self.b) / den)
                }
            }
        }
    }

    pub fn act(&self, x: f64) -> ExtReal {
        self.act_point(ExtReal::Finite(x))
    }

    /// Image of an oriented arc. Orientation-reversing maps swap the endpoints.
    pub fn act_interval(&self, i: &Interval) -> Interval {
        let lo = self.act_point(i.lo);
        let hi = self.act_point(i.hi);
        if self.is_orientation_preserving() {
            Interval { lo, hi }
        } else {
            Interval { lo: hi, hi: lo }
        }
    }

    /// Factors `g = T(x)Λ(y)P(z)` with `y > 0`.
    ///
    /// The sign of the representative is chosen so that `d > 0`.
    pub fn iwasawa(&self) -> Result<IwasawaFactors, GeometryError> {
        if !self.is_orientation_preserving() {
            return Err(GeometryError::OrientationReversing);
        }
        let scale = self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs());
        if self.d.abs() <= 1e-13 * scale {
            return Err(GeometryError::DecompositionFailure(self.d.abs()));
        }
        let g = if self.d < 0.0 {
            MoebiusMap { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
        } else {
            *self
        };
        Ok(IwasawaFactors { x: g.b / g.d, y: 1.0 / g.d, z: -g.c / g.d })
    }
}

/// Subgroups that can be conjugated by [`conjugate_subgroup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subgroup {
    Translation,
    Dilation,
    SpecialConformal,
    Reflection,
}

/// `g s(param) g⁻¹`. The dilation parameter is the printed `Λ(y) = diag(y, 1/y)`;
/// the reflection ignores `param`.
pub fn conjugate_subgroup(
    g: &MoebiusMap,
    which: Subgroup,
    param: f64,
) -> Result<MoebiusMap, GeometryError> {
    let s = match which {
        Subgroup::Translation => MoebiusMap::translation(param),
        Subgroup::Dilation => MoebiusMap::dilation(param)?,
        Subgroup::SpecialConformal => MoebiusMap::special_conformal(param),
        Subgroup::Reflection => MoebiusMap::reflection(),
    };
    Ok(g.conjugate(&s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwasawaFactors {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl IwasawaFactors {
    pub fn recompose(&self) -> MoebiusMap {
        let y = MoebiusMap { a: self.y, b: 0.0, c: 0.0, d: 1.0 / self.y };
        MoebiusMap::translation(self.x)
            .compose(&y)
            .compose(&MoebiusMap::special_conformal(self.z))
    }
}

/// An oriented arc of the circle from `lo` to `hi`, running in the direction
/// of increasing `x`. An arc with `lo > hi` passes through ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: ExtReal,
    pub hi: ExtReal,
}

impl Interval {
    pub fn new(lo: ExtReal, hi: ExtReal) -> Result<Self, GeometryError> {
        if lo.approx_eq(hi, 0.0) {
            return Err(GeometryError::Improper);
        }
        Ok(Interval { lo, hi })
    }

    pub fn finite(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Interval::new(ExtReal::Finite(lo), ExtReal::Finite(hi))
    }

    /// The half-line `[0, ∞]`.
    pub fn positive_half_line() -> Self {
        Interval { lo: ExtReal::Finite(0.0), hi: ExtReal::Infinity }
    }

    /// True if ∞ is an interior point of the arc.
    pub fn wraps(&self) -> bool {
        match (self.lo, self.hi) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a > b,
            _ => false,
        }
    }

    pub fn complement(&self) -> Interval {
        Interval { lo: self.hi, hi: self.lo }
    }

    /// Arc length in the angle coordinate, in `(0, 2π)`.
    pub fn angular_length(&self) -> f64 {
        (self.hi.angle() - self.lo.angle()).rem_euclid(std::f64::consts::TAU)
    }

    pub fn contains(&self, x: ExtReal) -> bool {
        let t = (x.angle() - self.lo.angle()).rem_euclid(std::f64::consts::TAU);
        t <= self.angular_length()
    }

    /// An orientation-preserving `g` with `g[0, ∞] = self`.
    pub fn standard_map(&self) -> MoebiusMap {
        let m = match (self.lo, self.hi) {
            (ExtReal::Finite(lo), ExtReal::Infinity) => MoebiusMap::new(1.0, lo, 0.0, 1.0),
            (ExtReal::Infinity, ExtReal::Finite(hi)) => MoebiusMap::new(hi, -1.0, 1.0, 0.0),
            (ExtReal::Finite(lo), ExtReal::Finite(hi)) if hi > lo => MoebiusMap::new(hi, lo, 1.0, 1.0),
            (ExtReal::Finite(lo), ExtReal::Finite(hi)) => MoebiusMap::new(-hi, lo, -1.0, 1.0),
            (ExtReal::Infinity, ExtReal::Infinity) => unreachable!("improper interval"),
        };
        m.expect("endpoints are distinct")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}
