//! Named, parameterized checks producing [`CheckReport`]s.
//!
//! Checks are organized in groups; a scope selects groups or individual
//! check names. A failing computation becomes a report with
//! [`Status::Error`] and never stops the suite.

mod checks;
pub mod local;

use std::collections::BTreeMap;
use std::panic::{AssertUnwindSafe, catch_unwind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{ArtifactError, RepresentationArtifact};
use crate::grid_oracle::GridError;
use crate::localization::{BumpFamily, LocalizationError};
use crate::spectral_rep::SpectralError;

pub use checks::{bound_violations, chain_slack, f_alpha_curve, weyl_probe_residual, windowed_s_residual};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Laguerre(#[from] crate::laguerre::LaguerreError),
    #[error("unknown scope {0:?}")]
    UnknownScope(String),
    #[error("unknown tolerance profile {0:?}")]
    UnknownProfile(String),
    #[error("intermediate norm {0:e} exceeded the overflow guard")]
    OverflowAbort(f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// A convergence study whose outcome cannot be decided at finite size.
    Inconclusive,
    Error,
}

/// Non-finite floats are written as strings so reports stay valid JSON.
mod lenient {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(x: f64) -> Repr {
        if x.is_finite() { Repr::Num(x) } else { Repr::Text(x.to_string()) }
    }

    fn from_repr(r: Repr) -> f64 {
        match r {
            Repr::Num(x) => x,
            Repr::Text(s) => s.parse().unwrap_or(f64::NAN),
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(from_repr(Repr::deserialize(d)?))
    }

    pub mod map {
        use std::collections::BTreeMap;

        use super::*;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            m.iter().map(|(k, v)| (k.clone(), to_repr(*v))).collect::<BTreeMap<_, _>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            let m = BTreeMap::<String, Repr>::deserialize(d)?;
            Ok(m.into_iter().map(|(k, v)| (k, from_repr(v))).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(with = "lenient")]
    pub x: f64,
    #[serde(with = "lenient")]
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub group: String,
    pub backend: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    #[serde(with = "lenient::map")]
    pub measured: BTreeMap<String, f64>,
    #[serde(with = "lenient::map")]
    pub bounds: BTreeMap<String, f64>,
    #[serde(with = "lenient")]
    pub residual: f64,
    pub tolerance: f64,
    pub status: Status,
    pub passed: bool,
    pub message: Option<String>,
    pub seed: u64,
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<CurvePoint>,
}

impl CheckReport {
    pub fn new(name: &str, group: &str, backend: &str, ctx: &Meta) -> Self {
        CheckReport {
            name: name.into(),
            group: group.into(),
            backend: backend.into(),
            parameters: BTreeMap::new(),
            measured: BTreeMap::new(),
            bounds: BTreeMap::new(),
            residual: f64::NAN,
            tolerance: 0.0,
            status: Status::Error,
            passed: false,
            message: None,
            seed: ctx.seed,
            timestamp: ctx.timestamp,
            curve: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, v: impl Serialize) -> Self {
        self.parameters.insert(key.into(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn measure(mut self, key: &str, v: f64) -> Self {
        self.measured.insert(key.into(), v);
        self
    }

    pub fn bound(mut self, key: &str, v: f64) -> Self {
        self.bounds.insert(key.into(), v);
        self
    }

    pub fn note(mut self, msg: impl Into<String>) -> Self {
        self.message = Some(msg.into());
        self
    }

    /// Pass iff `residual ≤ tolerance`; NaN fails.
    pub fn judge(mut self, residual: f64, tolerance: f64) -> Self {
        self.residual = residual;
        self.tolerance = tolerance;
        self.set_status(if residual <= tolerance { Status::Pass } else { Status::Fail })
    }

    /// Records the residual and sets the outcome explicitly.
    pub fn outcome(mut self, residual: f64, tolerance: f64, status: Status) -> Self {
        self.residual = residual;
        self.tolerance = tolerance;
        self.set_status(status)
    }

    fn set_status(mut self, s: Status) -> Self {
        self.status = s;
        self.passed = s == Status::Pass;
        self
    }

    pub fn error(name: &str, group: &str, ctx: &Meta, err: impl std::fmt::Display) -> Self {
        CheckReport::new(name, group, "none", ctx).note(err.to_string())
    }
}

/// Per-check tolerances. Keys are check names, optionally suffixed with
/// `.backend`; lookups try the suffixed key first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    pub name: String,
    pub tolerances: BTreeMap<String, f64>,
}

const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("lowest_weights", 1e-6),
    ("commutators.spectral", 1e-6),
    ("commutators.grid", 1e-3),
    ("d_positive", 1e-8),
    ("d_positive_control", 0.0),
    ("hc_chain", 0.0),
    ("tilde_chain", 0.0),
    ("t_bounds", 1e-6),
    ("backend_agreement", 1e-3),
    ("sigma_norm", 1e-6),
    ("small_energy_law", 1e-6),
    ("projection_convergence", 0.0),
    ("hc_trend", 0.0),
    ("bound_controls", 0.0),
    ("covariance", 1e-3),
    ("unitarity", 1e-4),
    ("weyl", 1e-3),
    ("positive_inclusions", 1e-3),
    ("j_relations", 1e-10),
    ("rotation_swap", 1e-4),
    ("translation", 1e-5),
    ("inverse_sqrt_bound", 1e-8),
    ("f_alpha", 1e-8),
    ("s_invariance", 1e-3),
    ("s_invariance_raw", 0.0),
    ("grid_convergence", 0.2),
    ("grid_dilation", 1e-3),
];

impl ToleranceProfile {
    pub const PRESETS: [&'static str; 3] = ["strict", "default", "coarse"];

    pub fn preset(name: &str) -> Result<Self, VerificationError> {
        let factor = match name {
            "strict" => 0.1,
            "default" => 1.0,
            "coarse" => 10.0,
            _ => return Err(VerificationError::UnknownProfile(name.into())),
        };
        Ok(ToleranceProfile {
            name: name.into(),
            tolerances: DEFAULT_TOLERANCES.iter().map(|(k, v)| (k.to_string(), v * factor)).collect(),
        })
    }

    pub fn get(&self, check: &str, backend: &str) -> f64 {
        self.tolerances
            .get(&format!("{check}.{backend}"))
            .or_else(|| self.tolerances.get(check))
            .copied()
            .unwrap_or(0.0)
    }

    /// Names of all checks with an entry.
    pub fn checks(&self) -> Vec<String> {
        let mut v: Vec<String> = self.tolerances.keys().map(|k| k.split('.').next().unwrap().to_string()).collect();
        v.dedup();
        v
    }
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile::preset("default").expect("default preset")
    }
}

/// Parameters of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub k: f64,
    pub beta: f64,
    pub m: usize,
    pub beta_tilde: f64,
    pub grid_n: usize,
    pub grid_emax: f64,
    /// Local-state grids span `[0, local_grid_scale/b]`.
    pub local_grid_scale: f64,
    pub intervals: Vec<[f64; 2]>,
    pub bumps_per_interval: usize,
    pub bump_family: BumpFamily,
    pub seed: u64,
    pub interior_fraction: f64,
    pub flow_interior_fraction: f64,
    pub lowest_weight_ks: Vec<f64>,
    pub weyl_m: usize,
    pub weyl_t: Vec<f64>,
    pub weyl_a: Vec<f64>,
    pub inclusion_t: f64,
    pub inclusion_a: f64,
    pub s_ladder: Vec<usize>,
    pub s_window: f64,
    pub f_alpha_fixtures: usize,
    pub f_alpha_points: usize,
    pub random_states: usize,
    pub convergence_k: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            k: 1.0,
            beta: 1.0,
            m: 256,
            beta_tilde: 0.005,
            grid_n: 4096,
            grid_emax: 40.0,
            local_grid_scale: 400.0,
            intervals: vec![[1.0, 2.0], [0.5, 1.0], [4.0, 8.0]],
            bumps_per_interval: 20,
            bump_family: BumpFamily::Mollifier,
            seed: 0,
            interior_fraction: 0.8,
            flow_interior_fraction: 0.5,
            lowest_weight_ks: vec![1.0, 1.5, 2.0],
            weyl_m: 512,
            weyl_t: vec![0.1, 0.3],
            weyl_a: vec![0.2, 0.5],
            inclusion_t: 0.05,
            inclusion_a: 0.3,
            s_ladder: vec![64, 128, 256, 512],
            s_window: 2.0,
            f_alpha_fixtures: 5,
            f_alpha_points: 21,
            random_states: 100,
            convergence_k: 2.0,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), VerificationError> {
        let bad = |m: String| Err(VerificationError::Invalid(m));
        if !(self.k >= 0.5) {
            return bad(format!("k = {} violates k >= 1/2", self.k));
        }
        if !(self.beta > 0.0 && self.beta_tilde > 0.0) {
            return bad("beta and beta_tilde must be positive".into());
        }
        if self.m < 8 || self.weyl_m < 8 {
            return bad("truncation sizes must be at least 8".into());
        }
        for iv in &self.intervals {
            if !(iv[0] > 0.0 && iv[1] > iv[0] && iv[1].is_finite()) {
                return bad(format!("interval [{}, {}] must satisfy 0 < a < b < inf", iv[0], iv[1]));
            }
        }
        if !(self.interior_fraction > 0.0 && self.interior_fraction <= 1.0) {
            return bad("interior_fraction must lie in (0, 1]".into());
        }
        if self.grid_n < 32 {
            return bad("grid_n must be at least 32".into());
        }
        Ok(())
    }
}

/// Fields stamped into every report.
#[derive(Debug, Clone, Copy)]
pub struct Meta {
    pub seed: u64,
    pub timestamp: u64,
}

/// `SOURCE_DATE_EPOCH` if set, else 0, so that runs are reproducible.
pub fn report_timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    pub error: usize,
    /// No failures and no errors.
    pub passed: bool,
}

impl Aggregate {
    pub fn of(reports: &[CheckReport]) -> Self {
        let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
        let (fail, error) = (count(Status::Fail), count(Status::Error));
        Aggregate {
            total: reports.len(),
            pass: count(Status::Pass),
            fail,
            inconclusive: count(Status::Inconclusive),
            error,
            passed: fail == 0 && error == 0,
        }
    }
}

/// Check groups in execution order, with the report names each may emit.
pub const GROUPS: &[(&str, &[&str])] = &[
    ("lowest_weights", &["lowest_weights"]),
    ("commutators", &["commutators"]),
    (
        "localization",
        &[
            "d_positive",
            "d_positive_control",
            "hc_chain",
            "tilde_chain",
            "t_bounds",
            "backend_agreement",
            "sigma_norm",
            "small_energy_law",
            "projection_convergence",
            "hc_trend",
            "bound_controls",
        ],
    ),
    ("covariance", &["covariance"]),
    ("weyl", &["weyl"]),
    ("positive_inclusions", &["positive_inclusions"]),
    ("j_relations", &["j_relations"]),
    ("rotation_swap", &["rotation_swap"]),
    ("translation", &["translation"]),
    ("inverse_sqrt_bound", &["inverse_sqrt_bound"]),
    ("f_alpha", &["f_alpha"]),
    ("s_invariance", &["s_invariance", "s_invariance_raw"]),
    ("grid_convergence", &["grid_convergence", "grid_dilation"]),
];

/// Resolves a scope to the groups to run and the report names to keep.
/// `None` selects everything; an empty list selects nothing.
pub fn resolve_scope(scope: Option<&[String]>) -> Result<Vec<(&'static str, Vec<&'static str>)>, VerificationError> {
    let Some(scope) = scope else {
        return Ok(GROUPS.iter().map(|(g, names)| (*g, names.to_vec())).collect());
    };
    for s in scope {
        let known = GROUPS.iter().any(|(g, names)| g == s || names.contains(&s.as_str()));
        if !known {
            return Err(VerificationError::UnknownScope(s.clone()));
        }
    }
    let mut out = Vec::new();
    for (g, names) in GROUPS {
        let keep: Vec<&str> = if scope.iter().any(|s| s == g) {
            names.to_vec()
        } else {
            names.iter().copied().filter(|n| scope.iter().any(|s| s == n)).collect()
        };
        if !keep.is_empty() {
            out.push((*g, keep));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub reports: Vec<CheckReport>,
    pub aggregate: Aggregate,
}

/// Runs the selected checks. A supplied artifact replaces the built triples
/// wherever its parameters match.
pub fn run_suite(
    config: &SuiteConfig,
    profile: &ToleranceProfile,
    scope: Option<&[String]>,
    artifact: Option<&RepresentationArtifact>,
) -> Result<SuiteRun, VerificationError> {
    config.validate()?;
    let plan = resolve_scope(scope)?;
    let meta = Meta { seed: config.seed, timestamp: report_timestamp() };
    let mut ctx = checks::Ctx::new(config, profile, artifact, meta);
    let mut reports = Vec::new();
    for (group, keep) in plan {
        let out = catch_unwind(AssertUnwindSafe(|| checks::run_group(&mut ctx, group)));
        let batch = match out {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => vec![CheckReport::error(group, group, &meta, e)],
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                vec![CheckReport::error(group, group, &meta, format!("panicked: {msg}"))]
            }
        };
        reports.extend(batch.into_iter().filter(|r| r.status == Status::Error && r.name == group || keep.contains(&r.name.as_str())));
    }
    let aggregate = Aggregate::of(&reports);
    Ok(SuiteRun { reports, aggregate })
}
