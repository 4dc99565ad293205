//! Acceptance run at desk scale. Prints one line per criterion and fails if
//! any criterion fails. Tolerances are pinned here rather than taken from
//! the shipped profiles.

use std::collections::BTreeMap;
use std::time::Instant;

use modloc::artifact::RepresentationArtifact;
use modloc::laguerre::BasisSpec;
use modloc::verification::{
    CheckReport, Status, SuiteConfig, SuiteRun, ToleranceProfile, bound_violations, chain_slack, run_suite,
};

const PINNED: &[(&str, f64)] = &[
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

fn pinned() -> ToleranceProfile {
    ToleranceProfile {
        name: "acceptance".into(),
        tolerances: PINNED.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

struct Verdict {
    criterion: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    secs: f64,
}

impl Verdict {
    fn line(&self) -> String {
        format!(
            "criterion {} {:<28} {}  ({:.1}s)  {}",
            self.criterion,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.secs,
            self.detail
        )
    }
}

fn run(cfg: &SuiteConfig, scope: &[&str], artifact: Option<&RepresentationArtifact>) -> (SuiteRun, f64) {
    let scope: Vec<String> = scope.iter().map(|s| s.to_string()).collect();
    let t = Instant::now();
    let r = run_suite(cfg, &pinned(), Some(&scope), artifact).expect("suite runs");
    (r, t.elapsed().as_secs_f64())
}

fn named<'a>(run: &'a SuiteRun, name: &str) -> Vec<&'a CheckReport> {
    run.reports.iter().filter(|r| r.name == name).collect()
}

fn param_is(r: &CheckReport, key: &str, value: serde_json::Value) -> bool {
    r.parameters.get(key) == Some(&value)
}

fn all_pass(reports: &[&CheckReport]) -> bool {
    !reports.is_empty() && reports.iter().all(|r| r.status == Status::Pass)
}

fn worst(reports: &[&CheckReport]) -> f64 {
    reports.iter().map(|r| r.residual).fold(0.0, f64::max)
}

fn failing(run: &SuiteRun) -> Vec<String> {
    run.reports
        .iter()
        .filter(|r| matches!(r.status, Status::Fail | Status::Error))
        .map(|r| format!("{}({:.2e}{})", r.name, r.residual, r.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()))
        .collect()
}

fn lowest_weights(cfg: &SuiteConfig) -> Verdict {
    let (run, secs) = run(cfg, &["lowest_weights"], None);
    let reps = named(&run, "lowest_weights");
    let ks: Vec<f64> = reps.iter().filter_map(|r| r.parameters["k"].as_f64()).collect();
    Verdict {
        criterion: 1,
        title: "lowest weights",
        passed: all_pass(&reps) && ks == [1.0, 1.5, 2.0] && secs < 30.0,
        detail: format!("k = {ks:?}, max |eig - weight| = {:.2e}", worst(&reps)),
        secs,
    }
}

fn commutators(cfg: &SuiteConfig) -> Verdict {
    let (run, secs) = run(cfg, &["commutators"], None);
    let reps = named(&run, "commutators");
    let by = |backend: &str| -> Vec<&CheckReport> { reps.iter().copied().filter(|r| r.backend == backend).collect() };
    let (s, g) = (by("spectral"), by("grid"));
    let triples = |v: &[&CheckReport]| {
        param_is(v[0], "variant", "plain".into()) && v.iter().any(|r| param_is(r, "variant", "tilde".into()))
    };
    Verdict {
        criterion: 2,
        title: "commutator residuals",
        passed: s.len() == 2 && g.len() == 2 && triples(&s) && triples(&g) && all_pass(&reps) && secs < 60.0,
        detail: format!("spectral {:.2e} (< 1e-6), grid {:.2e} (< 1e-3)", worst(&s), worst(&g)),
        secs,
    }
}

/// Runs the localization group once; criterion 8 reuses the swapped-bound
/// controls from it.
fn localization(cfg: &SuiteConfig) -> (Verdict, SuiteRun) {
    let (run, secs) = run(cfg, &["localization"], None);
    let mut ok = failing(&run).is_empty();
    let mut detail = Vec::new();
    for name in ["d_positive", "hc_chain", "tilde_chain", "t_bounds", "backend_agreement"] {
        let reps = named(&run, name);
        let states: f64 = reps.iter().map(|r| r.measured["states"]).sum();
        ok &= all_pass(&reps) && reps.len() == cfg.intervals.len();
        ok &= states == (cfg.bumps_per_interval * cfg.intervals.len()) as f64;
        detail.push(format!("{name} {:.1e}", worst(&reps)));
    }
    ok &= secs < 180.0;
    let fails = failing(&run);
    if !fails.is_empty() {
        detail.push(format!("failing: {}", fails.join(", ")));
    }
    let v = Verdict { criterion: 3, title: "localization chain", passed: ok, detail: detail.join(", "), secs };
    (v, run)
}

fn covariance(cfg: &SuiteConfig) -> Verdict {
    let (run, secs) = run(cfg, &["covariance"], None);
    let reps = named(&run, "covariance");
    let (lo, hi) = (4f64.ln() - 1e-3, 8f64.ln() + 1e-3);
    let in_range = reps.iter().all(|r| {
        ["min_t_spectral", "max_t_spectral", "min_t_grid", "max_t_grid"]
            .iter()
            .all(|k| r.measured.get(*k).is_some_and(|t| (lo..=hi).contains(t)))
    });
    let m = &reps.first().map(|r| r.measured.clone()).unwrap_or_default();
    Verdict {
        criterion: 4,
        title: "covariance transport",
        passed: all_pass(&reps) && in_range && secs < 30.0,
        detail: format!(
            "T in [{:.4}, {:.4}] vs [log 4, log 8] = [{:.4}, {:.4}]",
            m.get("min_t_spectral").copied().unwrap_or(f64::NAN),
            m.get("max_t_spectral").copied().unwrap_or(f64::NAN),
            4f64.ln(),
            8f64.ln()
        ),
        secs,
    }
}

fn weyl(cfg: &SuiteConfig) -> Verdict {
    let (run, secs) = run(cfg, &["weyl", "positive_inclusions", "j_relations"], None);
    let gated: Vec<&CheckReport> = named(&run, "weyl")
        .into_iter()
        .filter(|r| param_is(r, "operator", "th".into()) || param_is(r, "operator", "t".into()))
        .collect();
    let inc = named(&run, "positive_inclusions");
    let j = named(&run, "j_relations");
    Verdict {
        criterion: 5,
        title: "weyl and flow identities",
        passed: gated.len() == 2 && all_pass(&gated) && all_pass(&inc) && all_pass(&j) && failing(&run).is_empty() && secs < 60.0,
        detail: format!(
            "weyl (T_h, T) {:.2e}, conjugation {:.2e}, J {:.1e}",
            worst(&gated),
            worst(&inc),
            worst(&j)
        ),
        secs,
    }
}

fn f_alpha(cfg: &SuiteConfig) -> Verdict {
    let (run, secs) = run(cfg, &["f_alpha"], None);
    let reps = named(&run, "f_alpha");
    let f_minus = reps.iter().map(|r| r.measured["f_minus_one"]).fold(f64::NEG_INFINITY, f64::max);
    let convex = reps.iter().map(|r| r.measured["min_second_difference"]).fold(f64::INFINITY, f64::min);
    let curve = reps.first().map(|r| r.curve.clone()).unwrap_or_default();
    let f0 = curve.iter().find(|p| p.x == 0.0).map(|p| p.y);
    Verdict {
        criterion: 6,
        title: "F(alpha) profile",
        passed: reps.len() == 5
            && all_pass(&reps)
            && curve.len() == 21
            && f0 == Some(1.0)
            && f_minus <= 1.0
            && convex >= -1e-8
            && secs < 30.0,
        detail: format!("F(0) = {f0:?}, max F(-1) = {f_minus:.4}, min second difference = {convex:.2e}"),
        secs,
    }
}

fn convergence(cfg: &SuiteConfig) -> Verdict {
    let (run, secs) = run(cfg, &["s_invariance", "grid_convergence"], None);
    let s = named(&run, "s_invariance");
    let monotone = s.iter().all(|r| {
        let r_m: Vec<f64> = cfg.s_ladder.iter().map(|m| r.measured[&format!("m{m}")]).collect();
        r_m.windows(2).all(|w| w[1] <= w[0])
    });
    let g = named(&run, "grid_convergence");
    let order = g.first().map(|r| r.measured["order"]).unwrap_or(f64::NAN);
    let ladder: Vec<String> = s
        .first()
        .map(|r| cfg.s_ladder.iter().map(|m| format!("{:.1e}", r.measured[&format!("m{m}")])).collect())
        .unwrap_or_default();
    Verdict {
        criterion: 7,
        title: "convergence studies",
        passed: all_pass(&s) && monotone && (order - 2.0).abs() <= 0.2 && secs < 120.0,
        detail: format!("r(M) = [{}], grid order {order:.3}", ladder.join(", ")),
        secs,
    }
}

fn mutation(cfg: &SuiteConfig, clean_localization: &SuiteRun) -> Verdict {
    let t = Instant::now();
    let mut art = RepresentationArtifact::build(&BasisSpec::new(cfg.k, cfg.beta, cfg.m).unwrap(), Some(cfg.beta_tilde)).unwrap();
    let c = art.matrix_mut("C").unwrap();
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            c[(i, j)] *= 2.0;
        }
    }
    let art = RepresentationArtifact::read_from(&mut art.to_bytes().as_slice()).unwrap();
    let mut small = cfg.clone();
    small.intervals = vec![[1.0, 2.0]];
    let (tampered, _) = run(&small, &["lowest_weights", "localization"], Some(&art));
    let crit1 = named(&tampered, "lowest_weights").iter().any(|r| r.status != Status::Pass);
    let crit3 = ["d_positive", "hc_chain", "tilde_chain", "t_bounds"]
        .iter()
        .any(|n| named(&tampered, n).iter().any(|r| r.status != Status::Pass));

    // swapped bounds: rejected as configuration, and the measured states
    // violate them
    let mut swapped = cfg.clone();
    swapped.intervals = vec![[2.0, 1.0]];
    let rejected = swapped.validate().is_err();
    let controls = named(clean_localization, "bound_controls");
    let t_reps = named(clean_localization, "t_bounds");
    let direct = t_reps.iter().all(|r| {
        let (a, b) = (r.bounds["lower"], r.bounds["upper"]);
        let ts = [r.measured["min_t_spectral"], r.measured["max_t_spectral"]];
        bound_violations(&ts, b, a, 1e-6) == 2 && chain_slack(&ts, b, a) < 0.0
    });
    let secs = t.elapsed().as_secs_f64();
    Verdict {
        criterion: 8,
        title: "mutation sensitivity",
        passed: crit1 && crit3 && rejected && all_pass(&controls) && direct,
        detail: format!(
            "C x 2 fails 1: {crit1}, fails 3: {crit3}; swapped bounds rejected: {rejected}, detected: {}",
            all_pass(&controls) && direct
        ),
        secs,
    }
}

#[test]
fn acceptance_criteria() {
    let cfg = SuiteConfig { seed: 0, ..SuiteConfig::default() };
    assert_eq!((cfg.k, cfg.m, cfg.grid_n, cfg.bumps_per_interval), (1.0, 256, 4096, 20));

    let mut verdicts = vec![lowest_weights(&cfg), commutators(&cfg)];
    let (v3, loc) = localization(&cfg);
    verdicts.push(v3);
    verdicts.extend([covariance(&cfg), weyl(&cfg), f_alpha(&cfg), convergence(&cfg), mutation(&cfg, &loc)]);

    for v in &verdicts {
        println!("{}", v.line());
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.passed).map(|v| v.criterion).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

/// The checks outside the numbered criteria also pass at desk scale.
#[test]
fn remaining_default_checks_pass() {
    let cfg = SuiteConfig::default();
    let (run, _) = run(&cfg, &["rotation_swap", "translation", "inverse_sqrt_bound"], None);
    let by_name: BTreeMap<&str, Status> = run.reports.iter().map(|r| (r.name.as_str(), r.status)).collect();
    println!("{by_name:?}");
    assert!(failing(&run).is_empty(), "{:?}", failing(&run));
    assert!(run.aggregate.passed);
}
