use std::path::{Path, PathBuf};

use modloc::artifact::RepresentationArtifact;
use modloc::laguerre::BasisSpec;
use modloc::localization::{BumpSpec, LocalizationError, STATE_FORMAT_VERSION, StateVector, fixture_bumps};
use modloc::spectral_rep::{GeneratorSet, build_generators, build_native_tilde};
use modloc::verification::local::{LocalRow, SpectralBackend, localize_bump};
use modloc::verification::run_suite;
use serde::{Deserialize, Serialize};

use crate::config::{Format, Overrides, RunConfig};
use crate::output::{ReportDocument, comment_header, finish_csv};
use crate::{CliError, Cmd};

pub fn dispatch(cmd: Cmd) -> Result<i32, CliError> {
    match cmd {
        Cmd::Build { o } => with_config(&o, build),
        Cmd::Localize { o, artifact } => with_config(&o, |mut c| {
            if artifact.is_some() {
                c.output.artifact = artifact;
            }
            localize(c)
        }),
        Cmd::Verify { o, artifact } => with_config(&o, |mut c| {
            if artifact.is_some() {
                c.output.artifact = artifact;
            }
            verify(c)
        }),
        Cmd::Report { input, o, curves } => report(&input, &o, curves),
    }
}

fn with_config(o: &Overrides, f: impl FnOnce(RunConfig) -> Result<i32, CliError>) -> Result<i32, CliError> {
    let c = o.resolve()?;
    if o.print_config {
        print!("{}", c.to_toml());
        return Ok(0);
    }
    f(c)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn provenance(c: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "tool": "modloc",
        "version": env!("CARGO_PKG_VERSION"),
        "config": c,
    })
}

fn build(c: RunConfig) -> Result<i32, CliError> {
    let s = &c.suite;
    if !(s.k >= 0.5) {
        return Err(CliError::Config(format!("k = {} violates k >= 1/2", s.k)));
    }
    let spec = BasisSpec::new(s.k, s.beta, s.m)?;
    let beta_tilde = (s.k > 0.5).then_some(s.beta_tilde);
    let mut art = RepresentationArtifact::build(&spec, beta_tilde)?;
    art.header.provenance = provenance(&c);
    let path = c.output.out.clone().unwrap_or_else(|| PathBuf::from("modloc.artifact"));
    art.save(&path)?;
    let h = &art.header;
    println!("wrote {}", path.display());
    println!("k = {}  beta = {}  M = {}", h.k, h.beta, h.m);
    println!("plain: quadrature order {}, asymmetry {:.3e}", h.quadrature_order, h.build_asymmetry);
    match (h.beta_tilde, h.tilde_quadrature_order, h.tilde_asymmetry) {
        (Some(b), Some(q), Some(a)) => println!("tilde: beta_tilde {b}, quadrature order {q}, asymmetry {a:.3e}"),
        _ => println!("tilde: not built (needs k > 1/2)"),
    }
    Ok(0)
}

/// Loads the configured artifact, if any, and adopts its parameters into
/// the config.
fn load_artifact(c: &mut RunConfig) -> Result<Option<RepresentationArtifact>, CliError> {
    let Some(p) = &c.output.artifact else { return Ok(None) };
    let art = RepresentationArtifact::load(p)?;
    let h = &art.header;
    c.suite.k = h.k;
    c.suite.beta = h.beta;
    c.suite.m = h.m;
    if let Some(bt) = h.beta_tilde {
        c.suite.beta_tilde = bt;
    }
    Ok(Some(art))
}

/// Plain and tilde triples, from the configured artifact if any.
fn load_sets(c: &mut RunConfig) -> Result<(GeneratorSet, GeneratorSet), CliError> {
    if let Some(art) = load_artifact(c)? {
        let plain = art.plain()?;
        let tilde = match art.tilde()? {
            Some(t) => t,
            None => build_native_tilde(c.suite.k, c.suite.beta_tilde, c.suite.m)?,
        };
        return Ok((plain, tilde));
    }
    let s = &c.suite;
    let plain = build_generators(&BasisSpec::new(s.k, s.beta, s.m)?)?;
    let tilde = build_native_tilde(s.k, s.beta_tilde, s.m)?;
    Ok((plain, tilde))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizeDocument {
    pub format_version: u32,
    pub config: RunConfig,
    pub rows: Vec<LocalRow>,
}

impl LocalizeDocument {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
                for r in &self.rows {
                    w.serialize(r)?;
                }
                Ok(comment_header(self.format_version, &self.config)? + &finish_csv(w)?)
            }
            Format::Md => {
                let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
                let mut s = String::from(
                    "| a | b | norm | H | C | D | T | log a | log b | in bounds | error |\n|---|---|---|---|---|---|---|---|---|---|---|\n",
                );
                for r in &self.rows {
                    s += &format!(
                        "| {} | {} | {} | {} | {} | {} | {} | {:.4} | {:.4} | {} | {} |\n",
                        r.a,
                        r.b,
                        f(r.norm),
                        f(r.h),
                        f(r.c),
                        f(r.d),
                        f(r.t),
                        r.log_a,
                        r.log_b,
                        r.in_bounds,
                        r.error.as_deref().unwrap_or("")
                    );
                }
                Ok(format!("format version {}\n\n{s}\n```toml\n{}```\n", self.format_version, self.config.to_toml()))
            }
        }
    }
}

fn bumps_for(c: &RunConfig, idx: usize, a: f64, b: f64) -> Result<Vec<BumpSpec>, LocalizationError> {
    let l = &c.localize;
    let mut first = BumpSpec::new(a, b, c.suite.bump_family)?;
    first.moment_free = l.moment_free;
    first.samples = l.samples;
    first.validate()?;
    let mut out = vec![first];
    let mut rest = fixture_bumps(a, b, l.bumps - 1, c.suite.seed + idx as u64, l.moment_free)?;
    for s in &mut rest {
        s.family = c.suite.bump_family;
        s.samples = l.samples;
        s.validate()?;
    }
    out.extend(rest);
    Ok(out)
}

fn write_state(dir: &Path, stem: &str, state: &StateVector, e_max: f64, n: usize, c: &RunConfig) -> Result<(), CliError> {
    std::fs::write(dir.join(format!("{stem}.json")), state.to_json()?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["E", "re", "im"])?;
    for (e, z) in state.export_points(e_max, n) {
        w.write_record([e.to_string(), z.re.to_string(), z.im.to_string()])?;
    }
    std::fs::write(dir.join(format!("{stem}.csv")), comment_header(STATE_FORMAT_VERSION, c)? + &finish_csv(w)?)?;
    Ok(())
}

fn localize(mut c: RunConfig) -> Result<i32, CliError> {
    c.validate()?;
    if c.suite.k != 1.0 && c.output.artifact.is_none() {
        return Err(CliError::Config(LocalizationError::UnsupportedWeight(c.suite.k).to_string()));
    }
    let (plain, tilde) = load_sets(&mut c)?;
    let backend = SpectralBackend::new(plain, tilde)?;
    let dir = c.output.out.clone().unwrap_or_else(|| PathBuf::from("modloc-localize"));
    std::fs::create_dir_all(&dir)?;
    let mut rows = Vec::new();
    for (idx, iv) in c.suite.intervals.iter().enumerate() {
        let [a, b] = *iv;
        let scaled = backend.at_scale(b)?;
        let bumps = match bumps_for(&c, idx, a, b) {
            Ok(v) => v,
            Err(e) => {
                rows.push(LocalRow::failed(a, b, &e));
                continue;
            }
        };
        for (j, bump) in bumps.iter().enumerate() {
            match localize_bump(bump, &scaled, c.suite.grid_n, c.suite.local_grid_scale) {
                Ok(s) => {
                    // ψ̃₊ has decayed by E ~ 40/(b−a) for the shipped bumps
                    let e_max = 40.0 / (b - a);
                    write_state(&dir, &format!("state_{idx}_{j}_z"), &s.z, e_max, c.localize.export_points, &c)?;
                    write_state(&dir, &format!("state_{idx}_{j}_zt"), &s.zt, e_max, c.localize.export_points, &c)?;
                    rows.push(LocalRow::from_state(&s));
                }
                Err(e) => rows.push(LocalRow::failed(a, b, &e)),
            }
        }
    }
    let doc = LocalizeDocument { format_version: STATE_FORMAT_VERSION, config: c.clone(), rows };
    let ext = match c.output.format {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Md => "md",
    };
    std::fs::write(dir.join(format!("summary.{ext}")), doc.render(c.output.format)?)?;
    print!("{}", doc.render(Format::Md)?.split("\n```toml").next().unwrap_or(""));
    println!("\nwrote {}", dir.display());
    let ok = doc.rows.iter().all(|r| r.error.is_none() && r.in_bounds);
    Ok(if ok { 0 } else { 1 })
}

fn verify(mut c: RunConfig) -> Result<i32, CliError> {
    let art = load_artifact(&mut c)?;
    c.validate()?;
    let profile = c.profile()?;
    let run = run_suite(&c.suite, &profile, c.scope.as_deref(), art.as_ref())?;
    let passed = run.aggregate.passed;
    let doc = ReportDocument::new(c.clone(), run.reports, run.aggregate);
    let text = doc.render(c.output.format)?;
    write_or_print(c.output.out.as_deref(), &text)?;
    if let Some(p) = &c.output.out {
        if c.output.format == Format::Json {
            std::fs::write(p.with_extension("csv"), doc.to_csv()?)?;
        }
        std::fs::write(p.with_extension("curves.csv"), doc.curves_csv()?)?;
        let a = &doc.aggregate;
        eprintln!(
            "{}: {} checks, {} fail, {} error, {} inconclusive",
            if passed { "PASS" } else { "FAIL" },
            a.total,
            a.fail,
            a.error,
            a.inconclusive
        );
    }
    Ok(if passed { 0 } else { 1 })
}

fn report(input: &Path, o: &Overrides, curves: bool) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(input)?;
    let doc: ReportDocument = serde_json::from_str(&text)?;
    let out = if curves { doc.curves_csv()? } else { doc.render(o.format.unwrap_or(Format::Md))? };
    write_or_print(o.out.as_deref(), &out)?;
    Ok(if doc.aggregate.passed { 0 } else { 1 })
}
