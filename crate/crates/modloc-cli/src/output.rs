//! Report documents and their JSON, CSV and Markdown renderings.

use modloc::verification::{Aggregate, CheckReport, REPORT_FORMAT_VERSION, Status};
use serde::{Deserialize, Serialize};

use crate::CliError;
use crate::config::{Format, RunConfig};

/// The document written by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format_version: u32,
    pub config: RunConfig,
    pub reports: Vec<CheckReport>,
    pub aggregate: Aggregate,
}

impl ReportDocument {
    pub fn new(config: RunConfig, reports: Vec<CheckReport>, aggregate: Aggregate) -> Self {
        ReportDocument { format_version: REPORT_FORMAT_VERSION, config, reports, aggregate }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => self.to_csv(),
            Format::Md => Ok(self.to_markdown()),
        }
    }

    /// One row per report. The producing config rides along in `#` lines.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "name", "group", "backend", "status", "passed", "residual", "tolerance", "seed", "timestamp", "parameters",
            "measured", "bounds", "message",
        ])?;
        for r in &self.reports {
            w.write_record([
                r.name.clone(),
                r.group.clone(),
                r.backend.clone(),
                status_name(r.status).into(),
                r.passed.to_string(),
                r.residual.to_string(),
                r.tolerance.to_string(),
                r.seed.to_string(),
                r.timestamp.to_string(),
                serde_json::to_string(&r.parameters)?,
                serde_json::to_string(&r.measured_json())?,
                serde_json::to_string(&r.bounds)?,
                r.message.clone().unwrap_or_default(),
            ])?;
        }
        Ok(comment_header(self.format_version, &self.config)? + &finish_csv(w)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("# modloc report\n\nformat version {}\n\n", self.format_version);
        let a = &self.aggregate;
        s += &format!(
            "**{}**: {} checks, {} pass, {} fail, {} inconclusive, {} error\n\n",
            if a.passed { "PASS" } else { "FAIL" },
            a.total,
            a.pass,
            a.fail,
            a.inconclusive,
            a.error
        );
        s += "| check | backend | status | residual | tolerance | note |\n|---|---|---|---|---|---|\n";
        for r in &self.reports {
            s += &format!(
                "| {} | {} | {} | {:.3e} | {:.1e} | {} |\n",
                label(r),
                r.backend,
                status_name(r.status),
                r.residual,
                r.tolerance,
                r.message.as_deref().unwrap_or("").replace('|', "/")
            );
        }
        s += &format!("\n## config\n\n```toml\n{}```\n", self.config.to_toml());
        s
    }

    /// `(check, backend, x, y)` rows of every curve in the reports.
    pub fn curves_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "label", "x", "y"])?;
        for r in &self.reports {
            for p in &r.curve {
                w.write_record([r.name.clone(), label(r), p.x.to_string(), p.y.to_string()])?;
            }
        }
        Ok(comment_header(self.format_version, &self.config)? + &finish_csv(w)?)
    }
}

trait MeasuredJson {
    fn measured_json(&self) -> serde_json::Value;
}

impl MeasuredJson for CheckReport {
    fn measured_json(&self) -> serde_json::Value {
        // reuse the lenient encoding of the report itself
        serde_json::to_value(self).map(|v| v["measured"].clone()).unwrap_or_default()
    }
}

/// `name[key=value,…]` using the distinguishing string parameters.
fn label(r: &CheckReport) -> String {
    let tags: Vec<String> = ["variant", "operator", "interval", "k", "moment_free", "fixture"]
        .iter()
        .filter_map(|k| r.parameters.get(*k).map(|v| format!("{k}={v}")))
        .collect();
    if tags.is_empty() { r.name.clone() } else { format!("{}[{}]", r.name, tags.join(",")) }
}

pub fn status_name(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Inconclusive => "inconclusive",
        Status::Error => "error",
    }
}

pub fn comment_header(version: u32, config: &RunConfig) -> Result<String, CliError> {
    Ok(format!("# format_version={version}\n# config={}\n", serde_json::to_string(config)?))
}

pub fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Reads a CSV written by this module, skipping the `#` header.
pub fn read_csv_records(text: &str) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(r.records().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use modloc::verification::{Meta, ToleranceProfile, run_suite};

    fn doc() -> ReportDocument {
        let cfg = RunConfig { scope: Some(vec!["j_relations".into()]), ..Default::default() };
        let mut cfg2 = cfg.clone();
        cfg2.suite.m = 32;
        let run = run_suite(&cfg2.suite, &ToleranceProfile::default(), cfg2.scope.as_deref(), None).unwrap();
        let mut reports = run.reports;
        let meta = Meta { seed: 0, timestamp: 0 };
        reports.push(CheckReport::new("x", "g", "grid", &meta).note("a | b, \"c\"").judge(f64::INFINITY, 1.0));
        let agg = modloc::verification::Aggregate::of(&reports);
        ReportDocument::new(cfg2, reports, agg)
    }

    #[test]
    fn json_round_trip() {
        let d = doc();
        let back: ReportDocument = serde_json::from_str(&d.render(Format::Json).unwrap()).unwrap();
        assert_eq!(back.config, d.config);
        assert_eq!(back.aggregate, d.aggregate);
        assert_eq!(back.reports.len(), d.reports.len());
        assert_eq!(back.reports[0], d.reports[0]);
    }

    #[test]
    fn csv_flattening_has_one_row_per_report() {
        let d = doc();
        let text = d.to_csv().unwrap();
        assert!(text.starts_with("# format_version=1\n# config="));
        let rows = read_csv_records(&text).unwrap();
        assert_eq!(rows.len(), d.reports.len());
        assert_eq!(&rows[2][0], "x");
        assert_eq!(&rows[2][3], "fail");
        assert_eq!(&rows[2][12], "a | b, \"c\"");
    }

    #[test]
    fn markdown_embeds_config() {
        let md = doc().to_markdown();
        assert!(md.contains("**FAIL**"));
        assert!(md.contains("```toml\nformat_version = 1"));
    }
}
