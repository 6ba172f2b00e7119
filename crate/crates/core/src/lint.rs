//! Datasheet lint: checks a dataset's metadata and attached analyses against
//! the dataset publication checklist.

use std::fmt;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::coverage::CoverageReport;
use crate::model::TrajectoryDataset;
use crate::stats::{DensityCurve, EpisodeReturnSummary, Histogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub rule_id: String,
    pub severity: Severity,
    pub message: String,
    pub guideline_ref: String,
}

/// Analyses published alongside a dataset.
#[derive(Debug, Clone, Default)]
pub struct Attachments<'a> {
    pub summary: Option<&'a EpisodeReturnSummary>,
    pub histogram: Option<&'a Histogram>,
    pub density: Option<&'a DensityCurve>,
    pub coverage: Option<&'a CoverageReport>,
}

pub const NECESSITY_REF: &str = "Is a new dataset really necessary?";
pub const PROVENANCE_REF: &str =
    "Document the environment, scenario, data source and how the data was generated.";
pub const SUMMARY_REF: &str =
    "Report episode returns min, mean, max and std, with transition and trajectory counts.";
pub const DISTRIBUTION_REF: &str = "Provide plots of the episode return distribution.";
pub const COVERAGE_REF: &str = "Report a measure of action-space coverage.";
pub const LICENCE_REF: &str = "Include a dataset licence.";
pub const DOWNLOAD_REF: &str = "Make the download link easily accessible.";

fn finding(rule: &str, severity: Severity, message: String, guideline: &str) -> LintFinding {
    LintFinding {
        rule_id: rule.into(),
        severity,
        message,
        guideline_ref: guideline.into(),
    }
}

fn summary_complete(s: &EpisodeReturnSummary) -> bool {
    s.is_populated()
        && s.n_transitions > 0
        && [s.mean, s.std, s.min, s.max].iter().all(|x| x.is_finite())
}

/// Checks the datasheet of `dataset`. Returns one finding per violated rule,
/// ordered by rule id. Never modifies its inputs.
pub fn lint_vault(dataset: &TrajectoryDataset, attached: &Attachments<'_>) -> Vec<LintFinding> {
    let meta = &dataset.meta;
    let mut out = Vec::new();

    if meta.source.trim().is_empty() {
        out.push(finding(
            "R0",
            Severity::Info,
            "no source recorded; consider whether an existing dataset would serve".into(),
            NECESSITY_REF,
        ));
    }

    let missing: Vec<&str> = [
        ("environment", &meta.environment),
        ("scenario", &meta.scenario),
        ("source", &meta.source),
        ("generation_method", &meta.generation_method),
    ]
    .into_iter()
    .filter(|(_, v)| v.trim().is_empty())
    .map(|(k, _)| k)
    .collect();
    if !missing.is_empty() {
        out.push(finding(
            "R1",
            Severity::Error,
            format!("missing provenance fields: {}", missing.join(", ")),
            PROVENANCE_REF,
        ));
    }

    if !attached.summary.is_some_and(summary_complete) {
        out.push(finding(
            "R2",
            Severity::Warning,
            "no complete episode return summary attached".into(),
            SUMMARY_REF,
        ));
    }

    let has_hist = attached.histogram.is_some_and(|h| h.total() > 0);
    let has_density = attached.density.is_some_and(|d| !d.xs.is_empty());
    if !has_hist && !has_density {
        out.push(finding(
            "R3",
            Severity::Warning,
            "no episode return histogram or density attached".into(),
            DISTRIBUTION_REF,
        ));
    }

    if attached.coverage.is_none() {
        out.push(finding(
            "R4",
            Severity::Warning,
            "no coverage report attached".into(),
            COVERAGE_REF,
        ));
    }

    if meta.licence.as_deref().is_none_or(|l| l.trim().is_empty()) {
        out.push(finding(
            "R5",
            Severity::Warning,
            "no licence recorded".into(),
            LICENCE_REF,
        ));
    }

    match meta.download_url.as_deref().map(str::trim) {
        None | Some("") => out.push(finding(
            "R6",
            Severity::Warning,
            "no download URL recorded".into(),
            DOWNLOAD_REF,
        )),
        Some(u) => {
            let ok = Url::parse(u)
                .map(|p| {
                    matches!(p.scheme(), "http" | "https" | "file")
                        && (p.has_host() || p.scheme() == "file")
                })
                .unwrap_or(false);
            if !ok {
                out.push(finding(
                    "R6",
                    Severity::Warning,
                    format!("download URL '{u}' is not a well-formed http(s) or file URL"),
                    DOWNLOAD_REF,
                ));
            }
        }
    }

    out.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
    out
}

/// One line per finding: `R5 warning: no licence recorded ("Include ...")`.
pub fn render_text(findings: &[LintFinding]) -> String {
    if findings.is_empty() {
        return "no findings\n".into();
    }
    findings
        .iter()
        .map(|f| {
            format!(
                "{} {}: {} (\"{}\")\n",
                f.rule_id, f.severity, f.message, f.guideline_ref
            )
        })
        .collect()
}
