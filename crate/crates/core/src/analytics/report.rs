//! Named reports and their CSV / JSON renderings.
//!
//! Statistics are rounded to six significant digits; counts are exact.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Value};

use super::agreement::{alpha_details, build_units, AlphaResult};
use super::chisq::{chi_square_test, ChiSquareResult, ContingencyTable};
use super::tables::{
    judgment_depth_table, subject_trigger_crosstab, subject_verdict_distribution,
    trigger_distribution, DepthRow, SubjectTriggerTable,
};
use crate::error::{Error, Result};
use crate::snapshot::CampaignSnapshot;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ReportName {
    JudgmentDepth,
    TriggerDistribution,
    SubjectTrigger,
    SubjectVerdict,
    Alpha,
    ChiSquare,
}

impl ReportName {
    pub const ALL: [ReportName; 6] = [
        ReportName::JudgmentDepth,
        ReportName::TriggerDistribution,
        ReportName::SubjectTrigger,
        ReportName::SubjectVerdict,
        ReportName::Alpha,
        ReportName::ChiSquare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportName::JudgmentDepth => "judgment-depth",
            ReportName::TriggerDistribution => "trigger-distribution",
            ReportName::SubjectTrigger => "subject-trigger",
            ReportName::SubjectVerdict => "subject-verdict",
            ReportName::Alpha => "alpha",
            ReportName::ChiSquare => "chi2",
        }
    }
}

impl FromStr for ReportName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReportName::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::UnknownReport(s.to_owned()))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Malformed(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReportOptions {
    pub exclude: Option<String>,
    pub no_sample: Option<BTreeSet<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Report {
    JudgmentDepth(Vec<DepthRow>),
    TriggerDistribution(Vec<(String, u64)>),
    SubjectTrigger(SubjectTriggerTable),
    SubjectVerdict(ContingencyTable),
    Alpha {
        result: AlphaResult,
        excluded: Option<String>,
    },
    ChiSquare {
        table: ContingencyTable,
        result: ChiSquareResult,
    },
}

pub fn run_report(
    snapshot: &CampaignSnapshot,
    name: ReportName,
    options: &ReportOptions,
) -> Result<Report> {
    let empty = BTreeSet::new();
    let sample = options.no_sample.as_ref().unwrap_or(&empty);
    Ok(match name {
        ReportName::JudgmentDepth => Report::JudgmentDepth(judgment_depth_table(snapshot)),
        ReportName::TriggerDistribution => {
            Report::TriggerDistribution(trigger_distribution(snapshot)?)
        }
        ReportName::SubjectTrigger => Report::SubjectTrigger(subject_trigger_crosstab(snapshot)?),
        ReportName::SubjectVerdict => {
            Report::SubjectVerdict(subject_verdict_distribution(snapshot, sample)?)
        }
        ReportName::Alpha => {
            let units = build_units(snapshot, options.exclude.as_deref())?;
            Report::Alpha {
                result: alpha_details(&units)?,
                excluded: options.exclude.clone(),
            }
        }
        ReportName::ChiSquare => {
            let table = subject_verdict_distribution(snapshot, sample)?;
            let result = chi_square_test(&table)?;
            Report::ChiSquare { table, result }
        }
    })
}

/// Rounds to six significant digits.
pub fn sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn fmt6(x: f64) -> String {
    let r = sig6(x);
    if r == 0.0 || (1e-4..1e6).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:.5e}")
    }
}

fn table_json(t: &ContingencyTable) -> Value {
    json!({
        "rows": t.row_labels,
        "columns": t.col_labels,
        "counts": t.counts,
        "total": t.total(),
    })
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report json");
                s.push('\n');
                s
            }
            Format::Csv => self.to_csv(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Report::JudgmentDepth(rows) => json!({
                "report": "judgment-depth",
                "rows": rows,
            }),
            Report::TriggerDistribution(counts) => json!({
                "report": "trigger-distribution",
                "counts": counts.iter().map(|(c, n)| json!({"category": c, "count": n})).collect::<Vec<_>>(),
                "total": counts.iter().map(|(_, n)| n).sum::<u64>(),
            }),
            Report::SubjectTrigger(t) => json!({
                "report": "subject-trigger",
                "table": table_json(&t.table),
                "excluded": t.excluded,
            }),
            Report::SubjectVerdict(t) => json!({
                "report": "subject-verdict",
                "table": table_json(t),
                "percentages": t.column_percentages().iter()
                    .map(|r| r.iter().map(|&p| sig6(p)).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            }),
            Report::Alpha { result, excluded } => json!({
                "report": "alpha",
                "alpha": sig6(result.alpha),
                "observed_disagreement": sig6(result.observed_disagreement),
                "expected_disagreement": sig6(result.expected_disagreement),
                "pairable_values": result.pairable_values,
                "pairable_units": result.pairable_units,
                "excluded_category": excluded,
            }),
            Report::ChiSquare { table, result } => json!({
                "report": "chi2",
                "statistic": sig6(result.statistic),
                "dof": result.dof,
                "p_value": sig6(result.p_value),
                "n": result.n,
                "table": table_json(table),
            }),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Report::JudgmentDepth(rows) => {
                out.push_str(
                    "min_judgments,images_with_comment,total_comments,images_without_comment\n",
                );
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        r.min_judgments,
                        r.images_with_comment,
                        r.total_comments,
                        r.images_without_comment
                    );
                }
            }
            Report::TriggerDistribution(counts) => {
                out.push_str("category,count\n");
                for (c, n) in counts {
                    let _ = writeln!(out, "{},{n}", csv_field(c));
                }
            }
            Report::SubjectTrigger(t) => {
                write_table(&mut out, "trigger", &t.table, None);
            }
            Report::SubjectVerdict(t) => {
                write_table(&mut out, "subject", t, Some(&t.column_percentages()));
            }
            Report::Alpha { result, excluded } => {
                out.push_str("alpha,observed_disagreement,expected_disagreement,pairable_values,pairable_units,excluded_category\n");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt6(result.alpha),
                    fmt6(result.observed_disagreement),
                    fmt6(result.expected_disagreement),
                    result.pairable_values,
                    result.pairable_units,
                    excluded.as_deref().map(csv_field).unwrap_or_default()
                );
            }
            Report::ChiSquare { result, .. } => {
                out.push_str("statistic,dof,p_value,n\n");
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt6(result.statistic),
                    result.dof,
                    fmt6(result.p_value),
                    result.n
                );
            }
        }
        out
    }
}

fn write_table(out: &mut String, corner: &str, t: &ContingencyTable, pct: Option<&Vec<Vec<f64>>>) {
    out.push_str(corner);
    for c in &t.col_labels {
        let _ = write!(out, ",{}", csv_field(c));
    }
    if pct.is_some() {
        for c in &t.col_labels {
            let _ = write!(out, ",{}_pct", csv_field(c));
        }
    }
    out.push('\n');
    for (i, row) in t.counts.iter().enumerate() {
        out.push_str(&csv_field(&t.row_labels[i]));
        for v in row {
            let _ = write!(out, ",{v}");
        }
        if let Some(p) = pct {
            for v in &p[i] {
                let _ = write!(out, ",{}", fmt6(*v));
            }
        }
        out.push('\n');
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
