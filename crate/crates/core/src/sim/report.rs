//! Aggregation of episode records and the columnar text tables written for
//! them.
//!
//! Three tables are produced, each a comma-separated file with a fixed
//! header line, optionally preceded by `# key=value` comment lines:
//!
//! * summary: `policy,skill_count,n_learners,mean_actions,std_actions,success_rate_pct`
//! * raw: `policy,skill_count,learner_id,actions_used,success`
//! * significance: `skill_count,comparison,t,df,p,cohens_d`

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::stats::{cohens_d, mean, sample_variance, welch_t};
use crate::curriculum::PolicyKind;
use crate::error::{Error, Result};

pub const RAW_HEADER: &str = "policy,skill_count,learner_id,actions_used,success";
pub const SUMMARY_HEADER: &str = "policy,skill_count,n_learners,mean_actions,std_actions,success_rate_pct";
pub const SIGNIFICANCE_HEADER: &str = "skill_count,comparison,t,df,p,cohens_d";
const MISSING: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpisodeRecord {
    pub policy: PolicyKind,
    pub skill_count: usize,
    pub learner_id: usize,
    pub actions_used: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub policy: PolicyKind,
    pub skill_count: usize,
    pub n_learners: usize,
    pub mean_actions: f64,
    /// Sample standard deviation; `None` with a single learner.
    pub std_actions: Option<f64>,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub skill_count: usize,
    /// Always adaptive against a baseline.
    pub baseline: PolicyKind,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
    pub cohens_d: Option<f64>,
}

impl SignificanceRow {
    pub fn comparison(&self) -> String {
        format!("adaptive_vs_{}", self.baseline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub summary: Vec<SummaryRow>,
    pub significance: Vec<SignificanceRow>,
    pub records: Vec<EpisodeRecord>,
}

/// Groups in order of first appearance.
fn groups(records: &[EpisodeRecord]) -> Vec<((usize, PolicyKind), Vec<&EpisodeRecord>)> {
    let mut out: Vec<((usize, PolicyKind), Vec<&EpisodeRecord>)> = Vec::new();
    for r in records {
        let key = (r.skill_count, r.policy);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => out.push((key, vec![r])),
        }
    }
    out
}

impl ExperimentReport {
    pub fn from_records(records: Vec<EpisodeRecord>) -> Self {
        let grouped = groups(&records);
        let summary = grouped
            .iter()
            .map(|((skill_count, policy), rs)| {
                let actions: Vec<f64> = rs.iter().map(|r| r.actions_used as f64).collect();
                let successes = rs.iter().filter(|r| r.success).count();
                SummaryRow {
                    policy: *policy,
                    skill_count: *skill_count,
                    n_learners: rs.len(),
                    mean_actions: mean(&actions),
                    std_actions: sample_variance(&actions).map(f64::sqrt),
                    success_rate: successes as f64 / rs.len() as f64,
                }
            })
            .collect();

        let mut skill_counts: Vec<usize> = Vec::new();
        for ((n, _), _) in &grouped {
            if !skill_counts.contains(n) {
                skill_counts.push(*n);
            }
        }
        let actions_of = |n: usize, kind: PolicyKind| -> Option<Vec<f64>> {
            grouped
                .iter()
                .find(|(k, _)| *k == (n, kind))
                .map(|(_, rs)| rs.iter().map(|r| r.actions_used as f64).collect())
        };
        let mut significance = Vec::new();
        for &n in &skill_counts {
            let Some(adaptive) = actions_of(n, PolicyKind::Adaptive) else { continue };
            for baseline in [PolicyKind::Greedy, PolicyKind::Uniform] {
                let Some(other) = actions_of(n, baseline) else { continue };
                let welch = welch_t(&adaptive, &other).ok();
                significance.push(SignificanceRow {
                    skill_count: n,
                    baseline,
                    t: welch.map(|w| w.t),
                    df: welch.map(|w| w.df),
                    p: welch.map(|w| w.p),
                    cohens_d: cohens_d(&adaptive, &other).ok(),
                });
            }
        }
        Self { summary, significance, records }
    }

    pub fn summary_row(&self, policy: PolicyKind, skill_count: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.policy == policy && r.skill_count == skill_count)
    }

    pub fn significance_row(&self, baseline: PolicyKind, skill_count: usize) -> Option<&SignificanceRow> {
        self.significance
            .iter()
            .find(|r| r.baseline == baseline && r.skill_count == skill_count)
    }

    /// Whether any group had a single learner, leaving spreads undefined.
    pub fn has_degenerate_groups(&self) -> bool {
        self.summary.iter().any(|r| r.std_actions.is_none())
    }
}

/// Rounds to `digits` significant digits and prints without exponent.
pub fn format_significant(x: f64, digits: u32) -> String {
    if !x.is_finite() {
        return MISSING.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1) as usize, 0.0);
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let scale = 10f64.powi(digits as i32 - 1 - exponent);
    let rounded = (x * scale).round() / scale;
    // rounding can carry into a new leading digit (9.9996 -> 10.00)
    let exponent_after = rounded.abs().log10().floor() as i32;
    if exponent_after > exponent && decimals > 0 {
        return format!("{:.*}", decimals - 1, rounded);
    }
    format!("{rounded:.decimals$}")
}

fn opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.filter(|v| v.is_finite()).map_or_else(|| MISSING.to_string(), f)
}

fn preamble(out: &mut String, tags: &[(&str, &str)]) {
    for (k, v) in tags {
        let _ = writeln!(out, "# {k}={v}");
    }
}

pub fn format_raw(records: &[EpisodeRecord], tags: &[(&str, &str)]) -> String {
    let mut out = String::new();
    preamble(&mut out, tags);
    out.push_str(RAW_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.policy, r.skill_count, r.learner_id, r.actions_used, r.success
        );
    }
    out
}

pub fn format_summary(rows: &[SummaryRow], tags: &[(&str, &str)]) -> String {
    let mut out = String::new();
    preamble(&mut out, tags);
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.1}",
            r.policy,
            r.skill_count,
            r.n_learners,
            format_significant(r.mean_actions, 4),
            opt(r.std_actions, |v| format_significant(v, 4)),
            100.0 * r.success_rate
        );
    }
    out
}

pub fn format_significance(rows: &[SignificanceRow], tags: &[(&str, &str)]) -> String {
    let mut out = String::new();
    preamble(&mut out, tags);
    out.push_str(SIGNIFICANCE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.skill_count,
            r.comparison(),
            opt(r.t, |v| format_significant(v, 4)),
            opt(r.df, |v| format_significant(v, 4)),
            opt(r.p, |v| format!("{v:.4e}")),
            opt(r.cohens_d, |v| format_significant(v, 4)),
        );
    }
    out
}

/// Parsed raw table: leading `# key=value` tags and the records.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub tags: Vec<(String, String)>,
    pub records: Vec<EpisodeRecord>,
}

fn field<T: FromStr>(cols: &[&str], idx: usize, name: &str, line_no: usize) -> Result<T> {
    cols.get(idx)
        .ok_or_else(|| Error::Input(format!("line {line_no}: missing column '{name}'")))?
        .trim()
        .parse()
        .map_err(|_| Error::Input(format!("line {line_no}: invalid value for '{name}'")))
}

pub fn parse_raw(text: &str) -> Result<RawTable> {
    let mut tags = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let Some(tag) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = tag.trim().split_once('=') {
            tags.push((k.trim().to_string(), v.trim().to_string()));
        }
        lines.next();
    }
    match lines.next() {
        Some((_, header)) if header.trim() == RAW_HEADER => {}
        Some((i, _)) => return Err(Error::Input(format!("line {}: expected header '{RAW_HEADER}'", i + 1))),
        None => return Err(Error::Input("raw records file is empty".into())),
    }
    if !text.ends_with('\n') {
        return Err(Error::Input("raw records file is truncated (no final newline)".into()));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Input(format!(
                "line {line_no}: expected 5 columns, found {}",
                cols.len()
            )));
        }
        records.push(EpisodeRecord {
            policy: field(&cols, 0, "policy", line_no)?,
            skill_count: field(&cols, 1, "skill_count", line_no)?,
            learner_id: field(&cols, 2, "learner_id", line_no)?,
            actions_used: field(&cols, 3, "actions_used", line_no)?,
            success: field(&cols, 4, "success", line_no)?,
        });
    }
    if records.is_empty() {
        return Err(Error::Input("raw records file has no records".into()));
    }
    Ok(RawTable { tags, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(policy: PolicyKind, n: usize, id: usize, actions: usize, success: bool) -> EpisodeRecord {
        EpisodeRecord { policy, skill_count: n, learner_id: id, actions_used: actions, success }
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(491.7, 4), "491.7");
        assert_eq!(format_significant(38.5, 4), "38.50");
        assert_eq!(format_significant(170.24, 4), "170.2");
        assert_eq!(format_significant(1234.4, 4), "1234");
        assert_eq!(format_significant(-0.7812, 4), "-0.7812");
        assert_eq!(format_significant(9.99996, 4), "10.00");
        assert_eq!(format_significant(0.0, 4), "0.000");
        assert_eq!(format_significant(f64::NAN, 4), "NA");
    }

    #[test]
    fn aggregates_and_compares() {
        let records = vec![
            rec(PolicyKind::Uniform, 3, 0, 10, true),
            rec(PolicyKind::Uniform, 3, 1, 20, false),
            rec(PolicyKind::Uniform, 3, 2, 30, true),
            rec(PolicyKind::Adaptive, 3, 0, 5, true),
            rec(PolicyKind::Adaptive, 3, 1, 7, true),
            rec(PolicyKind::Adaptive, 3, 2, 9, true),
        ];
        let report = ExperimentReport::from_records(records);
        let u = report.summary_row(PolicyKind::Uniform, 3).unwrap();
        assert_eq!(u.mean_actions, 20.0);
        assert_eq!(u.std_actions, Some(10.0));
        assert!((u.success_rate - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.significance.len(), 1);
        let s = report.significance_row(PolicyKind::Uniform, 3).unwrap();
        assert_eq!(s.comparison(), "adaptive_vs_uniform");
        assert!(s.cohens_d.unwrap() < 0.0);
    }

    #[test]
    fn single_learner_is_flagged() {
        let report = ExperimentReport::from_records(vec![
            rec(PolicyKind::Uniform, 3, 0, 10, true),
            rec(PolicyKind::Adaptive, 3, 0, 8, true),
        ]);
        assert!(report.has_degenerate_groups());
        assert_eq!(report.summary[0].std_actions, None);
        let row = &report.significance[0];
        assert_eq!((row.t, row.p, row.cohens_d), (None, None, None));
        let text = format_summary(&report.summary, &[]);
        assert!(text.lines().nth(1).unwrap().ends_with(",NA,100.0"));
    }

    #[test]
    fn raw_round_trip_and_truncation() {
        let records = vec![rec(PolicyKind::Greedy, 5, 3, 42, false), rec(PolicyKind::Adaptive, 5, 3, 17, true)];
        let text = format_raw(&records, &[("manifest", "abc")]);
        let parsed = parse_raw(&text).unwrap();
        assert_eq!(parsed.records, records);
        assert_eq!(parsed.tags, vec![("manifest".to_string(), "abc".to_string())]);

        let cut = &text[..text.len() - 4];
        assert!(parse_raw(cut).is_err());
        assert!(parse_raw("policy,oops\n").is_err());
        assert!(parse_raw(&format!("{RAW_HEADER}\nadaptive,5,3\n")).is_err());
    }
}
