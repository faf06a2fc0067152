//! Plain-text table form of the reports.
//!
//! Columns are separated by at least two spaces and the first line is a
//! header. Numbers are printed in their shortest round-trip form, so the
//! text carries exactly the values of the structured output. Not-applicable
//! indicators print as `n/a (<reason>)`.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{AnomalyDistribution, BoardEntry, BoardReport, DecayFit, WeeklyAnomalyReport};
use crate::domain::{DetectionEnvironment, Severity};
use crate::indicators::{Indicator, IndicatorSet, IndicatorValue, SeriesPoint};
use crate::stats::{StatResult, StatValues};

/// Left-aligned table with column widths fitted to the content.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut push = |cells: Vec<&str>| {
        let mut line = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{cell:<w$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    push(header.to_vec());
    for row in rows {
        push(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn value_cell(v: &IndicatorValue) -> String {
    match v {
        IndicatorValue::Value { value, .. } => value.to_string(),
        IndicatorValue::NotApplicable { not_applicable } => {
            format!("n/a ({})", not_applicable.as_str())
        }
    }
}

pub fn indicator_set(set: &IndicatorSet) -> String {
    let mut rows = vec![
        vec!["la".to_string(), set.failures.la.to_string()],
        vec!["ta".to_string(), set.failures.ta.to_string()],
        vec!["tna".to_string(), set.failures.tna.to_string()],
        vec!["tl_hours".to_string(), set.life_hours.to_string()],
    ];
    rows.extend(
        Indicator::ALL
            .iter()
            .map(|i| vec![i.name().to_string(), value_cell(&set.get(*i))]),
    );
    format!("release {}\n{}", set.release_id, table(&["indicator", "value"], &rows))
}

pub fn series(indicator: Indicator, points: &[SeriesPoint]) -> String {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.release_id.clone(),
                p.version.clone(),
                p.released_at.to_string(),
                value_cell(&p.value),
            ]
        })
        .collect();
    table(&["release", "version", "released_at", indicator.name()], &rows)
}

fn severity_cells(map: &BTreeMap<Severity, u64>) -> Vec<String> {
    Severity::ALL
        .iter()
        .map(|s| map.get(s).copied().unwrap_or(0).to_string())
        .collect()
}

pub fn weekly(reports: &[WeeklyAnomalyReport]) -> String {
    let mut rows = Vec::new();
    for r in reports {
        let scopes = std::iter::once(("ALL", &r.overall))
            .chain(r.platforms.iter().map(|(p, c)| (p.as_str(), c)));
        for (scope, c) in scopes {
            let mut row = vec![
                r.week.to_string(),
                scope.to_string(),
                c.opened.to_string(),
                c.closed.to_string(),
                c.backlog.to_string(),
            ];
            row.extend(severity_cells(&c.severity_breakdown));
            rows.push(row);
        }
    }
    table(
        &[
            "week", "platform", "opened", "closed", "backlog", "blocking", "high", "medium", "low",
        ],
        &rows,
    )
}

fn board_rows(entries: &[BoardEntry], as_of: crate::domain::Timestamp) -> Vec<Vec<String>> {
    entries
        .iter()
        .map(|e| {
            vec![
                e.anomaly.id.clone(),
                e.anomaly.severity.to_string(),
                e.anomaly.component.clone(),
                e.anomaly.release_id.clone(),
                e.age_hours.to_string(),
                if e.anomaly.is_open_at(as_of) {
                    "open".into()
                } else {
                    "closed".into()
                },
                e.anomaly.title.clone(),
            ]
        })
        .collect()
}

pub fn board(report: &BoardReport) -> String {
    let header = ["id", "severity", "platform", "release", "age_hours", "state", "title"];
    format!(
        "board as of {}\n\nnewly opened ({})\n{}\nstill open ({})\n{}",
        report.as_of.format("%Y-%m-%dT%H:%M:%SZ"),
        report.newly_opened.len(),
        table(&header, &board_rows(&report.newly_opened, report.as_of)),
        report.still_open.len(),
        table(&header, &board_rows(&report.still_open, report.as_of)),
    )
}

pub fn distribution(
    dist: &AnomalyDistribution,
    severity: &BTreeMap<Severity, u64>,
    environment: &BTreeMap<DetectionEnvironment, u64>,
) -> String {
    let mut rows = vec![
        vec!["new".to_string(), dist.new.to_string()],
        vec!["inherited".to_string(), dist.inherited.to_string()],
        vec!["solved".to_string(), dist.solved.to_string()],
    ];
    for s in Severity::ALL {
        rows.push(vec![
            format!("severity.{s}"),
            severity.get(&s).copied().unwrap_or(0).to_string(),
        ]);
    }
    for e in DetectionEnvironment::ALL {
        rows.push(vec![
            format!("environment.{e}"),
            environment.get(&e).copied().unwrap_or(0).to_string(),
        ]);
    }
    format!("release {}\n{}", dist.release_id, table(&["measure", "count"], &rows))
}

pub fn decay(fit: &DecayFit) -> String {
    let rows: Vec<Vec<String>> = fit
        .deviations
        .iter()
        .map(|d| {
            vec![
                d.t.to_string(),
                d.week.map(|w| w.to_string()).unwrap_or_default(),
                d.observed.to_string(),
                d.predicted.to_string(),
                if d.flagged { "FLAG".into() } else { String::new() },
            ]
        })
        .collect();
    format!(
        "release {}\nc = {}\na = {}\nb = {}\nrmse = {}\nk = {}\n\n{}",
        fit.release_id,
        fit.c,
        fit.a,
        fit.b,
        fit.rmse,
        fit.k,
        table(&["t", "week", "observed", "predicted", "flag"], &rows)
    )
}

pub fn stat(result: &StatResult) -> String {
    let mut rows = vec![
        vec!["inputs".to_string(), result.inputs.join(", ")],
        vec!["n".to_string(), result.n.to_string()],
    ];
    match result.values {
        StatValues::Mean { mean } => rows.push(vec!["mean".into(), mean.to_string()]),
        StatValues::Stddev { stddev } => rows.push(vec!["stddev".into(), stddev.to_string()]),
        StatValues::Correlation { r } => rows.push(vec!["r".into(), r.to_string()]),
        StatValues::Regression {
            slope,
            intercept,
            r_squared,
        } => {
            rows.push(vec!["slope".into(), slope.to_string()]);
            rows.push(vec!["intercept".into(), intercept.to_string()]);
            rows.push(vec!["r_squared".into(), r_squared.to_string()]);
        }
    }
    table(&["statistic", "value"], &rows)
}
