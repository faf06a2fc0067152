use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_range, ReportError};
use crate::domain::{Anomaly, Severity};
use crate::ingest::Dataset;
use crate::week::IsoWeek;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekCounts {
    pub opened: u64,
    pub closed: u64,
    /// Anomalies still open at the end of the week.
    pub backlog: u64,
    /// Opened anomalies by severity.
    pub severity_breakdown: BTreeMap<Severity, u64>,
}

impl WeekCounts {
    fn carried(backlog: u64) -> Self {
        WeekCounts {
            opened: 0,
            closed: 0,
            backlog,
            severity_breakdown: Severity::ALL.iter().map(|s| (*s, 0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeeklyAnomalyReport {
    pub week: IsoWeek,
    pub overall: WeekCounts,
    pub platforms: BTreeMap<String, WeekCounts>,
}

/// One report per ISO week in `from..=to`, split by the platform
/// (component) of each anomaly. Quiet weeks are included with zero counts
/// and the carried backlog.
pub fn weekly_trend(
    dataset: &Dataset,
    from: IsoWeek,
    to: IsoWeek,
    platform: Option<&str>,
) -> Result<Vec<WeeklyAnomalyReport>, ReportError> {
    check_range(from, to)?;
    let selected: Vec<&Anomaly> = dataset
        .anomalies
        .values()
        .filter(|a| platform.is_none_or(|p| a.component == p))
        .collect();

    let mut platforms: Vec<String> = selected.iter().map(|a| a.component.clone()).collect();
    if let Some(p) = platform {
        platforms.push(p.to_string());
    }
    platforms.sort();
    platforms.dedup();

    let range_start = from.start();
    let range_end = to.end();
    let index = |w: IsoWeek| from.weeks_until(w) as usize;
    let n_weeks = index(to) + 1;

    // Per-platform state: backlog entering the range, then per-week deltas.
    let mut initial: BTreeMap<&str, u64> = platforms.iter().map(|p| (p.as_str(), 0)).collect();
    let mut weeks: Vec<BTreeMap<&str, WeekCounts>> = (0..n_weeks)
        .map(|_| {
            platforms
                .iter()
                .map(|p| (p.as_str(), WeekCounts::carried(0)))
                .collect()
        })
        .collect();

    for a in &selected {
        let key = a.component.as_str();
        let closed_before = |t| a.closed_at.is_some_and(|c| c < t);
        if a.opened_at < range_start && !closed_before(range_start) {
            *initial.entry(key).or_default() += 1;
        }
        if a.opened_at >= range_start && a.opened_at < range_end {
            let w = &mut weeks[index(IsoWeek::of(a.opened_at))];
            let counts = w.get_mut(key).expect("platform registered");
            counts.opened += 1;
            *counts.severity_breakdown.entry(a.severity).or_default() += 1;
        }
        if let Some(c) = a.closed_at {
            if c >= range_start && c < range_end {
                let w = &mut weeks[index(IsoWeek::of(c))];
                w.get_mut(key).expect("platform registered").closed += 1;
            }
        }
    }

    let mut backlog = initial;
    let mut out = Vec::with_capacity(n_weeks);
    for (week, mut per_platform) in IsoWeek::range(from, to).zip(weeks) {
        let mut overall = WeekCounts::carried(0);
        for (p, counts) in per_platform.iter_mut() {
            let b = backlog.get_mut(p).expect("platform registered");
            *b = *b + counts.opened - counts.closed;
            counts.backlog = *b;
            overall.opened += counts.opened;
            overall.closed += counts.closed;
            overall.backlog += counts.backlog;
            for (s, n) in &counts.severity_breakdown {
                *overall.severity_breakdown.entry(*s).or_default() += n;
            }
        }
        out.push(WeeklyAnomalyReport {
            week,
            overall,
            platforms: per_platform
                .into_iter()
                .map(|(p, c)| (p.to_string(), c))
                .collect(),
        });
    }
    Ok(out)
}
