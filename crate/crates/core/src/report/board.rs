use std::cmp::Ordering;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::domain::{anomaly_age, Anomaly, Timestamp};
use crate::ingest::Dataset;

pub const BOARD_WINDOW_DAYS: i64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardEntry {
    #[serde(flatten)]
    pub anomaly: Anomaly,
    pub age_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardReport {
    pub as_of: Timestamp,
    /// Opened during the last seven days, whether or not already closed.
    pub newly_opened: Vec<BoardEntry>,
    /// Opened earlier and still open at `as_of`.
    pub still_open: Vec<BoardEntry>,
}

fn board_order(a: &BoardEntry, b: &BoardEntry) -> Ordering {
    b.anomaly
        .severity
        .cmp(&a.anomaly.severity)
        .then_with(|| b.age_hours.total_cmp(&a.age_hours))
        .then_with(|| a.anomaly.id.cmp(&b.anomaly.id))
}

pub fn board_report(dataset: &Dataset, as_of: Timestamp) -> BoardReport {
    let window_start = as_of - Duration::days(BOARD_WINDOW_DAYS);
    let mut newly_opened = Vec::new();
    let mut still_open = Vec::new();
    for a in dataset.anomalies.values().filter(|a| a.opened_at <= as_of) {
        let Ok(age_hours) = anomaly_age(a, as_of) else {
            continue;
        };
        let entry = || BoardEntry {
            anomaly: a.clone(),
            age_hours,
        };
        if a.opened_at > window_start {
            newly_opened.push(entry());
        } else if a.is_open_at(as_of) {
            still_open.push(entry());
        }
    }
    newly_opened.sort_by(board_order);
    still_open.sort_by(board_order);
    BoardReport {
        as_of,
        newly_opened,
        still_open,
    }
}
