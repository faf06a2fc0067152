//! Core domain types: releases, anomalies and the per-release quantities
//! every indicator is built from.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("release {0} was not used in production")]
    NotInProduction(String),
    #[error("release {release} is not yet released at {as_of}")]
    NotYetReleased { release: String, as_of: Timestamp },
    #[error("anomaly {anomaly} belongs to release {found}, expected {expected}")]
    ForeignAnomaly {
        anomaly: String,
        expected: String,
        found: String,
    },
    #[error("anomaly {anomaly} is opened after {as_of}")]
    FutureAnomaly { anomaly: String, as_of: Timestamp },
    #[error("invalid {entity} {id}: {reason}")]
    Invalid {
        entity: &'static str,
        id: String,
        reason: String,
    },
}

/// Midnight UTC of a calendar date.
pub fn start_of_day(date: NaiveDate) -> Timestamp {
    date.and_time(NaiveTime::MIN).and_utc()
}

/// Signed number of hours from `from` to `to`.
pub fn hours_between(from: Timestamp, to: Timestamp) -> f64 {
    (to - from).num_seconds() as f64 / 3600.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    // Declaration order gives the total order low < medium < high < blocking.
    Low,
    Medium,
    High,
    Blocking,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Blocking,
        Severity::High,
        Severity::Medium,
        Severity::Low,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Blocking => "blocking",
            Severity::High => "high",
            Severity::Medium => "medium",
            Severity::Low => "low",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blocking" => Ok(Severity::Blocking),
            "high" => Ok(Severity::High),
            "medium" => Ok(Severity::Medium),
            "low" => Ok(Severity::Low),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionEnvironment {
    InternalTest,
    ExternalTest,
    Production,
}

impl DetectionEnvironment {
    pub const ALL: [DetectionEnvironment; 3] = [
        DetectionEnvironment::InternalTest,
        DetectionEnvironment::ExternalTest,
        DetectionEnvironment::Production,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectionEnvironment::InternalTest => "internal_test",
            DetectionEnvironment::ExternalTest => "external_test",
            DetectionEnvironment::Production => "production",
        }
    }

    /// Whether an anomaly found here counts as a failure during life (LA)
    /// rather than a failure during test (TA).
    pub fn is_field_failure(self) -> bool {
        !matches!(self, DetectionEnvironment::InternalTest)
    }
}

impl fmt::Display for DetectionEnvironment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectionEnvironment {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "internal_test" => Ok(DetectionEnvironment::InternalTest),
            "external_test" => Ok(DetectionEnvironment::ExternalTest),
            "production" => Ok(DetectionEnvironment::Production),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub id: String,
    /// Platform the anomaly impacts, e.g. "MTP" or "EAS".
    pub component: String,
    /// Release in which the anomaly was detected.
    pub release_id: String,
    pub severity: Severity,
    pub environment: DetectionEnvironment,
    pub opened_at: Timestamp,
    pub closed_at: Option<Timestamp>,
    pub title: String,
}

impl Anomaly {
    pub fn validate(&self) -> Result<(), DomainError> {
        if let Some(closed) = self.closed_at {
            if closed < self.opened_at {
                return Err(DomainError::Invalid {
                    entity: "anomaly",
                    id: self.id.clone(),
                    reason: "closed_at precedes opened_at".into(),
                });
            }
        }
        Ok(())
    }

    /// Open at instant `t`: opened at or before `t` and not closed by `t`.
    pub fn is_open_at(&self, t: Timestamp) -> bool {
        self.opened_at <= t && self.closed_at.is_none_or(|c| c > t)
    }

    pub fn repair_hours(&self) -> Option<f64> {
        self.closed_at.map(|c| hours_between(self.opened_at, c))
    }
}

/// Hours from opening to closure, or to `as_of` while still open.
pub fn anomaly_age(anomaly: &Anomaly, as_of: Timestamp) -> Result<f64, DomainError> {
    if as_of < anomaly.opened_at {
        return Err(DomainError::FutureAnomaly {
            anomaly: anomaly.id.clone(),
            as_of,
        });
    }
    let end = match anomaly.closed_at {
        Some(closed) if closed < as_of => closed,
        _ => as_of,
    };
    Ok(hours_between(anomaly.opened_at, end))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SizeDelta {
    pub new_lines: u64,
    pub changed_lines: u64,
    pub deleted_lines: u64,
    pub total_product_loc: u64,
}

impl SizeDelta {
    pub fn changed_total(&self) -> u64 {
        self.new_lines + self.changed_lines + self.deleted_lines
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub dev_start: NaiveDate,
    pub dev_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Release {
    pub id: String,
    pub component: String,
    pub version: String,
    pub released_at: NaiveDate,
    pub production: bool,
    pub phases: PhaseSpan,
    /// Date the release was superseded, if it was.
    pub life_end: Option<NaiveDate>,
    pub test_hours: f64,
    pub size: SizeDelta,
    pub dev_effort: f64,
    pub test_effort: f64,
}

impl Release {
    pub fn released_start(&self) -> Timestamp {
        start_of_day(self.released_at)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let fail = |reason: &str| {
            Err(DomainError::Invalid {
                entity: "release",
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        // Phases may overlap each other; each must be ordered on its own.
        if self.phases.dev_start > self.phases.dev_end {
            return fail("dev_start after dev_end");
        }
        if self.phases.test_start > self.phases.test_end {
            return fail("test_start after test_end");
        }
        if let Some(end) = self.life_end {
            if end < self.released_at {
                return fail("life_end before released_at");
            }
        }
        if !(self.test_hours.is_finite() && self.test_hours >= 0.0) {
            return fail("test_hours must be a non-negative number");
        }
        if !(self.dev_effort.is_finite() && self.dev_effort >= 0.0) {
            return fail("dev_effort must be a non-negative number");
        }
        if !(self.test_effort.is_finite() && self.test_effort >= 0.0) {
            return fail("test_effort must be a non-negative number");
        }
        if self.production && self.size.total_product_loc == 0 {
            return fail("total_product_loc must be positive for a production release");
        }
        Ok(())
    }
}

/// Total life time (TL) in hours: from release day to the supersession
/// date, or to `as_of` while the release is still live.
pub fn life_time(release: &Release, as_of: Timestamp) -> Result<f64, DomainError> {
    if !release.production {
        return Err(DomainError::NotInProduction(release.id.clone()));
    }
    let start = release.released_start();
    let end = match release.life_end.map(start_of_day) {
        Some(life_end) => life_end.min(as_of),
        None => as_of,
    };
    if end < start {
        if release.life_end.is_none() {
            return Err(DomainError::NotYetReleased {
                release: release.id.clone(),
                as_of,
            });
        }
        // Superseded release observed before its own release day.
        return Ok(0.0);
    }
    Ok(hours_between(start, end))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureCounts {
    /// Failures during life.
    pub la: u64,
    /// Failures during test.
    pub ta: u64,
    /// Total anomalies attributed to the release.
    pub tna: u64,
}

pub fn classify_failures(
    release: &Release,
    anomalies: &[&Anomaly],
) -> Result<FailureCounts, DomainError> {
    let mut counts = FailureCounts::default();
    for anomaly in anomalies {
        if anomaly.release_id != release.id {
            return Err(DomainError::ForeignAnomaly {
                anomaly: anomaly.id.clone(),
                expected: release.id.clone(),
                found: anomaly.release_id.clone(),
            });
        }
        if anomaly.environment.is_field_failure() {
            counts.la += 1;
        } else {
            counts.ta += 1;
        }
    }
    counts.tna = counts.la + counts.ta;
    Ok(counts)
}
