use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_range, ReportError};
use crate::domain::{DetectionEnvironment, DomainError, Release, Severity, Timestamp};
use crate::ingest::Dataset;
use crate::week::IsoWeek;

/// Anomalies opened in `from..=to` by severity, optionally for one platform.
pub fn severity_breakdown(
    dataset: &Dataset,
    from: IsoWeek,
    to: IsoWeek,
    platform: Option<&str>,
) -> Result<BTreeMap<Severity, u64>, ReportError> {
    check_range(from, to)?;
    let (start, end) = (from.start(), to.end());
    let mut out: BTreeMap<Severity, u64> = Severity::ALL.iter().map(|s| (*s, 0)).collect();
    for a in dataset.anomalies.values() {
        if platform.is_some_and(|p| a.component != p) {
            continue;
        }
        if a.opened_at >= start && a.opened_at < end {
            *out.entry(a.severity).or_default() += 1;
        }
    }
    Ok(out)
}

pub fn environment_breakdown(
    dataset: &Dataset,
    release_id: &str,
) -> Result<BTreeMap<DetectionEnvironment, u64>, ReportError> {
    if !dataset.releases.contains_key(release_id) {
        return Err(ReportError::UnknownRelease(release_id.to_string()));
    }
    let mut out: BTreeMap<DetectionEnvironment, u64> =
        DetectionEnvironment::ALL.iter().map(|e| (*e, 0)).collect();
    for a in dataset.anomalies_of(release_id) {
        *out.entry(a.environment).or_default() += 1;
    }
    Ok(out)
}

/// Anomalies detected in a release, by severity.
pub fn release_severity_breakdown(
    dataset: &Dataset,
    release_id: &str,
) -> Result<BTreeMap<Severity, u64>, ReportError> {
    if !dataset.releases.contains_key(release_id) {
        return Err(ReportError::UnknownRelease(release_id.to_string()));
    }
    let mut out: BTreeMap<Severity, u64> = Severity::ALL.iter().map(|s| (*s, 0)).collect();
    for a in dataset.anomalies_of(release_id) {
        *out.entry(a.severity).or_default() += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyDistribution {
    pub release_id: String,
    /// Anomalies detected in this release.
    pub new: u64,
    /// Anomalies of the same platform still open when the release shipped.
    pub inherited: u64,
    /// New or inherited anomalies closed while this release was current.
    pub solved: u64,
}

fn next_release<'a>(dataset: &'a Dataset, release: &Release) -> Option<&'a Release> {
    let key = |r: &Release| (r.released_at, r.version.clone(), r.id.clone());
    let own = key(release);
    dataset
        .releases
        .values()
        .filter(|r| r.component == release.component && key(r) > own)
        .min_by_key(|r| key(r))
}

pub fn anomaly_distribution(
    dataset: &Dataset,
    release_id: &str,
    as_of: Timestamp,
) -> Result<AnomalyDistribution, ReportError> {
    let release = dataset
        .releases
        .get(release_id)
        .ok_or_else(|| ReportError::UnknownRelease(release_id.to_string()))?;
    let shipped = release.released_start();
    if as_of < shipped {
        return Err(DomainError::NotYetReleased {
            release: release_id.to_string(),
            as_of,
        }
        .into());
    }
    let window_end = next_release(dataset, release)
        .map(|r| r.released_start().min(as_of))
        .unwrap_or(as_of);

    let mut dist = AnomalyDistribution {
        release_id: release_id.to_string(),
        new: 0,
        inherited: 0,
        solved: 0,
    };
    for a in dataset.anomalies.values() {
        let is_new = a.release_id == release_id;
        let is_inherited = !is_new
            && a.component == release.component
            && a.opened_at < shipped
            && a.closed_at.is_none_or(|c| c > shipped);
        if !(is_new || is_inherited) {
            continue;
        }
        if is_new {
            dist.new += 1;
        } else {
            dist.inherited += 1;
        }
        if a.closed_at.is_some_and(|c| c >= shipped && c < window_end) {
            dist.solved += 1;
        }
    }
    Ok(dist)
}
