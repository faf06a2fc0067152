//! The release indicators: product quality (MTTF, MTTR, MTBF, TF/KLOC, FR,
//! quality, availability), process quality (ED, IFR, TQI, MTT/KLOC) and
//! size (PCR, KLCC, FP).
//!
//! Every ratio with a degenerate denominator yields
//! [`IndicatorValue::NotApplicable`] with a typed reason instead of an
//! infinite or undefined number.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{classify_failures, life_time, Anomaly, DomainError, FailureCounts, Release, Timestamp};
use crate::ingest::Dataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndicatorError {
    #[error("unknown indicator {0:?}")]
    UnknownIndicator(String),
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("invalid function point parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaReason {
    NoFailures,
    NoChangedCode,
    NoTestAnomalies,
    NoClosedAnomalies,
    ZeroLife,
}

impl NaReason {
    pub fn as_str(self) -> &'static str {
        match self {
            NaReason::NoFailures => "no_failures",
            NaReason::NoChangedCode => "no_changed_code",
            NaReason::NoTestAnomalies => "no_test_anomalies",
            NaReason::NoClosedAnomalies => "no_closed_anomalies",
            NaReason::ZeroLife => "zero_life",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Hours,
    FailuresPerKloc,
    FailuresPerHour,
    DefectsPerKloc,
    Percent,
    PerHour,
    Ratio,
    HoursPerKloc,
    Kloc,
    FunctionPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndicatorValue {
    Value { value: f64, unit: Unit },
    NotApplicable { not_applicable: NaReason },
}

impl IndicatorValue {
    pub fn of(value: f64, unit: Unit) -> Self {
        IndicatorValue::Value { value, unit }
    }

    pub fn na(reason: NaReason) -> Self {
        IndicatorValue::NotApplicable {
            not_applicable: reason,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            IndicatorValue::Value { value, .. } => Some(value),
            IndicatorValue::NotApplicable { .. } => None,
        }
    }

    pub fn reason(&self) -> Option<NaReason> {
        match *self {
            IndicatorValue::Value { .. } => None,
            IndicatorValue::NotApplicable { not_applicable } => Some(not_applicable),
        }
    }
}

fn ratio(num: f64, den: f64, unit: Unit, zero: NaReason) -> IndicatorValue {
    if den == 0.0 {
        IndicatorValue::na(zero)
    } else {
        IndicatorValue::of(num / den, unit)
    }
}

/// Canonical indicator names shared by the CLI, the API and the dashboard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Mttf,
    Mttr,
    Mtbf,
    TfPerKloc,
    Fr,
    Quality,
    Av,
    Ed,
    Ifr,
    Tqi,
    MttPerKloc,
    Pcr,
    Klcc,
    Fp,
}

impl Indicator {
    pub const ALL: [Indicator; 14] = [
        Indicator::Mttf,
        Indicator::Mttr,
        Indicator::Mtbf,
        Indicator::TfPerKloc,
        Indicator::Fr,
        Indicator::Quality,
        Indicator::Av,
        Indicator::Ed,
        Indicator::Ifr,
        Indicator::Tqi,
        Indicator::MttPerKloc,
        Indicator::Pcr,
        Indicator::Klcc,
        Indicator::Fp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Mttf => "mttf",
            Indicator::Mttr => "mttr",
            Indicator::Mtbf => "mtbf",
            Indicator::TfPerKloc => "tf_per_kloc",
            Indicator::Fr => "fr",
            Indicator::Quality => "quality",
            Indicator::Av => "av",
            Indicator::Ed => "ed",
            Indicator::Ifr => "ifr",
            Indicator::Tqi => "tqi",
            Indicator::MttPerKloc => "mtt_per_kloc",
            Indicator::Pcr => "pcr",
            Indicator::Klcc => "klcc",
            Indicator::Fp => "fp",
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Indicator {
    type Err = IndicatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Indicator::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| IndicatorError::UnknownIndicator(s.to_string()))
    }
}

/// Backfiring parameters for estimating function points from LOC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpParameters {
    /// Average LOC per function point for the implementation language (C: 120).
    pub loc_per_fp: f64,
    /// Backfiring adjustment factor (complex applications: 1.30).
    pub baf: f64,
}

impl Default for FpParameters {
    fn default() -> Self {
        FpParameters {
            loc_per_fp: 120.0,
            baf: 1.30,
        }
    }
}

impl FpParameters {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.loc_per_fp) {
            return Err(IndicatorError::InvalidParams(format!(
                "loc_per_fp must be positive, got {}",
                self.loc_per_fp
            )));
        }
        if !ok(self.baf) {
            return Err(IndicatorError::InvalidParams(format!(
                "baf must be positive, got {}",
                self.baf
            )));
        }
        Ok(())
    }
}

/// KLOC changed in code: new + changed + deleted lines, in thousands.
pub fn klcc(size: &crate::domain::SizeDelta) -> f64 {
    size.changed_total() as f64 / 1000.0
}

pub fn mttf(tl: f64, la: u64) -> IndicatorValue {
    ratio(tl, la as f64, Unit::Hours, NaReason::NoFailures)
}

/// Mean repair time over the anomalies closed by `as_of`.
pub fn mttr<'a, I>(anomalies: I, as_of: Timestamp) -> IndicatorValue
where
    I: IntoIterator<Item = &'a Anomaly>,
{
    let (sum, closed) = anomalies
        .into_iter()
        .filter(|a| a.closed_at.is_some_and(|c| c <= as_of))
        .filter_map(Anomaly::repair_hours)
        .fold((0.0, 0u64), |(s, n), h| (s + h, n + 1));
    ratio(sum, closed as f64, Unit::Hours, NaReason::NoClosedAnomalies)
}

/// Sum of the two means; the first not-applicable reason wins.
pub fn mtbf(mttf: IndicatorValue, mttr: IndicatorValue) -> IndicatorValue {
    match (mttf, mttr) {
        (IndicatorValue::NotApplicable { .. }, _) => mttf,
        (_, IndicatorValue::NotApplicable { .. }) => mttr,
        (IndicatorValue::Value { value: f, .. }, IndicatorValue::Value { value: r, .. }) => {
            IndicatorValue::of(f + r, Unit::Hours)
        }
    }
}

pub fn total_failures_per_kloc(la: u64, klcc: f64) -> IndicatorValue {
    ratio(la as f64, klcc, Unit::FailuresPerKloc, NaReason::NoChangedCode)
}

pub fn failure_rate(la: u64, tl: f64) -> IndicatorValue {
    ratio(la as f64, tl, Unit::FailuresPerHour, NaReason::ZeroLife)
}

pub fn quality_index(defects: u64, klcc: f64) -> IndicatorValue {
    ratio(defects as f64, klcc, Unit::DefectsPerKloc, NaReason::NoChangedCode)
}

/// Availability percentage. Without any repair the release counts as fully
/// available.
pub fn availability(mttf: IndicatorValue, mttr: IndicatorValue) -> IndicatorValue {
    match (mttf.value(), mttr.value()) {
        (None, _) => IndicatorValue::na(NaReason::NoFailures),
        // Zero MTTF only arises from zero life time.
        (Some(0.0), _) => IndicatorValue::na(NaReason::ZeroLife),
        (Some(_), None) => IndicatorValue::of(100.0, Unit::Percent),
        (Some(f), Some(r)) => IndicatorValue::of(100.0 * f / (f + r), Unit::Percent),
    }
}

pub fn efficiency_degree(pcr: IndicatorValue, tl: f64) -> IndicatorValue {
    match pcr.value() {
        None => pcr,
        Some(p) => ratio(p, tl, Unit::PerHour, NaReason::ZeroLife),
    }
}

pub fn integration_failure_rate(ta: u64, test_hours: f64) -> IndicatorValue {
    ratio(ta as f64, test_hours, Unit::FailuresPerHour, NaReason::ZeroLife)
}

pub fn test_quality_index(la: u64, ta: u64) -> IndicatorValue {
    ratio(la as f64, ta as f64, Unit::Ratio, NaReason::NoTestAnomalies)
}

pub fn maintenance_test_time_per_kloc(test_hours: f64, klcc: f64) -> IndicatorValue {
    ratio(test_hours, klcc, Unit::HoursPerKloc, NaReason::NoChangedCode)
}

pub fn product_change_rate(klcc: f64, tpkl: f64) -> IndicatorValue {
    ratio(klcc, tpkl, Unit::Ratio, NaReason::NoChangedCode)
}

/// Backfired function points: `loc / (loc_per_fp * baf)`, with raw LOC.
pub fn function_points(loc: u64, params: &FpParameters) -> Result<f64, IndicatorError> {
    params.validate()?;
    Ok(loc as f64 / (params.loc_per_fp * params.baf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub release_id: String,
    pub failures: FailureCounts,
    pub life_hours: f64,
    pub mttf: IndicatorValue,
    pub mttr: IndicatorValue,
    pub mtbf: IndicatorValue,
    pub tf_per_kloc: IndicatorValue,
    pub fr: IndicatorValue,
    pub quality: IndicatorValue,
    pub av_percent: IndicatorValue,
    pub ed: IndicatorValue,
    pub ifr: IndicatorValue,
    pub tqi: IndicatorValue,
    pub mtt_per_kloc: IndicatorValue,
    pub pcr: IndicatorValue,
    pub klcc: IndicatorValue,
    pub fp: IndicatorValue,
}

impl IndicatorSet {
    pub fn get(&self, indicator: Indicator) -> IndicatorValue {
        match indicator {
            Indicator::Mttf => self.mttf,
            Indicator::Mttr => self.mttr,
            Indicator::Mtbf => self.mtbf,
            Indicator::TfPerKloc => self.tf_per_kloc,
            Indicator::Fr => self.fr,
            Indicator::Quality => self.quality,
            Indicator::Av => self.av_percent,
            Indicator::Ed => self.ed,
            Indicator::Ifr => self.ifr,
            Indicator::Tqi => self.tqi,
            Indicator::MttPerKloc => self.mtt_per_kloc,
            Indicator::Pcr => self.pcr,
            Indicator::Klcc => self.klcc,
            Indicator::Fp => self.fp,
        }
    }
}

/// All indicators for one production release, using the anomalies known
/// (opened) at `as_of`.
pub fn compute_indicator_set<'a, I>(
    release: &Release,
    anomalies: I,
    as_of: Timestamp,
    fp_params: &FpParameters,
) -> Result<IndicatorSet, IndicatorError>
where
    I: IntoIterator<Item = &'a Anomaly>,
{
    let known: Vec<&Anomaly> = anomalies
        .into_iter()
        .filter(|a| a.opened_at <= as_of)
        .collect();
    let tl = life_time(release, as_of)?;
    let failures = classify_failures(release, &known)?;
    let changed = klcc(&release.size);
    let tpkl = release.size.total_product_loc as f64 / 1000.0;

    let mttf_v = mttf(tl, failures.la);
    let mttr_v = mttr(known.iter().copied(), as_of);
    let pcr_v = product_change_rate(changed, tpkl);
    let fp = function_points(release.size.total_product_loc, fp_params)?;

    Ok(IndicatorSet {
        release_id: release.id.clone(),
        failures,
        life_hours: tl,
        mttf: mttf_v,
        mttr: mttr_v,
        mtbf: mtbf(mttf_v, mttr_v),
        tf_per_kloc: total_failures_per_kloc(failures.la, changed),
        fr: failure_rate(failures.la, tl),
        quality: quality_index(failures.tna, changed),
        av_percent: availability(mttf_v, mttr_v),
        ed: efficiency_degree(pcr_v, tl),
        ifr: integration_failure_rate(failures.ta, release.test_hours),
        tqi: test_quality_index(failures.la, failures.ta),
        mtt_per_kloc: maintenance_test_time_per_kloc(release.test_hours, changed),
        pcr: pcr_v,
        klcc: IndicatorValue::of(changed, Unit::Kloc),
        fp: IndicatorValue::of(fp, Unit::FunctionPoints),
    })
}

/// Indicator set for a release of the dataset, looked up by id.
pub fn release_indicators(
    dataset: &Dataset,
    release_id: &str,
    as_of: Timestamp,
    fp_params: &FpParameters,
) -> Result<Option<IndicatorSet>, IndicatorError> {
    let Some(release) = dataset.releases.get(release_id) else {
        return Ok(None);
    };
    compute_indicator_set(release, dataset.anomalies_of(release_id), as_of, fp_params).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub release_id: String,
    pub version: String,
    pub released_at: chrono::NaiveDate,
    pub value: IndicatorValue,
}

/// One indicator over the production releases of a component, in release
/// order. Releases shipped after `as_of` are left out.
pub fn indicator_series(
    dataset: &Dataset,
    component: &str,
    indicator: Indicator,
    as_of: Timestamp,
    fp_params: &FpParameters,
) -> Result<Vec<SeriesPoint>, IndicatorError> {
    if !dataset.releases.values().any(|r| r.component == component) {
        return Err(IndicatorError::UnknownComponent(component.to_string()));
    }
    dataset
        .release_sequence(component)
        .into_iter()
        .filter(|r| r.released_start() <= as_of)
        .map(|r| {
            let set = compute_indicator_set(r, dataset.anomalies_of(&r.id), as_of, fp_params)?;
            Ok(SeriesPoint {
                release_id: r.id.clone(),
                version: r.version.clone(),
                released_at: r.released_at,
                value: set.get(indicator),
            })
        })
        .collect()
}
