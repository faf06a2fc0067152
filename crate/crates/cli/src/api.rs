//! Request model shared by the HTTP service and the command line. Both
//! front ends turn their input into a [`Request`], run it through
//! [`execute`] against one [`Snapshot`], and serialize the resulting
//! [`Payload`] the same way.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use relquant_core::indicators::{self, IndicatorError, IndicatorSet, SeriesPoint};
use relquant_core::ingest::{self, Dataset};
use relquant_core::report::{
    self, AnomalyDistribution, BoardReport, DecayFit, ReportError, WeeklyAnomalyReport,
};
use relquant_core::stats::{self, StatOp, StatResult, StatsError};
use relquant_core::{
    DetectionEnvironment, FpParameters, Indicator, IsoWeek, Release, Severity, Timestamp,
};
use relquant_core::domain::{classify_failures, DomainError};
use serde::{Deserialize, Serialize};

/// The full dataset plus its production-only view, built once per load.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub full: Dataset,
    pub production: Dataset,
}

impl Snapshot {
    pub fn new(full: Dataset) -> Self {
        let production = ingest::production_view(&full);
        Snapshot { full, production }
    }

    pub fn loaded_at(&self) -> Timestamp {
        self.full.loaded_at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn bad_query(message: impl Into<String>) -> Self {
        ApiError::new(400, "BadQuery", message)
    }

    pub fn not_found(path: &str) -> Self {
        ApiError::new(404, "NotFound", format!("no route for {path}"))
    }

    pub fn method_not_allowed(method: &str) -> Self {
        ApiError::new(405, "MethodNotAllowed", format!("{method} is not supported here"))
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<DomainError> for ApiError {
    fn from(e: DomainError) -> Self {
        let code = match e {
            DomainError::NotInProduction(_) => "NotInProduction",
            DomainError::NotYetReleased { .. } => "NotYetReleased",
            DomainError::ForeignAnomaly { .. }
            | DomainError::FutureAnomaly { .. }
            | DomainError::Invalid { .. } => "InvalidData",
        };
        ApiError::new(422, code, e.to_string())
    }
}

impl From<IndicatorError> for ApiError {
    fn from(e: IndicatorError) -> Self {
        match e {
            IndicatorError::UnknownIndicator(_) => ApiError::new(404, "UnknownIndicator", e.to_string()),
            IndicatorError::UnknownComponent(_) => ApiError::new(404, "UnknownComponent", e.to_string()),
            IndicatorError::InvalidParams(_) => ApiError::new(400, "InvalidParameter", e.to_string()),
            IndicatorError::Domain(d) => d.into(),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::BadRange { from, to } => ApiError::new(400, "BadRange", e.to_string())
                .with_detail(serde_json::json!({"from": from, "to": to})),
            ReportError::UnknownRelease(_) => ApiError::new(404, "UnknownRelease", e.to_string()),
            ReportError::TooFewPoints { needed, got } => {
                ApiError::new(422, "TooFewPoints", e.to_string())
                    .with_detail(serde_json::json!({"needed": needed, "got": got}))
            }
            ReportError::FitDiverged => ApiError::new(422, "FitDiverged", e.to_string()),
            ReportError::InvalidParameter(_) => ApiError::new(400, "InvalidParameter", e.to_string()),
            ReportError::Domain(d) => d.into(),
        }
    }
}

impl From<StatsError> for ApiError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::TooFewPoints { needed, got } => {
                ApiError::new(422, "TooFewPoints", e.to_string())
                    .with_detail(serde_json::json!({"needed": needed, "got": got}))
            }
            StatsError::ConstantSeries => ApiError::new(422, "ConstantSeries", e.to_string()),
        }
    }
}

fn unknown_release(id: &str) -> ApiError {
    ApiError::new(404, "UnknownRelease", format!("unknown release {id:?}"))
}

/// Release attributes that can feed the statistics endpoint next to the
/// indicators.
pub const ATTRIBUTES: [&str; 7] = [
    "dev_effort_pd",
    "test_effort_pd",
    "test_hours",
    "life_hours",
    "la",
    "ta",
    "tna",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub release_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsRequest {
    pub op: String,
    pub x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default)]
    pub filter: StatsFilter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Releases {
        component: Option<String>,
        production_only: bool,
    },
    Indicators {
        release: String,
        as_of: Option<Timestamp>,
    },
    Series {
        indicator: String,
        component: String,
        as_of: Option<Timestamp>,
    },
    Weekly {
        from: Option<IsoWeek>,
        to: Option<IsoWeek>,
        platform: Option<String>,
    },
    Board {
        as_of: Option<Timestamp>,
    },
    Distribution {
        release: String,
        as_of: Option<Timestamp>,
    },
    Severity {
        release: String,
    },
    Environment {
        release: String,
    },
    Decay {
        release: String,
        k: f64,
        as_of: Option<Timestamp>,
    },
    Stats(StatsRequest),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPayload {
    pub indicator: Indicator,
    pub component: String,
    pub as_of: Timestamp,
    pub points: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityPayload {
    pub release_id: String,
    pub counts: BTreeMap<Severity, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentPayload {
    pub release_id: String,
    pub counts: BTreeMap<DetectionEnvironment, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Releases(Vec<Release>),
    Indicators(IndicatorSet),
    Series(SeriesPayload),
    Weekly(Vec<WeeklyAnomalyReport>),
    Board(BoardReport),
    Distribution(AnomalyDistribution),
    Severity(SeverityPayload),
    Environment(EnvironmentPayload),
    Decay(DecayFit),
    Stats(StatResult),
}

pub fn parse_timestamp(s: &str) -> Result<Timestamp, ApiError> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(relquant_core::domain::start_of_day)
        .map_err(|_| ApiError::new(400, "BadTimestamp", format!("not an ISO-8601 date or timestamp: {s:?}")))
}

pub fn parse_week(s: &str) -> Result<IsoWeek, ApiError> {
    s.parse::<IsoWeek>()
        .map_err(|_| ApiError::new(400, "BadWeek", format!("not an ISO week like 1997-W12: {s:?}")))
}

pub fn format_timestamp(t: Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn production_release<'a>(snap: &'a Snapshot, id: &str) -> Result<&'a Release, ApiError> {
    match snap.full.releases.get(id) {
        None => Err(unknown_release(id)),
        Some(r) if !r.production => Err(DomainError::NotInProduction(id.to_string()).into()),
        Some(r) => Ok(r),
    }
}

fn stat_input(name: &str) -> Result<Option<Indicator>, ApiError> {
    if ATTRIBUTES.contains(&name) {
        return Ok(None);
    }
    name.parse::<Indicator>()
        .map(Some)
        .map_err(|_| ApiError::new(404, "UnknownIndicator", format!("unknown series {name:?}")))
}

/// Releases a statistics request draws from: production releases shipped
/// by `as_of`, in release order, narrowed by the filter.
fn stats_releases<'a>(
    snap: &'a Snapshot,
    filter: &StatsFilter,
    as_of: Timestamp,
) -> Result<Vec<&'a Release>, ApiError> {
    let data = &snap.production;
    let mut releases: Vec<&Release> = match &filter.component {
        Some(c) => {
            if !snap.full.releases.values().any(|r| &r.component == c) {
                return Err(IndicatorError::UnknownComponent(c.clone()).into());
            }
            data.release_sequence(c)
        }
        None => {
            let mut all: Vec<&Release> = data.releases.values().collect();
            all.sort_by(|a, b| {
                (a.released_at, &a.version, &a.id).cmp(&(b.released_at, &b.version, &b.id))
            });
            all
        }
    };
    if let Some(ids) = &filter.release_ids {
        for id in ids {
            production_release(snap, id)?;
        }
        releases.retain(|r| ids.contains(&r.id));
    }
    releases.retain(|r| r.released_start() <= as_of);
    Ok(releases)
}

fn stat_series(
    snap: &Snapshot,
    releases: &[&Release],
    name: &str,
    as_of: Timestamp,
) -> Result<Vec<Option<f64>>, ApiError> {
    let indicator = stat_input(name)?;
    let fp = FpParameters::default();
    releases
        .iter()
        .map(|r| {
            let anomalies = snap.production.anomalies_of(&r.id);
            let value = match indicator {
                Some(ind) => indicators::compute_indicator_set(r, anomalies, as_of, &fp)?
                    .get(ind)
                    .value(),
                None => {
                    let known: Vec<_> = anomalies.filter(|a| a.opened_at <= as_of).collect();
                    let failures = classify_failures(r, &known)?;
                    Some(match name {
                        "dev_effort_pd" => r.dev_effort,
                        "test_effort_pd" => r.test_effort,
                        "test_hours" => r.test_hours,
                        "life_hours" => relquant_core::domain::life_time(r, as_of)?,
                        "la" => failures.la as f64,
                        "ta" => failures.ta as f64,
                        _ => failures.tna as f64,
                    })
                }
            };
            Ok(value)
        })
        .collect()
}

fn run_stats(snap: &Snapshot, req: &StatsRequest) -> Result<StatResult, ApiError> {
    let op: StatOp = req.op.parse().map_err(ApiError::bad_query)?;
    let as_of = match &req.as_of {
        Some(s) => parse_timestamp(s)?,
        None => snap.loaded_at(),
    };
    stat_input(&req.x)?;
    if let Some(y) = &req.y {
        stat_input(y)?;
    }
    if op.needs_pair() && req.y.is_none() {
        return Err(ApiError::bad_query(format!("{} needs both x and y", req.op)));
    }
    let releases = stats_releases(snap, &req.filter, as_of)?;
    let x = stat_series(snap, &releases, &req.x, as_of)?;
    let mut inputs = vec![req.x.clone()];
    let y = if op.needs_pair() {
        let name = req.y.as_deref().unwrap_or_default();
        inputs.push(name.to_string());
        Some(stat_series(snap, &releases, name, as_of)?)
    } else {
        None
    };
    Ok(stats::evaluate(op, inputs, &x, y.as_deref())?)
}

pub fn execute(snap: &Snapshot, req: &Request) -> Result<Payload, ApiError> {
    let fp = FpParameters::default();
    let or_loaded = |t: &Option<Timestamp>| t.unwrap_or(snap.loaded_at());
    Ok(match req {
        Request::Releases {
            component,
            production_only,
        } => {
            let data = if *production_only { &snap.production } else { &snap.full };
            let mut list: Vec<Release> = data
                .releases
                .values()
                .filter(|r| component.as_ref().is_none_or(|c| &r.component == c))
                .cloned()
                .collect();
            list.sort_by(|a, b| {
                (&a.component, a.released_at, &a.version, &a.id)
                    .cmp(&(&b.component, b.released_at, &b.version, &b.id))
            });
            Payload::Releases(list)
        }
        Request::Indicators { release, as_of } => {
            let r = production_release(snap, release)?;
            let set = indicators::compute_indicator_set(
                r,
                snap.production.anomalies_of(release),
                or_loaded(as_of),
                &fp,
            )?;
            Payload::Indicators(set)
        }
        Request::Series {
            indicator,
            component,
            as_of,
        } => {
            let ind: Indicator = indicator
                .parse()
                .map_err(|_| ApiError::from(IndicatorError::UnknownIndicator(indicator.clone())))?;
            if !snap.full.releases.values().any(|r| &r.component == component) {
                return Err(IndicatorError::UnknownComponent(component.clone()).into());
            }
            let as_of = or_loaded(as_of);
            let points = indicators::indicator_series(&snap.production, component, ind, as_of, &fp)?;
            Payload::Series(SeriesPayload {
                indicator: ind,
                component: component.clone(),
                as_of,
                points,
            })
        }
        Request::Weekly { from, to, platform } => {
            let to = to.unwrap_or_else(|| IsoWeek::of(snap.loaded_at()));
            let from = from.unwrap_or_else(|| {
                snap.full
                    .anomalies
                    .values()
                    .map(|a| IsoWeek::of(a.opened_at))
                    .min()
                    .unwrap_or(to)
                    .min(to)
            });
            Payload::Weekly(report::weekly_trend(&snap.full, from, to, platform.as_deref())?)
        }
        Request::Board { as_of } => Payload::Board(report::board_report(&snap.full, or_loaded(as_of))),
        Request::Distribution { release, as_of } => Payload::Distribution(
            report::anomaly_distribution(&snap.full, release, or_loaded(as_of))?,
        ),
        Request::Severity { release } => Payload::Severity(SeverityPayload {
            release_id: release.clone(),
            counts: report::release_severity_breakdown(&snap.full, release)?,
        }),
        Request::Environment { release } => Payload::Environment(EnvironmentPayload {
            release_id: release.clone(),
            counts: report::environment_breakdown(&snap.full, release)?,
        }),
        Request::Decay { release, k, as_of } => {
            Payload::Decay(report::release_decay(&snap.full, release, or_loaded(as_of), *k)?)
        }
        Request::Stats(s) => Payload::Stats(run_stats(snap, s)?),
    })
}

#[derive(Serialize)]
struct Envelope<'a> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<&'a Payload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a ApiError>,
    generated_at: String,
}

/// Canonical wire form of an outcome. `generated_at` is the snapshot's
/// load instant, so equal queries on an unchanged store give equal bytes.
pub fn envelope(snap: &Snapshot, outcome: &Result<Payload, ApiError>) -> String {
    let (data, error) = match outcome {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e)),
    };
    let env = Envelope {
        status: if data.is_some() { "ok" } else { "error" },
        data,
        error,
        generated_at: format_timestamp(snap.loaded_at()),
    };
    serde_json::to_string(&env).expect("payloads serialize")
}

fn query_map(query: &str) -> BTreeMap<String, String> {
    url::form_urlencoded::parse(query.as_bytes())
        .into_owned()
        .collect()
}

struct Params(BTreeMap<String, String>);

impl Params {
    /// Non-empty value of `key`; an empty value counts as absent.
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn require(&self, key: &str) -> Result<&str, ApiError> {
        self.get(key)
            .ok_or_else(|| ApiError::bad_query(format!("missing query parameter {key:?}")))
    }

    fn timestamp(&self, key: &str) -> Result<Option<Timestamp>, ApiError> {
        self.get(key).map(parse_timestamp).transpose()
    }

    fn week(&self, key: &str) -> Result<Option<IsoWeek>, ApiError> {
        self.get(key).map(parse_week).transpose()
    }

    fn only(&self, allowed: &[&str]) -> Result<(), ApiError> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ApiError::bad_query(format!("unknown query parameter {k:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_bool(key: &str, value: Option<&str>, default: bool) -> Result<bool, ApiError> {
    match value {
        None => Ok(default),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(other) => Err(ApiError::bad_query(format!("{key} must be true or false, got {other:?}"))),
    }
}

/// Map an HTTP request line and body onto a [`Request`].
pub fn route(method: &str, path: &str, query: &str, body: &[u8]) -> Result<Request, ApiError> {
    let q = Params(query_map(query));
    let segments: Vec<&str> = path.trim_end_matches('/').split('/').skip(1).collect();
    let get_only = || {
        if method == "GET" {
            Ok(())
        } else {
            Err(ApiError::method_not_allowed(method))
        }
    };
    match segments.as_slice() {
        ["api", "stats"] => {
            if method != "POST" {
                return Err(ApiError::method_not_allowed(method));
            }
            let req: StatsRequest = serde_json::from_slice(body)
                .map_err(|e| ApiError::new(400, "BadBody", format!("invalid stats request: {e}")))?;
            Ok(Request::Stats(req))
        }
        ["api", "releases"] => {
            get_only()?;
            q.only(&["component", "production_only"])?;
            Ok(Request::Releases {
                component: q.get("component").map(str::to_string),
                production_only: parse_bool("production_only", q.get("production_only"), true)?,
            })
        }
        ["api", "releases", id, what] => {
            get_only()?;
            let release = id.to_string();
            match *what {
                "indicators" => {
                    q.only(&["as_of"])?;
                    Ok(Request::Indicators {
                        release,
                        as_of: q.timestamp("as_of")?,
                    })
                }
                "distribution" => {
                    q.only(&["as_of"])?;
                    Ok(Request::Distribution {
                        release,
                        as_of: q.timestamp("as_of")?,
                    })
                }
                "severity" => {
                    q.only(&[])?;
                    Ok(Request::Severity { release })
                }
                "environment" => {
                    q.only(&[])?;
                    Ok(Request::Environment { release })
                }
                "decay" => {
                    q.only(&["k", "as_of"])?;
                    let k = match q.get("k") {
                        None => report::DEFAULT_DEVIATION_K,
                        Some(s) => s
                            .parse::<f64>()
                            .map_err(|_| ApiError::new(400, "InvalidParameter", format!("k is not a number: {s:?}")))?,
                    };
                    Ok(Request::Decay {
                        release,
                        k,
                        as_of: q.timestamp("as_of")?,
                    })
                }
                _ => Err(ApiError::not_found(path)),
            }
        }
        ["api", "series"] => {
            get_only()?;
            q.only(&["indicator", "component", "as_of"])?;
            Ok(Request::Series {
                indicator: q.require("indicator")?.to_string(),
                component: q.require("component")?.to_string(),
                as_of: q.timestamp("as_of")?,
            })
        }
        ["api", "weekly"] => {
            get_only()?;
            q.only(&["from", "to", "platform"])?;
            Ok(Request::Weekly {
                from: q.week("from")?,
                to: q.week("to")?,
                platform: q.get("platform").map(str::to_string),
            })
        }
        ["api", "board"] => {
            get_only()?;
            q.only(&["as_of"])?;
            Ok(Request::Board {
                as_of: q.timestamp("as_of")?,
            })
        }
        _ => Err(ApiError::not_found(path)),
    }
}

/// Status code and envelope body for one HTTP request.
pub fn handle(snap: &Snapshot, method: &str, path: &str, query: &str, body: &[u8]) -> (u16, String) {
    let outcome = route(method, path, query, body).and_then(|req| execute(snap, &req));
    let status = match &outcome {
        Ok(_) => 200,
        Err(e) => e.status,
    };
    (status, envelope(snap, &outcome))
}
