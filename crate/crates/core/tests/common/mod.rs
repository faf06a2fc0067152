//! Test support shared by the integration and acceptance suites: the
//! committed fixture, random dataset generators and independent oracles.
//! Nothing here calls the implementation paths it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relquant_core::domain::{PhaseSpan, SizeDelta};
use relquant_core::ingest::{self, Dataset};
use relquant_core::{Anomaly, DetectionEnvironment, Release, Severity};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("..")
        .join("core")
        .join("tests")
        .join("fixtures")
}

pub fn fixture() -> Dataset {
    ingest::load(&fixture_dir()).expect("fixture loads")
}

pub fn ts(s: &str) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
}

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// One golden entry: a number, or a not-applicable reason.
#[derive(Debug, Clone, PartialEq)]
pub enum Golden {
    Value(f64),
    Na(String),
}

pub struct GoldenCase {
    pub release: String,
    pub as_of: DateTime<Utc>,
    pub expected: BTreeMap<String, Golden>,
}

pub fn golden_cases() -> Vec<GoldenCase> {
    let text = std::fs::read_to_string(fixture_dir().join("golden_indicators.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["cases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|case| {
            let expected = case["expected"]
                .as_object()
                .unwrap()
                .iter()
                .map(|(k, v)| {
                    let g = match v.get("na") {
                        Some(reason) => Golden::Na(reason.as_str().unwrap().to_string()),
                        None => Golden::Value(v.as_f64().unwrap()),
                    };
                    (k.clone(), g)
                })
                .collect();
            GoldenCase {
                release: case["release"].as_str().unwrap().to_string(),
                as_of: ts(case["as_of"].as_str().unwrap()),
                expected,
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const COMPONENTS: [&str; 3] = ["MTP", "EAS", "GW"];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.gen_range(0..items.len())]
}

/// A random valid dataset: releases spread over ~30 weeks starting at
/// `base`, anomalies attached to random releases.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_releases: usize, max_anomalies: usize) -> Dataset {
    let base = date("1997-01-06");
    let horizon_days = 30 * 7;
    let n_rel = rng.gen_range(1..=max_releases);
    let mut releases = Vec::new();
    for i in 0..n_rel {
        let released = base + Duration::days(rng.gen_range(0..horizon_days));
        let dev_start = released - Duration::days(rng.gen_range(30..120));
        let dev_end = dev_start + Duration::days(rng.gen_range(0..60));
        let test_start = released - Duration::days(rng.gen_range(5..40));
        let test_end = test_start + Duration::days(rng.gen_range(0..30));
        let life_end = if rng.gen_bool(0.4) {
            Some(released + Duration::days(rng.gen_range(0..120)))
        } else {
            None
        };
        releases.push(Release {
            id: format!("R{i:03}"),
            component: pick(rng, &COMPONENTS).to_string(),
            version: format!("{}.{}", rng.gen_range(1..4), rng.gen_range(0..10)),
            released_at: released,
            production: rng.gen_bool(0.8),
            phases: PhaseSpan {
                dev_start,
                dev_end,
                test_start,
                test_end,
            },
            life_end,
            test_hours: if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(0..2000) as f64 / 4.0
            },
            size: SizeDelta {
                new_lines: rng.gen_range(0..20_000),
                changed_lines: rng.gen_range(0..20_000),
                deleted_lines: rng.gen_range(0..5_000),
                total_product_loc: rng.gen_range(1..2_000_000),
            },
            dev_effort: rng.gen_range(0..4000) as f64 / 8.0,
            test_effort: rng.gen_range(0..4000) as f64 / 8.0,
        });
    }
    let n_an = rng.gen_range(0..=max_anomalies);
    let start = ts("1996-12-02T00:00:00Z");
    let span_secs = (horizon_days + 60) * 86_400;
    let mut anomalies = Vec::new();
    for i in 0..n_an {
        let release: &Release = &releases[rng.gen_range(0..releases.len())];
        let opened = start + Duration::seconds(rng.gen_range(0..span_secs));
        let closed = if rng.gen_bool(0.7) {
            Some(opened + Duration::seconds(rng.gen_range(0..60 * 86_400)))
        } else {
            None
        };
        anomalies.push(Anomaly {
            id: format!("A{i:04}"),
            // mostly the release's platform, sometimes another one
            component: if rng.gen_bool(0.9) {
                release.component.clone()
            } else {
                pick(rng, &COMPONENTS).to_string()
            },
            release_id: release.id.clone(),
            severity: pick(rng, &Severity::ALL),
            environment: pick(rng, &DetectionEnvironment::ALL),
            opened_at: opened,
            closed_at: closed,
            title: format!("anomaly {i}"),
        });
    }
    Dataset::new(releases, anomalies).expect("generated dataset is valid")
}

// ---------------------------------------------------------------------------
// Weekly oracle: walk every calendar day of every week and recount.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteWeek {
    pub label: String,
    pub opened: u64,
    pub closed: u64,
    pub backlog: u64,
    pub by_severity: BTreeMap<Severity, u64>,
}

fn monday_of(year: i32, week: u32) -> NaiveDate {
    NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).unwrap()
}

/// Per-week counts for weeks `from..=to`, for the anomalies passing `keep`.
pub fn brute_weekly(
    anomalies: &[&Anomaly],
    from: (i32, u32),
    to: (i32, u32),
) -> Vec<BruteWeek> {
    let first = monday_of(from.0, from.1);
    let last = monday_of(to.0, to.1);
    let mut out = Vec::new();
    let mut monday = first;
    while monday <= last {
        let days: Vec<NaiveDate> = (0..7).map(|d| monday + Duration::days(d)).collect();
        let sunday = days[6];
        let mut w = BruteWeek {
            label: {
                let iw = monday.iso_week();
                format!("{:04}-W{:02}", iw.year(), iw.week())
            },
            opened: 0,
            closed: 0,
            backlog: 0,
            by_severity: BTreeMap::new(),
        };
        for day in &days {
            for a in anomalies {
                if a.opened_at.date_naive() == *day {
                    w.opened += 1;
                    *w.by_severity.entry(a.severity).or_default() += 1;
                }
                if a.closed_at.map(|c| c.date_naive()) == Some(*day) {
                    w.closed += 1;
                }
            }
        }
        for a in anomalies {
            let opened_by_end = a.opened_at.date_naive() <= sunday;
            let closed_by_end = a.closed_at.is_some_and(|c| c.date_naive() <= sunday);
            if opened_by_end && !closed_by_end {
                w.backlog += 1;
            }
        }
        out.push(w);
        monday += Duration::days(7);
    }
    out
}

// ---------------------------------------------------------------------------
// Distribution oracle: exhaustive scan with plain date comparisons.

pub fn brute_distribution(d: &Dataset, release_id: &str, as_of: DateTime<Utc>) -> (u64, u64, u64) {
    let release = &d.releases[release_id];
    let shipped = release.released_at.and_hms_opt(0, 0, 0).unwrap().and_utc();
    let mut same: Vec<&Release> = d
        .releases
        .values()
        .filter(|r| r.component == release.component)
        .collect();
    same.sort_by(|a, b| {
        (a.released_at, &a.version, &a.id).cmp(&(b.released_at, &b.version, &b.id))
    });
    let pos = same.iter().position(|r| r.id == release_id).unwrap();
    let mut end = as_of;
    if let Some(next) = same.get(pos + 1) {
        let next_start = next.released_at.and_hms_opt(0, 0, 0).unwrap().and_utc();
        if next_start < end {
            end = next_start;
        }
    }
    let (mut new, mut inherited, mut solved) = (0, 0, 0);
    for a in d.anomalies.values() {
        let mine = a.release_id == release_id;
        let carried = !mine
            && a.component == release.component
            && a.opened_at < shipped
            && match a.closed_at {
                None => true,
                Some(c) => c > shipped,
            };
        if mine {
            new += 1;
        }
        if carried {
            inherited += 1;
        }
        if mine || carried {
            if let Some(c) = a.closed_at {
                if shipped <= c && c < end {
                    solved += 1;
                }
            }
        }
    }
    (new, inherited, solved)
}

// ---------------------------------------------------------------------------
// Statistics oracle: closed-form normal equations from raw sums.

pub struct NormalEq {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
}

pub fn normal_equations(x: &[f64], y: &[f64]) -> NormalEq {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let num = n * sxy - sx * sy;
    let den_x = n * sxx - sx * sx;
    let den_y = n * syy - sy * sy;
    let slope = num / den_x;
    NormalEq {
        slope,
        intercept: (sy - slope * sx) / n,
        r: num / (den_x * den_y).sqrt(),
    }
}

// ---------------------------------------------------------------------------
// Decay oracle: coarse grid search over (c, a, b).

pub fn decay_points(c: f64, a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|t| (t as f64, c + a * (-b * t as f64).exp()))
        .collect()
}

pub fn sse(points: &[(f64, f64)], c: f64, a: f64, b: f64) -> f64 {
    points
        .iter()
        .map(|&(t, y)| (y - c - a * (-b * t).exp()).powi(2))
        .sum()
}

/// Best (c, a, b, sse) on a regular grid around the data's range.
pub fn grid_search(points: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let ymax = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let steps = 40;
    let mut best = (0.0, 0.0, 0.0, f64::INFINITY);
    for ci in 0..=steps {
        let c = ymax * ci as f64 / steps as f64;
        for ai in 0..=steps {
            let a = 1.2 * ymax * ai as f64 / steps as f64;
            for bi in 1..=steps {
                let b = 1.2 * bi as f64 / steps as f64;
                let e = sse(points, c, a, b);
                if e < best.3 {
                    best = (c, a, b, e);
                }
            }
        }
    }
    best
}
