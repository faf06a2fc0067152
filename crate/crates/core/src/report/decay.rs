//! Post-release anomaly decay: fit `N(t) = c + a·exp(-b·t)` to the weekly
//! counts of new anomalies and flag weeks that stray above the curve.

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::domain::Timestamp;
use crate::ingest::Dataset;
use crate::week::IsoWeek;

pub const DEFAULT_DEVIATION_K: f64 = 2.0;

const MIN_POINTS: usize = 4;
const MAX_ITERATIONS: usize = 500;
const STARTS: usize = 4;

/// Fitted parameters, all non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    /// Floor the trend decays towards (anomalies/week).
    pub c: f64,
    /// Initial excess over the floor (anomalies/week).
    pub a: f64,
    /// Decay rate (per week).
    pub b: f64,
    pub rmse: f64,
}

impl DecayModel {
    pub fn predict(&self, t: f64) -> f64 {
        self.c + self.a * (-self.b * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub week: Option<IsoWeek>,
    pub observed: f64,
    pub predicted: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub release_id: String,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub rmse: f64,
    pub k: f64,
    pub deviations: Vec<Deviation>,
}

fn sse(points: &[(f64, f64)], p: [f64; 3]) -> f64 {
    points
        .iter()
        .map(|&(t, y)| {
            let r = y - (p[0] + p[1] * (-p[2] * t).exp());
            r * r
        })
        .sum()
}

/// Best non-negative (c, a) for a fixed rate.
fn linear_start(points: &[(f64, f64)], b: f64) -> [f64; 3] {
    let n = points.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in points {
        let e = (-b * t).exp();
        se += e;
        see += e * e;
        sy += y;
        sey += e * y;
    }
    let det = n * see - se * se;
    let (mut c, mut a) = if det.abs() > 1e-12 * n * see {
        ((see * sy - se * sey) / det, (n * sey - se * sy) / det)
    } else {
        (sy / n, 0.0)
    };
    if a < 0.0 {
        a = 0.0;
        c = sy / n;
    }
    if c < 0.0 {
        c = 0.0;
        a = if see > 0.0 { (sey / see).max(0.0) } else { 0.0 };
    }
    [c.max(0.0), a, b]
}

fn solve3(m: [[f64; 3]; 3], v: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = v[row];
        }
        *slot = det(&mc) / d;
    }
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Damped Gauss-Newton from `start`, projected onto the non-negative orthant.
fn refine(points: &[(f64, f64)], start: [f64; 3]) -> ([f64; 3], f64) {
    let mut p = start;
    let mut cost = sse(points, p);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(t, y) in points {
            let e = (-p[2] * t).exp();
            let r = y - (p[0] + p[1] * e);
            let j = [1.0, e, -p[1] * t * e];
            for row in 0..3 {
                jtr[row] += j[row] * r;
                for col in 0..3 {
                    jtj[row][col] += j[row] * j[col];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve3(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = [
                (p[0] + step[0]).max(0.0),
                (p[1] + step[1]).max(0.0),
                (p[2] + step[2]).max(0.0),
            ];
            let next = sse(points, candidate);
            if next.is_finite() && next < cost {
                let gain = cost - next;
                p = candidate;
                cost = next;
                lambda = (lambda / 10.0).max(1e-12);
                improved = gain > 1e-15 * cost.max(1e-300);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost)
}

/// Least-squares fit over `(t, count)` points, t = 0, 1, 2, ... weeks since
/// release.
pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayModel, ReportError> {
    if points.len() < MIN_POINTS {
        return Err(ReportError::TooFewPoints {
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    if points.iter().any(|&(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(ReportError::InvalidParameter(
            "decay points must be finite".into(),
        ));
    }

    // Coarse log-spaced grid over the rate; (c, a) solved exactly per rate.
    let mut starts: Vec<([f64; 3], f64)> = (0..=48)
        .map(|i| 0.005 * 10f64.powf(i as f64 / 16.0))
        .map(|b| {
            let p = linear_start(points, b);
            (p, sse(points, p))
        })
        .collect();
    starts.sort_by(|x, y| x.1.total_cmp(&y.1));

    let best = starts
        .iter()
        .take(STARTS)
        .map(|(p, _)| refine(points, *p))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .filter(|(p, cost)| cost.is_finite() && p.iter().all(|v| v.is_finite()))
        .ok_or(ReportError::FitDiverged)?;

    let ([c, a, b], cost) = best;
    Ok(DecayModel {
        c,
        a,
        b,
        rmse: (cost / points.len() as f64).sqrt(),
    })
}

/// Compare observations with the fitted curve. A week is flagged when it
/// exceeds the prediction by more than `k` RMSE, or when any later week
/// exceeds the initial peak.
pub fn detect_deviation(model: &DecayModel, points: &[(f64, f64)], k: f64) -> Vec<Deviation> {
    let peak = points
        .iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|&(t, y)| (t, y));
    points
        .iter()
        .map(|&(t, observed)| {
            let predicted = model.predict(t);
            let slack = 1e-9 * predicted.abs().max(1.0);
            let above_curve = observed > predicted + k * model.rmse + slack;
            let above_peak = peak.is_some_and(|(t0, y0)| t > t0 && observed > y0);
            Deviation {
                t,
                week: None,
                observed,
                predicted,
                flagged: above_curve || above_peak,
            }
        })
        .collect()
}

/// Weekly counts of new anomalies detected in a release, from its release
/// week through the week containing `as_of`. Anomalies opened before the
/// release week are not part of the post-release trend.
pub fn decay_series(
    dataset: &Dataset,
    release_id: &str,
    as_of: Timestamp,
) -> Result<Vec<(IsoWeek, f64)>, ReportError> {
    let release = dataset
        .releases
        .get(release_id)
        .ok_or_else(|| ReportError::UnknownRelease(release_id.to_string()))?;
    let first = IsoWeek::of_date(release.released_at);
    let last = IsoWeek::of(as_of);
    if last < first {
        return Ok(Vec::new());
    }
    let mut counts: Vec<(IsoWeek, f64)> = IsoWeek::range(first, last).map(|w| (w, 0.0)).collect();
    for a in dataset.anomalies_of(release_id) {
        if a.opened_at < first.start() || a.opened_at > as_of {
            continue;
        }
        let idx = first.weeks_until(IsoWeek::of(a.opened_at)) as usize;
        counts[idx].1 += 1.0;
    }
    Ok(counts)
}

pub fn release_decay(
    dataset: &Dataset,
    release_id: &str,
    as_of: Timestamp,
    k: f64,
) -> Result<DecayFit, ReportError> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(ReportError::InvalidParameter(format!(
            "k must be a non-negative number, got {k}"
        )));
    }
    let series = decay_series(dataset, release_id, as_of)?;
    let points: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .map(|(t, (_, n))| (t as f64, *n))
        .collect();
    let model = fit_decay(&points)?;
    let deviations = detect_deviation(&model, &points, k)
        .into_iter()
        .zip(&series)
        .map(|(d, (week, _))| Deviation {
            week: Some(*week),
            ..d
        })
        .collect();
    Ok(DecayFit {
        release_id: release_id.to_string(),
        c: model.c,
        a: model.a,
        b: model.b,
        rmse: model.rmse,
        k,
        deviations,
    })
}
