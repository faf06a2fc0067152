//! On-demand statistics over indicator or release-attribute series: mean,
//! sample standard deviation, Pearson correlation and least-squares
//! regression. Missing (not-applicable) entries are skipped, pairwise for
//! the two-series operations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("series is constant")]
    ConstantSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatOp {
    Mean,
    Stddev,
    Correlation,
    Regression,
}

impl StatOp {
    pub fn needs_pair(self) -> bool {
        matches!(self, StatOp::Correlation | StatOp::Regression)
    }
}

impl std::str::FromStr for StatOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(StatOp::Mean),
            "stddev" => Ok(StatOp::Stddev),
            "correlation" | "corr" => Ok(StatOp::Correlation),
            "regression" | "reg" => Ok(StatOp::Regression),
            other => Err(format!("unknown statistic {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatValues {
    Mean { mean: f64 },
    Stddev { stddev: f64 },
    Correlation { r: f64 },
    Regression { slope: f64, intercept: f64, r_squared: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub operation: StatOp,
    pub inputs: Vec<String>,
    pub values: StatValues,
    pub n: usize,
}

fn present(series: &[Option<f64>]) -> Vec<f64> {
    series.iter().flatten().copied().collect()
}

fn pairs(x: &[Option<f64>], y: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip()
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn avg(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn mean(series: &[Option<f64>]) -> Result<(f64, usize), StatsError> {
    let values = present(series);
    if values.is_empty() {
        return Err(StatsError::TooFewPoints { needed: 1, got: 0 });
    }
    Ok((avg(&values), values.len()))
}

/// Sample standard deviation (n - 1 divisor).
pub fn stddev(series: &[Option<f64>]) -> Result<(f64, usize), StatsError> {
    let values = present(series);
    if values.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: values.len(),
        });
    }
    if is_constant(&values) {
        return Err(StatsError::ConstantSeries);
    }
    let m = avg(&values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(((ss / (values.len() - 1) as f64).sqrt(), values.len()))
}

struct Moments {
    mx: f64,
    my: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn moments(x: &[f64], y: &[f64]) -> Moments {
    let mx = avg(x);
    let my = avg(y);
    let mut m = Moments {
        mx,
        my,
        sxx: 0.0,
        syy: 0.0,
        sxy: 0.0,
    };
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    m
}

fn paired(x: &[Option<f64>], y: &[Option<f64>]) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    let (xs, ys) = pairs(x, y);
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    Ok((xs, ys))
}

pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Result<(f64, usize), StatsError> {
    let (xs, ys) = paired(x, y)?;
    if is_constant(&xs) || is_constant(&ys) {
        return Err(StatsError::ConstantSeries);
    }
    let m = moments(&xs, &ys);
    let r = m.sxy / (m.sxx * m.syy).sqrt();
    Ok((r.clamp(-1.0, 1.0), xs.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares of y on x. A constant y is fitted exactly
/// (slope 0, r² = 1).
pub fn linreg(x: &[Option<f64>], y: &[Option<f64>]) -> Result<LinearFit, StatsError> {
    let (xs, ys) = paired(x, y)?;
    if is_constant(&xs) {
        return Err(StatsError::ConstantSeries);
    }
    let n = xs.len();
    if is_constant(&ys) {
        return Ok(LinearFit {
            slope: 0.0,
            intercept: ys[0],
            r_squared: 1.0,
            n,
        });
    }
    let m = moments(&xs, &ys);
    let slope = m.sxy / m.sxx;
    let r_squared = ((m.sxy / m.sxx) * (m.sxy / m.syy)).clamp(0.0, 1.0);
    Ok(LinearFit {
        slope,
        intercept: m.my - slope * m.mx,
        r_squared,
        n,
    })
}

/// Run `op` and package the result with its input descriptors.
pub fn evaluate(
    op: StatOp,
    inputs: Vec<String>,
    x: &[Option<f64>],
    y: Option<&[Option<f64>]>,
) -> Result<StatResult, StatsError> {
    let (values, n) = match (op, y) {
        (StatOp::Mean, _) => {
            let (mean, n) = mean(x)?;
            (StatValues::Mean { mean }, n)
        }
        (StatOp::Stddev, _) => {
            let (stddev, n) = stddev(x)?;
            (StatValues::Stddev { stddev }, n)
        }
        (StatOp::Correlation, Some(y)) => {
            let (r, n) = pearson(x, y)?;
            (StatValues::Correlation { r }, n)
        }
        (StatOp::Regression, Some(y)) => {
            let fit = linreg(x, y)?;
            (
                StatValues::Regression {
                    slope: fit.slope,
                    intercept: fit.intercept,
                    r_squared: fit.r_squared,
                },
                fit.n,
            )
        }
        (_, None) => return Err(StatsError::TooFewPoints { needed: 2, got: 0 }),
    };
    Ok(StatResult {
        operation: op,
        inputs,
        values,
        n,
    })
}
