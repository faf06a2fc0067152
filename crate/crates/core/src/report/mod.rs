//! Board-of-Anomalies reports, anomaly distributions and the post-release
//! decay trend.

mod board;
mod decay;
mod distribution;
pub mod text;
mod weekly;

pub use board::{board_report, BoardEntry, BoardReport, BOARD_WINDOW_DAYS};
pub use decay::{
    decay_series, detect_deviation, fit_decay, release_decay, DecayFit, DecayModel, Deviation,
    DEFAULT_DEVIATION_K,
};
pub use distribution::{
    anomaly_distribution, environment_breakdown, release_severity_breakdown, severity_breakdown,
    AnomalyDistribution,
};
pub use weekly::{weekly_trend, WeekCounts, WeeklyAnomalyReport};

use thiserror::Error;

use crate::domain::DomainError;
use crate::week::IsoWeek;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("bad range: {from} is after {to}")]
    BadRange { from: IsoWeek, to: IsoWeek },
    #[error("unknown release {0:?}")]
    UnknownRelease(String),
    #[error("need at least {needed} weekly points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("decay fit did not converge")]
    FitDiverged,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn check_range(from: IsoWeek, to: IsoWeek) -> Result<(), ReportError> {
    if from > to {
        Err(ReportError::BadRange { from, to })
    } else {
        Ok(())
    }
}
