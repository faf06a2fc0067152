//! Release quality analytics: ingest release and anomaly records, compute
//! reliability and process indicators per release, and build the weekly
//! anomaly reports, distributions and decay trends used by the scoreboard.

pub mod domain;
pub mod indicators;
pub mod ingest;
pub mod report;
pub mod stats;
pub mod week;

pub use domain::{Anomaly, DetectionEnvironment, FailureCounts, Release, Severity, Timestamp};
pub use indicators::{FpParameters, Indicator, IndicatorSet, IndicatorValue, NaReason};
pub use ingest::{Dataset, IngestError, SnapshotStore};
pub use week::IsoWeek;
