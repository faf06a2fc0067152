//! Command line tool and read-only HTTP scoreboard over a release and
//! anomaly store.

pub mod api;
pub mod cli;
pub mod server;
