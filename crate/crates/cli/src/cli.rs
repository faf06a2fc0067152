//! Command line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use relquant_core::ingest;
use relquant_core::report::{self, text};
use relquant_core::{IsoWeek, Timestamp};

use crate::api::{self, ApiError, Payload, Request, Snapshot, StatsFilter, StatsRequest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "relquant", version, about = "Release quality indicators and anomaly reports")]
pub struct Cli {
    /// Store directory holding releases.csv and anomalies.csv
    #[arg(long, global = true, env = "RELQUANT_STORE")]
    pub store: Option<PathBuf>,
    /// Print the JSON envelope served by the HTTP API instead of a table
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate two CSV files and save them as a store
    Ingest {
        #[arg(long)]
        releases: PathBuf,
        #[arg(long)]
        anomalies: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List releases
    Releases {
        #[arg(long)]
        component: Option<String>,
        /// Include non-production releases
        #[arg(long)]
        all: bool,
    },
    /// Indicator set of one production release
    Indicators {
        #[arg(long)]
        release: String,
        #[arg(long, value_parser = parse_ts)]
        as_of: Option<Timestamp>,
    },
    /// One indicator across the releases of a component
    Series {
        #[arg(long)]
        indicator: String,
        #[arg(long)]
        component: String,
        #[arg(long, value_parser = parse_ts)]
        as_of: Option<Timestamp>,
    },
    /// Weekly trend and board reports
    #[command(subcommand)]
    Report(ReportCommand),
    /// New, inherited and solved anomalies of a release with breakdowns
    Distribution {
        #[arg(long)]
        release: String,
        #[arg(long, value_parser = parse_ts)]
        as_of: Option<Timestamp>,
    },
    /// Post-release decay fit and flagged weeks
    Decay {
        #[arg(long)]
        release: String,
        #[arg(long, default_value_t = report::DEFAULT_DEVIATION_K)]
        k: f64,
        #[arg(long, value_parser = parse_ts)]
        as_of: Option<Timestamp>,
    },
    /// Statistics over indicator or attribute series
    Stats {
        #[arg(value_parser = ["mean", "stddev", "corr", "reg"])]
        op: String,
        #[command(flatten)]
        input: StatsArgs,
    },
    /// Serve the HTTP scoreboard; SIGHUP reloads the store
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Write the store back out as CSV files
    Export {
        #[arg(long)]
        out: PathBuf,
        /// Drop non-production releases and their anomalies
        #[arg(long)]
        production_only: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    Weekly {
        #[arg(long, value_parser = parse_wk)]
        from: Option<IsoWeek>,
        #[arg(long, value_parser = parse_wk)]
        to: Option<IsoWeek>,
        #[arg(long)]
        platform: Option<String>,
    },
    Board {
        #[arg(long, value_parser = parse_ts)]
        as_of: Option<Timestamp>,
    },
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long)]
    pub component: Option<String>,
    /// Comma separated release ids
    #[arg(long, value_delimiter = ',')]
    pub releases: Option<Vec<String>>,
    #[arg(long)]
    pub as_of: Option<String>,
}

fn parse_ts(s: &str) -> Result<Timestamp, String> {
    api::parse_timestamp(s).map_err(|e| e.message)
}

fn parse_wk(s: &str) -> Result<IsoWeek, String> {
    api::parse_week(s).map_err(|e| e.message)
}

#[derive(Debug)]
enum Failure {
    Api(ApiError),
    Other(String),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Api(e)
    }
}

impl From<ingest::IngestError> for Failure {
    fn from(e: ingest::IngestError) -> Self {
        Failure::Other(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load_store(store: Option<&Path>) -> Result<Snapshot, Failure> {
    let dir = store.ok_or_else(|| {
        Failure::Other("no store given: pass --store or set RELQUANT_STORE".to_string())
    })?;
    Ok(Snapshot::new(ingest::load(dir)?))
}

/// The request a read-only subcommand stands for.
fn request_of(command: &Command) -> Option<Request> {
    Some(match command {
        Command::Releases { component, all } => Request::Releases {
            component: component.clone(),
            production_only: !all,
        },
        Command::Indicators { release, as_of } => Request::Indicators {
            release: release.clone(),
            as_of: *as_of,
        },
        Command::Series {
            indicator,
            component,
            as_of,
        } => Request::Series {
            indicator: indicator.clone(),
            component: component.clone(),
            as_of: *as_of,
        },
        Command::Report(ReportCommand::Weekly { from, to, platform }) => Request::Weekly {
            from: *from,
            to: *to,
            platform: platform.clone(),
        },
        Command::Report(ReportCommand::Board { as_of }) => Request::Board { as_of: *as_of },
        Command::Distribution { release, as_of } => Request::Distribution {
            release: release.clone(),
            as_of: *as_of,
        },
        Command::Decay { release, k, as_of } => Request::Decay {
            release: release.clone(),
            k: *k,
            as_of: *as_of,
        },
        Command::Stats { op, input } => Request::Stats(StatsRequest {
            op: op.clone(),
            x: input.x.clone(),
            y: input.y.clone(),
            filter: StatsFilter {
                component: input.component.clone(),
                release_ids: input.releases.clone(),
            },
            as_of: input.as_of.clone(),
        }),
        Command::Ingest { .. } | Command::Serve { .. } | Command::Export { .. } => return None,
    })
}

fn releases_table(list: &[relquant_core::Release]) -> String {
    let rows: Vec<Vec<String>> = list
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                r.component.clone(),
                r.version.clone(),
                r.released_at.to_string(),
                if r.production { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    text::table(&["release", "component", "version", "released", "production"], &rows)
}

fn render(snap: &Snapshot, payload: &Payload) -> Result<String, Failure> {
    Ok(match payload {
        Payload::Releases(list) => releases_table(list),
        Payload::Indicators(set) => text::indicator_set(set),
        Payload::Series(s) => text::series(s.indicator, &s.points),
        Payload::Weekly(w) => text::weekly(w),
        Payload::Board(b) => text::board(b),
        Payload::Distribution(d) => {
            let release = d.release_id.clone();
            let severity = match api::execute(snap, &Request::Severity { release: release.clone() })? {
                Payload::Severity(s) => s.counts,
                _ => unreachable!(),
            };
            let environment = match api::execute(snap, &Request::Environment { release })? {
                Payload::Environment(e) => e.counts,
                _ => unreachable!(),
            };
            text::distribution(d, &severity, &environment)
        }
        Payload::Severity(s) => text::table(
            &["severity", "count"],
            &s.counts.iter().rev().map(|(k, v)| vec![k.to_string(), v.to_string()]).collect::<Vec<_>>(),
        ),
        Payload::Environment(e) => text::table(
            &["environment", "count"],
            &e.counts.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]).collect::<Vec<_>>(),
        ),
        Payload::Decay(fit) => text::decay(fit),
        Payload::Stats(s) => text::stat(s),
    })
}

fn run_command(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Ingest {
            releases,
            anomalies,
            out: dir,
        } => {
            let data = ingest::load_files(releases, anomalies)?;
            ingest::save(&data, dir)?;
            let production = data.releases.values().filter(|r| r.production).count();
            writeln!(
                out,
                "stored {} releases ({} in production) and {} anomalies in {}",
                data.releases.len(),
                production,
                data.anomalies.len(),
                dir.display()
            )?;
            Ok(EXIT_OK)
        }
        Command::Export {
            out: dir,
            production_only,
        } => {
            let snap = load_store(cli.store.as_deref())?;
            let data = if *production_only { &snap.production } else { &snap.full };
            ingest::save(data, dir)?;
            writeln!(
                out,
                "exported {} releases and {} anomalies to {}",
                data.releases.len(),
                data.anomalies.len(),
                dir.display()
            )?;
            Ok(EXIT_OK)
        }
        Command::Serve { port, bind } => {
            let dir = cli.store.clone().ok_or_else(|| {
                Failure::Other("no store given: pass --store or set RELQUANT_STORE".to_string())
            })?;
            let snap = load_store(Some(&dir))?;
            let addr = format!("{bind}:{port}");
            crate::server::serve_blocking(snap, dir, &addr)?;
            Ok(EXIT_OK)
        }
        command => {
            let req = request_of(command).expect("read-only command");
            let snap = load_store(cli.store.as_deref())?;
            let outcome = api::execute(&snap, &req);
            if cli.json {
                writeln!(out, "{}", api::envelope(&snap, &outcome))?;
                return Ok(if outcome.is_ok() { EXIT_OK } else { EXIT_DOMAIN });
            }
            let payload = outcome?;
            write!(out, "{}", render(&snap, &payload)?)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match run_command(&cli, out) {
        Ok(code) => code,
        Err(Failure::Api(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
        Err(Failure::Other(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DOMAIN
        }
    }
}
