//! Semicolon-delimited release/anomaly files, the in-memory dataset built
//! from them, and the snapshot store readers query.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{NaiveDate, NaiveDateTime};
use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    start_of_day, Anomaly, DetectionEnvironment, DomainError, PhaseSpan, Release, Severity,
    SizeDelta, Timestamp,
};

pub const SEPARATOR: char = ';';

pub const RELEASES_HEADER: &str = "release_id;component;version;released_at;production;dev_start;dev_end;test_start;test_end;life_end;test_hours;new_lines;changed_lines;deleted_lines;total_product_loc;dev_effort_pd;test_effort_pd";

pub const ANOMALIES_HEADER: &str =
    "anomaly_id;component;release_id;severity;environment;opened_at;closed_at;title";

pub const RELEASES_FILE: &str = "releases.csv";
pub const ANOMALIES_FILE: &str = "anomalies.csv";

const DATE_FORMAT: &str = "%Y-%m-%d";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: header does not match the expected schema")]
    HeaderMismatch { file: &'static str },
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: field {field}: bad date {value:?}")]
    BadDate {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: field {field}: bad number {value:?}")]
    BadNumber {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: field {field}: unknown value {value:?}")]
    BadEnum {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: field {field}: {reason}")]
    BadField {
        row: usize,
        field: &'static str,
        reason: String,
    },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("row {row}: {source}")]
    Invalid { row: usize, source: DomainError },
    #[error("anomaly {anomaly_id} references unknown release {release_id}")]
    Integrity {
        anomaly_id: String,
        release_id: String,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl IngestError {
    fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub releases: BTreeMap<String, Release>,
    pub anomalies: BTreeMap<String, Anomaly>,
    /// Data horizon: the latest instant recorded anywhere in the data.
    pub loaded_at: Timestamp,
}

impl Dataset {
    /// Assemble a dataset, checking ids, per-record invariants and that every
    /// anomaly points at a known release.
    pub fn new(releases: Vec<Release>, anomalies: Vec<Anomaly>) -> Result<Self, IngestError> {
        let mut release_map = BTreeMap::new();
        for release in releases {
            check_release_text(&release)?;
            release
                .validate()
                .map_err(|source| IngestError::Invalid { row: 0, source })?;
            if release_map.contains_key(&release.id) {
                return Err(IngestError::DuplicateId(release.id));
            }
            release_map.insert(release.id.clone(), release);
        }
        let mut anomaly_map = BTreeMap::new();
        for anomaly in anomalies {
            check_anomaly_text(&anomaly)?;
            anomaly
                .validate()
                .map_err(|source| IngestError::Invalid { row: 0, source })?;
            if !release_map.contains_key(&anomaly.release_id) {
                return Err(IngestError::Integrity {
                    anomaly_id: anomaly.id,
                    release_id: anomaly.release_id,
                });
            }
            if anomaly_map.contains_key(&anomaly.id) {
                return Err(IngestError::DuplicateId(anomaly.id));
            }
            anomaly_map.insert(anomaly.id.clone(), anomaly);
        }
        let loaded_at = horizon(&release_map, &anomaly_map);
        Ok(Dataset {
            releases: release_map,
            anomalies: anomaly_map,
            loaded_at,
        })
    }

    pub fn empty() -> Self {
        Dataset {
            releases: BTreeMap::new(),
            anomalies: BTreeMap::new(),
            loaded_at: Timestamp::UNIX_EPOCH,
        }
    }

    pub fn anomalies_of<'a>(&'a self, release_id: &'a str) -> impl Iterator<Item = &'a Anomaly> {
        self.anomalies
            .values()
            .filter(move |a| a.release_id == release_id)
    }

    pub fn components(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.releases.values().map(|r| r.component.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names
    }

    /// Production releases of a component ordered by release date, then
    /// version string.
    pub fn release_sequence(&self, component: &str) -> Vec<&Release> {
        let mut seq: Vec<&Release> = self
            .releases
            .values()
            .filter(|r| r.production && r.component == component)
            .collect();
        seq.sort_by(|a, b| {
            a.released_at
                .cmp(&b.released_at)
                .then_with(|| a.version.cmp(&b.version))
                .then_with(|| a.id.cmp(&b.id))
        });
        seq
    }
}

fn horizon(
    releases: &BTreeMap<String, Release>,
    anomalies: &BTreeMap<String, Anomaly>,
) -> Timestamp {
    let release_times = releases.values().flat_map(|r| {
        [Some(r.released_at), r.life_end]
            .into_iter()
            .flatten()
            .map(start_of_day)
    });
    let anomaly_times = anomalies
        .values()
        .flat_map(|a| [Some(a.opened_at), a.closed_at].into_iter().flatten());
    release_times
        .chain(anomaly_times)
        .max()
        .unwrap_or(Timestamp::UNIX_EPOCH)
}

fn check_text(row: usize, field: &'static str, value: &str, required: bool) -> Result<(), IngestError> {
    if value.contains(SEPARATOR) || value.contains('\n') || value.contains('\r') {
        return Err(IngestError::BadField {
            row,
            field,
            reason: "contains a separator or line break".into(),
        });
    }
    if required && value.is_empty() {
        return Err(IngestError::BadField {
            row,
            field,
            reason: "must not be empty".into(),
        });
    }
    Ok(())
}

fn check_release_text(r: &Release) -> Result<(), IngestError> {
    check_text(0, "release_id", &r.id, true)?;
    check_text(0, "component", &r.component, true)?;
    check_text(0, "version", &r.version, false)
}

fn check_anomaly_text(a: &Anomaly) -> Result<(), IngestError> {
    check_text(0, "anomaly_id", &a.id, true)?;
    check_text(0, "component", &a.component, true)?;
    check_text(0, "release_id", &a.release_id, true)?;
    check_text(0, "title", &a.title, false)
}

struct Row<'a> {
    number: usize,
    fields: Vec<&'a str>,
    names: &'static [&'static str],
}

impl<'a> Row<'a> {
    fn get(&self, idx: usize) -> (&'static str, &'a str) {
        (self.names[idx], self.fields[idx])
    }

    fn text(&self, idx: usize, required: bool) -> Result<String, IngestError> {
        let (field, value) = self.get(idx);
        check_text(self.number, field, value, required)?;
        Ok(value.to_string())
    }

    fn date(&self, idx: usize) -> Result<NaiveDate, IngestError> {
        let (field, value) = self.get(idx);
        NaiveDate::parse_from_str(value, DATE_FORMAT).map_err(|_| IngestError::BadDate {
            row: self.number,
            field,
            value: value.to_string(),
        })
    }

    fn opt_date(&self, idx: usize) -> Result<Option<NaiveDate>, IngestError> {
        if self.fields[idx].is_empty() {
            Ok(None)
        } else {
            self.date(idx).map(Some)
        }
    }

    fn timestamp(&self, idx: usize) -> Result<Timestamp, IngestError> {
        let (field, value) = self.get(idx);
        NaiveDateTime::parse_from_str(value, TIMESTAMP_FORMAT)
            .map(|t| t.and_utc())
            .map_err(|_| IngestError::BadDate {
                row: self.number,
                field,
                value: value.to_string(),
            })
    }

    fn opt_timestamp(&self, idx: usize) -> Result<Option<Timestamp>, IngestError> {
        if self.fields[idx].is_empty() {
            Ok(None)
        } else {
            self.timestamp(idx).map(Some)
        }
    }

    fn count(&self, idx: usize) -> Result<u64, IngestError> {
        let (field, value) = self.get(idx);
        value.parse().map_err(|_| IngestError::BadNumber {
            row: self.number,
            field,
            value: value.to_string(),
        })
    }

    fn real(&self, idx: usize) -> Result<f64, IngestError> {
        let (field, value) = self.get(idx);
        match value.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
            _ => Err(IngestError::BadNumber {
                row: self.number,
                field,
                value: value.to_string(),
            }),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, idx: usize) -> Result<T, IngestError> {
        let (field, value) = self.get(idx);
        value.parse().map_err(|_| IngestError::BadEnum {
            row: self.number,
            field,
            value: value.to_string(),
        })
    }
}

fn rows<'a>(
    text: &'a str,
    header: &'static str,
    file: &'static str,
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>, IngestError> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(IngestError::HeaderMismatch { file });
    }
    let width = header.split(SEPARATOR).count();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let number = i + 2;
        let fields: Vec<&str> = line.split(SEPARATOR).collect();
        if fields.len() != width {
            return Err(IngestError::FieldCount {
                row: number,
                expected: width,
                found: fields.len(),
            });
        }
        out.push((number, fields));
    }
    Ok(out.into_iter())
}

const RELEASE_FIELDS: [&str; 17] = [
    "release_id",
    "component",
    "version",
    "released_at",
    "production",
    "dev_start",
    "dev_end",
    "test_start",
    "test_end",
    "life_end",
    "test_hours",
    "new_lines",
    "changed_lines",
    "deleted_lines",
    "total_product_loc",
    "dev_effort_pd",
    "test_effort_pd",
];

const ANOMALY_FIELDS: [&str; 8] = [
    "anomaly_id",
    "component",
    "release_id",
    "severity",
    "environment",
    "opened_at",
    "closed_at",
    "title",
];

pub fn parse_releases(text: &str) -> Result<Vec<Release>, IngestError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (number, fields) in rows(text, RELEASES_HEADER, RELEASES_FILE)? {
        let row = Row {
            number,
            fields,
            names: &RELEASE_FIELDS,
        };
        let production = match row.fields[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(IngestError::BadEnum {
                    row: number,
                    field: "production",
                    value: other.to_string(),
                })
            }
        };
        let release = Release {
            id: row.text(0, true)?,
            component: row.text(1, true)?,
            version: row.text(2, false)?,
            released_at: row.date(3)?,
            production,
            phases: PhaseSpan {
                dev_start: row.date(5)?,
                dev_end: row.date(6)?,
                test_start: row.date(7)?,
                test_end: row.date(8)?,
            },
            life_end: row.opt_date(9)?,
            test_hours: row.real(10)?,
            size: SizeDelta {
                new_lines: row.count(11)?,
                changed_lines: row.count(12)?,
                deleted_lines: row.count(13)?,
                total_product_loc: row.count(14)?,
            },
            dev_effort: row.real(15)?,
            test_effort: row.real(16)?,
        };
        release
            .validate()
            .map_err(|source| IngestError::Invalid { row: number, source })?;
        if !seen.insert(release.id.clone()) {
            return Err(IngestError::DuplicateId(release.id));
        }
        out.push(release);
    }
    Ok(out)
}

pub fn parse_anomalies(text: &str) -> Result<Vec<Anomaly>, IngestError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (number, fields) in rows(text, ANOMALIES_HEADER, ANOMALIES_FILE)? {
        let row = Row {
            number,
            fields,
            names: &ANOMALY_FIELDS,
        };
        let anomaly = Anomaly {
            id: row.text(0, true)?,
            component: row.text(1, true)?,
            release_id: row.text(2, true)?,
            severity: row.parsed::<Severity>(3)?,
            environment: row.parsed::<DetectionEnvironment>(4)?,
            opened_at: row.timestamp(5)?,
            closed_at: row.opt_timestamp(6)?,
            title: row.text(7, false)?,
        };
        anomaly
            .validate()
            .map_err(|source| IngestError::Invalid { row: number, source })?;
        if !seen.insert(anomaly.id.clone()) {
            return Err(IngestError::DuplicateId(anomaly.id));
        }
        out.push(anomaly);
    }
    Ok(out)
}

fn fmt_date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

fn fmt_timestamp(t: Timestamp) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Serialize both files. Rows are ordered by id; output is byte-stable.
pub fn export(dataset: &Dataset) -> (String, String) {
    let mut releases = String::from(RELEASES_HEADER);
    releases.push('\n');
    for r in dataset.releases.values() {
        let _ = writeln!(
            releases,
            "{};{};{};{};{};{};{};{};{};{};{};{};{};{};{};{};{}",
            r.id,
            r.component,
            r.version,
            fmt_date(r.released_at),
            u8::from(r.production),
            fmt_date(r.phases.dev_start),
            fmt_date(r.phases.dev_end),
            fmt_date(r.phases.test_start),
            fmt_date(r.phases.test_end),
            r.life_end.map(fmt_date).unwrap_or_default(),
            r.test_hours,
            r.size.new_lines,
            r.size.changed_lines,
            r.size.deleted_lines,
            r.size.total_product_loc,
            r.dev_effort,
            r.test_effort,
        );
    }
    let mut anomalies = String::from(ANOMALIES_HEADER);
    anomalies.push('\n');
    for a in dataset.anomalies.values() {
        let _ = writeln!(
            anomalies,
            "{};{};{};{};{};{};{};{}",
            a.id,
            a.component,
            a.release_id,
            a.severity,
            a.environment,
            fmt_timestamp(a.opened_at),
            a.closed_at.map(fmt_timestamp).unwrap_or_default(),
            a.title,
        );
    }
    (releases, anomalies)
}

/// Keep production releases and the anomalies attached to them.
pub fn production_view(dataset: &Dataset) -> Dataset {
    let releases: BTreeMap<String, Release> = dataset
        .releases
        .iter()
        .filter(|(_, r)| r.production)
        .map(|(k, r)| (k.clone(), r.clone()))
        .collect();
    let anomalies: BTreeMap<String, Anomaly> = dataset
        .anomalies
        .iter()
        .filter(|(_, a)| releases.contains_key(&a.release_id))
        .map(|(k, a)| (k.clone(), a.clone()))
        .collect();
    let loaded_at = horizon(&releases, &anomalies);
    Dataset {
        releases,
        anomalies,
        loaded_at,
    }
}

pub fn load_from_str(releases: &str, anomalies: &str) -> Result<Dataset, IngestError> {
    Dataset::new(parse_releases(releases)?, parse_anomalies(anomalies)?)
}

pub fn load_from_readers<R: Read, A: Read>(
    mut releases: R,
    mut anomalies: A,
) -> Result<Dataset, IngestError> {
    let mut r = String::new();
    releases
        .read_to_string(&mut r)
        .map_err(|e| IngestError::io(Path::new(RELEASES_FILE), e))?;
    let mut a = String::new();
    anomalies
        .read_to_string(&mut a)
        .map_err(|e| IngestError::io(Path::new(ANOMALIES_FILE), e))?;
    load_from_str(&r, &a)
}

pub fn load_files(releases: &Path, anomalies: &Path) -> Result<Dataset, IngestError> {
    let r = fs::read_to_string(releases).map_err(|e| IngestError::io(releases, e))?;
    let a = fs::read_to_string(anomalies).map_err(|e| IngestError::io(anomalies, e))?;
    load_from_str(&r, &a)
}

/// Load a store directory holding `releases.csv` and `anomalies.csv`.
pub fn load(dir: &Path) -> Result<Dataset, IngestError> {
    load_files(&dir.join(RELEASES_FILE), &dir.join(ANOMALIES_FILE))
}

/// Write both files into `dir`. Each file is written to a temporary sibling
/// and renamed into place, so readers never see a partial file.
pub fn save(dataset: &Dataset, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    let (releases, anomalies) = export(dataset);
    write_atomic(&dir.join(RELEASES_FILE), releases.as_bytes())?;
    write_atomic(&dir.join(ANOMALIES_FILE), anomalies.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IngestError::io(dir, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| IngestError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| IngestError::io(path, e.error))?;
    Ok(())
}

/// Single-writer, many-reader holder of the current snapshot. Readers get
/// an immutable `Arc`; `publish` swaps in a new value atomically and
/// in-flight readers keep the one they already hold.
#[derive(Debug)]
pub struct SnapshotStore<T = Dataset> {
    current: RwLock<Arc<T>>,
}

impl<T> SnapshotStore<T> {
    pub fn new(value: T) -> Self {
        SnapshotStore {
            current: RwLock::new(Arc::new(value)),
        }
    }

    pub fn snapshot(&self) -> Arc<T> {
        match self.current.read() {
            Ok(guard) => Arc::clone(&guard),
            Err(poisoned) => Arc::clone(&poisoned.into_inner()),
        }
    }

    pub fn publish(&self, value: T) {
        let next = Arc::new(value);
        match self.current.write() {
            Ok(mut guard) => *guard = next,
            Err(poisoned) => *poisoned.into_inner() = next,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn release_row(id: &str, production: u8) -> String {
        format!("{id};MTP;1.0;1997-01-01;{production};1996-10-01;1996-11-30;1996-12-01;1996-12-20;;200;3000;1500;500;5000000;40;20")
    }

    fn releases_text(rows: &[String]) -> String {
        let mut s = format!("{RELEASES_HEADER}\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    fn anomalies_text(rows: &[&str]) -> String {
        let mut s = format!("{ANOMALIES_HEADER}\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn parse_one_release() {
        let list = parse_releases(&releases_text(&[release_row("R1", 1)])).unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].size.total_product_loc, 5_000_000);
        assert_eq!(list[0].life_end, None);
    }

    #[test]
    fn header_only_and_missing_trailing_newline() {
        assert!(parse_releases(RELEASES_HEADER).unwrap().is_empty());
        assert!(parse_anomalies(&format!("{ANOMALIES_HEADER}\n")).unwrap().is_empty());
        let text = format!("{RELEASES_HEADER}\n{}", release_row("R1", 1));
        assert_eq!(parse_releases(&text).unwrap().len(), 1);
    }

    #[test]
    fn header_mismatch() {
        let err = parse_releases("release_id;component\n").unwrap_err();
        assert!(matches!(err, IngestError::HeaderMismatch { file: RELEASES_FILE }));
        let extra = format!("{ANOMALIES_HEADER};extra\n");
        assert!(matches!(
            parse_anomalies(&extra),
            Err(IngestError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn field_count_names_row() {
        let mut row = release_row("R1", 1);
        for _ in 0..3 {
            let cut = row.rfind(';').unwrap();
            row.truncate(cut);
        }
        let err = parse_releases(&releases_text(&[release_row("R0", 1), row])).unwrap_err();
        match err {
            IngestError::FieldCount { row, expected, found } => {
                assert_eq!((row, expected, found), (3, 17, 14));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_values_name_row_and_field() {
        let row = release_row("R1", 1).replace("1997-01-01", "1997-13-01");
        assert!(matches!(
            parse_releases(&releases_text(&[row])),
            Err(IngestError::BadDate { row: 2, field: "released_at", .. })
        ));
        let row = release_row("R1", 1).replace(";200;", ";abc;");
        assert!(matches!(
            parse_releases(&releases_text(&[row])),
            Err(IngestError::BadNumber { row: 2, field: "test_hours", .. })
        ));
        let row = release_row("R1", 1).replace(";3000;", ";-3;");
        assert!(matches!(
            parse_releases(&releases_text(&[row])),
            Err(IngestError::BadNumber { field: "new_lines", .. })
        ));
        let row = release_row("R1", 1).replace(";200;", ";NaN;");
        assert!(matches!(
            parse_releases(&releases_text(&[row])),
            Err(IngestError::BadNumber { .. })
        ));
        assert!(matches!(
            parse_releases(&releases_text(&[release_row("R1", 2)])),
            Err(IngestError::BadEnum { field: "production", .. })
        ));
        assert!(matches!(
            parse_releases(&releases_text(&[release_row("R1", 1), release_row("R1", 0)])),
            Err(IngestError::DuplicateId(id)) if id == "R1"
        ));
    }

    #[test]
    fn anomaly_rows() {
        let open = "A1;MTP;R1;high;production;1997-01-05T08:00:00Z;;login fails";
        let list = parse_anomalies(&anomalies_text(&[open])).unwrap();
        assert_eq!(list[0].closed_at, None);
        assert_eq!(list[0].severity, Severity::High);

        let critical = "A1;MTP;R1;critical;production;1997-01-05T08:00:00Z;;x";
        assert!(matches!(
            parse_anomalies(&anomalies_text(&[critical])),
            Err(IngestError::BadEnum { row: 2, field: "severity", .. })
        ));
        let env = "A1;MTP;R1;low;staging;1997-01-05T08:00:00Z;;x";
        assert!(matches!(
            parse_anomalies(&anomalies_text(&[env])),
            Err(IngestError::BadEnum { field: "environment", .. })
        ));
        let backwards = "A1;MTP;R1;low;production;1997-01-05T08:00:00Z;1997-01-04T08:00:00Z;x";
        assert!(matches!(
            parse_anomalies(&anomalies_text(&[backwards])),
            Err(IngestError::Invalid {
                row: 2,
                source: DomainError::Invalid { entity: "anomaly", .. }
            })
        ));
        let bad_ts = "A1;MTP;R1;low;production;1997-01-05 08:00;;x";
        assert!(matches!(
            parse_anomalies(&anomalies_text(&[bad_ts])),
            Err(IngestError::BadDate { field: "opened_at", .. })
        ));
    }

    #[test]
    fn integrity_error() {
        let r = releases_text(&[release_row("R1", 1)]);
        let a = anomalies_text(&["A1;MTP;R9;low;production;1997-01-05T08:00:00Z;;x"]);
        match load_from_str(&r, &a) {
            Err(IngestError::Integrity { anomaly_id, release_id }) => {
                assert_eq!((anomaly_id.as_str(), release_id.as_str()), ("A1", "R9"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn export_orders_by_id_and_round_trips() {
        let r = releases_text(&[release_row("b", 1), release_row("a", 0)]);
        let a = anomalies_text(&[
            "y;MTP;a;low;production;1997-01-05T08:00:00Z;;x",
            "x;MTP;b;high;internal_test;1997-01-03T08:00:00Z;1997-01-04T09:30:00Z;y",
        ]);
        let d = load_from_str(&r, &a).unwrap();
        let (rel_out, an_out) = export(&d);
        let ids: Vec<&str> = rel_out.lines().skip(1).map(|l| &l[..1]).collect();
        assert_eq!(ids, ["a", "b"]);
        let ids: Vec<&str> = an_out.lines().skip(1).map(|l| &l[..1]).collect();
        assert_eq!(ids, ["x", "y"]);
        assert_eq!(load_from_str(&rel_out, &an_out).unwrap(), d);
    }

    #[test]
    fn empty_export() {
        let (r, a) = export(&Dataset::empty());
        assert_eq!(r, format!("{RELEASES_HEADER}\n"));
        assert_eq!(a, format!("{ANOMALIES_HEADER}\n"));
        assert_eq!(load_from_str(&r, &a).unwrap(), Dataset::empty());
    }

    #[test]
    fn production_view_examples() {
        let r = releases_text(&[
            release_row("R1", 1),
            release_row("R2", 1),
            release_row("R3", 0),
        ]);
        let a = anomalies_text(&[
            "A1;MTP;R1;low;production;1997-01-05T08:00:00Z;;x",
            "A2;MTP;R3;low;production;1997-01-05T08:00:00Z;;x",
        ]);
        let d = load_from_str(&r, &a).unwrap();
        let view = production_view(&d);
        assert_eq!(view.releases.len(), 2);
        assert!(view.anomalies.contains_key("A1"));
        assert!(!view.anomalies.contains_key("A2"));
        assert_eq!(production_view(&view), view);

        let r = releases_text(&[release_row("R3", 0)]);
        let d = load_from_str(&r, &anomalies_text(&[])).unwrap();
        let view = production_view(&d);
        assert!(view.releases.is_empty() && view.anomalies.is_empty());
    }

    #[test]
    fn rejects_separator_in_text() {
        let mut d = load_from_str(&releases_text(&[release_row("R1", 1)]), ANOMALIES_HEADER).unwrap();
        let mut release = d.releases.remove("R1").unwrap();
        release.version = "1;2".into();
        assert!(matches!(
            Dataset::new(vec![release], vec![]),
            Err(IngestError::BadField { field: "version", .. })
        ));
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let r = releases_text(&[release_row("R1", 1)]);
        let a = anomalies_text(&["A1;MTP;R1;low;production;1997-01-05T08:00:00Z;;x"]);
        let d = load_from_str(&r, &a).unwrap();
        save(&d, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), d);
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 2);
    }

    #[test]
    fn missing_store_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load(&dir.path().join("nope")), Err(IngestError::Io { .. })));
    }

    #[test]
    fn snapshot_swap() {
        let store: SnapshotStore = SnapshotStore::new(Dataset::empty());
        let before = store.snapshot();
        let d = load_from_str(&releases_text(&[release_row("R1", 1)]), ANOMALIES_HEADER).unwrap();
        store.publish(d.clone());
        assert!(before.releases.is_empty());
        assert_eq!(*store.snapshot(), d);
    }

    #[test]
    fn horizon_is_latest_instant() {
        let r = releases_text(&[release_row("R1", 1)]);
        let a = anomalies_text(&[
            "A1;MTP;R1;low;production;1997-01-05T08:00:00Z;1997-02-01T10:00:00Z;x",
        ]);
        let d = load_from_str(&r, &a).unwrap();
        assert_eq!(d.loaded_at.to_rfc3339(), "1997-02-01T10:00:00+00:00");
    }
}
