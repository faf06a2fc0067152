use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;

use relquant::api::{handle, Snapshot};
use relquant::server;
use relquant_core::ingest;
use relquant_core::SnapshotStore;
use serde_json::Value;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn snapshot() -> Snapshot {
    Snapshot::new(ingest::load(&fixture_dir()).unwrap())
}

fn get(snap: &Snapshot, path: &str, query: &str) -> (u16, Value) {
    let (status, body) = handle(snap, "GET", path, query, b"");
    (status, serde_json::from_str(&body).unwrap())
}

fn post_stats(snap: &Snapshot, body: &str) -> (u16, Value) {
    let (status, body) = handle(snap, "POST", "/api/stats", "", body.as_bytes());
    (status, serde_json::from_str(&body).unwrap())
}

fn code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[test]
fn envelope_shape() {
    let snap = snapshot();
    let (status, v) = get(&snap, "/api/releases", "");
    assert_eq!(status, 200);
    assert_eq!(v["status"], "ok");
    assert!(v.get("error").is_none());
    assert_eq!(v["generated_at"], "1997-07-07T00:00:00Z");
    assert_eq!(v["data"].as_array().unwrap().len(), 3);

    let (status, v) = get(&snap, "/api/releases", "production_only=false&component=EAS");
    assert_eq!(status, 200);
    assert_eq!(v["data"][0]["id"], "R4");

    let (status, v) = get(&snap, "/api/releases/R9/indicators", "");
    assert_eq!(status, 404);
    assert_eq!(v["status"], "error");
    assert!(v.get("data").is_none());
    assert_eq!(code(&v), "UnknownRelease");
}

#[test]
fn validation_errors_are_typed() {
    let snap = snapshot();
    let cases = [
        ("/api/series", "indicator=bogus&component=MTP", 404, "UnknownIndicator"),
        ("/api/series", "indicator=mttr&component=XYZ", 404, "UnknownComponent"),
        ("/api/series", "component=MTP", 400, "BadQuery"),
        ("/api/series", "indicator=mttr&component=MTP&colour=red", 400, "BadQuery"),
        ("/api/weekly", "from=1997-W20&to=1997-W01", 400, "BadRange"),
        ("/api/weekly", "from=1997-20", 400, "BadWeek"),
        ("/api/weekly", "from=1997-W54", 400, "BadWeek"),
        ("/api/board", "as_of=yesterday", 400, "BadTimestamp"),
        ("/api/releases", "production_only=maybe", 400, "BadQuery"),
        ("/api/releases/R4/indicators", "", 422, "NotInProduction"),
        ("/api/releases/R3/indicators", "as_of=1997-01-01", 422, "NotYetReleased"),
        ("/api/releases/R3/distribution", "as_of=1997-01-01", 422, "NotYetReleased"),
        ("/api/releases/R3/decay", "k=-1", 400, "InvalidParameter"),
        ("/api/releases/R3/decay", "k=abc", 400, "InvalidParameter"),
        ("/api/releases/R3/decay", "as_of=1997-05-20", 422, "TooFewPoints"),
        ("/api/releases/R9/decay", "", 404, "UnknownRelease"),
        ("/api/releases/R9/severity", "", 404, "UnknownRelease"),
        ("/api/releases/R1/nothing", "", 404, "NotFound"),
        ("/api/unknown", "", 404, "NotFound"),
        ("/", "", 404, "NotFound"),
    ];
    for (path, query, status, expected) in cases {
        let (got, v) = get(&snap, path, query);
        assert_eq!((got, code(&v)), (status, expected), "{path}?{query}");
    }
    let (status, v) = {
        let (s, b) = handle(&snap, "DELETE", "/api/releases", "", b"");
        (s, serde_json::from_str::<Value>(&b).unwrap())
    };
    assert_eq!((status, code(&v)), (405, "MethodNotAllowed"));
    let (status, _) = handle(&snap, "GET", "/api/stats", "", b"");
    assert_eq!(status, 405);
}

#[test]
fn defaults_use_loaded_at() {
    let snap = snapshot();
    let (_, implicit) = get(&snap, "/api/board", "");
    let (_, explicit) = get(&snap, "/api/board", "as_of=1997-07-07T00:00:00Z");
    assert_eq!(implicit, explicit);
    let (_, by_date) = get(&snap, "/api/board", "as_of=1997-07-07");
    assert_eq!(implicit, by_date);
    let (status, weekly) = get(&snap, "/api/weekly", "");
    assert_eq!(status, 200);
    let weeks = weekly["data"].as_array().unwrap();
    assert_eq!(weeks.last().unwrap()["week"], "1997-W28");
}

#[test]
fn series_payload() {
    let snap = snapshot();
    let (status, v) = get(&snap, "/api/series", "indicator=mttr&component=MTP");
    assert_eq!(status, 200);
    let points = v["data"]["points"].as_array().unwrap();
    let ids: Vec<&str> = points.iter().map(|p| p["release_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["R1", "R2", "R3"]);
    assert_eq!(points[1]["value"]["value"], 37.5);
    let (_, early) = get(&snap, "/api/series", "indicator=mttf&component=MTP&as_of=1997-05-05");
    let last = early["data"]["points"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["value"]["not_applicable"], "no_failures");
}

#[test]
fn stats_endpoint() {
    let snap = snapshot();
    let (status, v) = post_stats(&snap, r#"{"op":"correlation","x":"mttr","y":"dev_effort_pd"}"#);
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["data"]["n"], 3);
    let r = v["data"]["values"]["r"].as_f64().unwrap();
    let (_, swapped) = post_stats(&snap, r#"{"op":"correlation","x":"dev_effort_pd","y":"mttr"}"#);
    assert_eq!(swapped["data"]["values"]["r"].as_f64().unwrap(), r);

    let (status, v) = post_stats(&snap, r#"{"op":"mean","x":"mttr","filter":{"release_ids":["R1","R2"]}}"#);
    assert_eq!(status, 200);
    assert_eq!(v["data"]["n"], 2);

    let (status, v) = post_stats(&snap, r#"{"op":"regression","x":"pcr","y":"quality","filter":{"component":"MTP"}}"#);
    assert_eq!(status, 200);
    assert!(v["data"]["values"]["r_squared"].as_f64().is_some());

    let errors = [
        (r#"{"op":"correlation","x":"mttr"}"#, 400, "BadQuery"),
        (r#"{"op":"median","x":"mttr"}"#, 400, "BadQuery"),
        (r#"{"op":"mean","x":"nonsense"}"#, 404, "UnknownIndicator"),
        (r#"{"op":"mean","x":"mttr","filter":{"component":"XYZ"}}"#, 404, "UnknownComponent"),
        (r#"{"op":"mean","x":"mttr","filter":{"release_ids":["R4"]}}"#, 422, "NotInProduction"),
        (r#"{"op":"stddev","x":"mttr","filter":{"release_ids":["R1"]}}"#, 422, "TooFewPoints"),
        (r#"{"op":"correlation","x":"mttr","y":"klcc","as_of":"1997-05-01","filter":{"release_ids":["R1","R2"]}}"#, 200, ""),
        (r#"{"op":"mean","x":"mttr","as_of":"soon"}"#, 400, "BadTimestamp"),
        (r#"{"op":"mean""#, 400, "BadBody"),
        (r#"{"op":"mean","x":"mttr","extra":1}"#, 400, "BadBody"),
    ];
    for (body, status, expected) in errors {
        let (got, v) = post_stats(&snap, body);
        assert_eq!(got, status, "{body}: {v}");
        if status != 200 {
            assert_eq!(code(&v), expected, "{body}");
        }
    }
}

#[test]
fn constant_series_is_reported() {
    let mut data = ingest::load(&fixture_dir()).unwrap();
    for r in data.releases.values_mut() {
        r.dev_effort = 10.0;
    }
    let snap = Snapshot::new(data);
    let (status, v) = post_stats(&snap, r#"{"op":"correlation","x":"mttr","y":"dev_effort_pd"}"#);
    assert_eq!((status, code(&v)), (422, "ConstantSeries"));
}

#[test]
fn repeated_reads_are_identical() {
    let snap = snapshot();
    for (path, query) in [
        ("/api/releases", ""),
        ("/api/weekly", "from=1997-W01&to=1997-W20"),
        ("/api/board", ""),
        ("/api/releases/R3/decay", "k=2.0"),
        ("/api/releases/R2/environment", ""),
    ] {
        let first = handle(&snap, "GET", path, query, b"");
        let second = handle(&snap, "GET", path, query, b"");
        assert_eq!(first, second, "{path}");
    }
}

fn http(addr: std::net::SocketAddr, request: &str) -> (u16, String) {
    let mut stream = std::net::TcpStream::connect(addr).unwrap();
    stream.write_all(request.as_bytes()).unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status = response[9..12].parse().unwrap();
    let body = response.split_once("\r\n\r\n").unwrap().1.to_string();
    (status, body)
}

#[test]
fn tcp_round_trip_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest::load(&fixture_dir()).unwrap();
    ingest::save(&data, dir.path()).unwrap();
    let store = Arc::new(SnapshotStore::new(Snapshot::new(data.clone())));

    let runtime = tokio::runtime::Runtime::new().unwrap();
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let addr = listener.local_addr().unwrap();
    runtime.spawn(server::serve(listener, store.clone(), dir.path().to_path_buf()));

    let (status, body) = http(
        addr,
        "GET /api/releases/R2/indicators HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    );
    assert_eq!(status, 200);
    assert_eq!(body, handle(&store.snapshot(), "GET", "/api/releases/R2/indicators", "", b"").1);

    let stats = r#"{"op":"correlation","x":"mttr","y":"dev_effort_pd"}"#;
    let (status, body) = http(
        addr,
        &format!(
            "POST /api/stats HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{stats}",
            stats.len()
        ),
    );
    assert_eq!(status, 200, "{body}");

    let (status, _) = http(
        addr,
        "GET /api/series?indicator=nope&component=MTP HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    );
    assert_eq!(status, 404);

    // drop R3 from the store on disk and reload
    let mut smaller = data.clone();
    smaller.releases.remove("R3");
    smaller.anomalies.retain(|_, a| a.release_id != "R3");
    let smaller = ingest::Dataset::new(
        smaller.releases.into_values().collect(),
        smaller.anomalies.into_values().collect(),
    )
    .unwrap();
    ingest::save(&smaller, dir.path()).unwrap();
    server::reload(&store, dir.path()).unwrap();
    let (status, _) = http(
        addr,
        "GET /api/releases/R3/indicators HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    );
    assert_eq!(status, 404);

    // a broken store leaves the current snapshot in place
    std::fs::write(dir.path().join(ingest::RELEASES_FILE), "garbage\n").unwrap();
    assert!(server::reload(&store, dir.path()).is_err());
    let (status, _) = http(
        addr,
        "GET /api/releases/R2/indicators HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    );
    assert_eq!(status, 200);
}
