//! HTTP adapter: every request goes through [`api::handle`] against the
//! current snapshot.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use relquant_core::ingest;
use relquant_core::SnapshotStore;
use tokio::net::TcpListener;

use crate::api::{self, Snapshot};

pub type SharedStore = Arc<SnapshotStore<Snapshot>>;

async fn dispatch(State(store): State<SharedStore>, method: Method, uri: Uri, body: Bytes) -> Response {
    let snap = store.snapshot();
    let (status, text) = api::handle(&snap, method.as_str(), uri.path(), uri.query().unwrap_or(""), &body);
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

pub fn router(store: SharedStore) -> Router {
    Router::new().fallback(dispatch).with_state(store)
}

/// Reload the store directory and publish it; on failure the old snapshot
/// stays in place.
pub fn reload(store: &SnapshotStore<Snapshot>, dir: &std::path::Path) -> Result<(), ingest::IngestError> {
    let data = ingest::load(dir)?;
    store.publish(Snapshot::new(data));
    Ok(())
}

#[cfg(unix)]
fn watch_hangup(store: SharedStore, dir: PathBuf) {
    use tokio::signal::unix::{signal, SignalKind};
    tokio::spawn(async move {
        let Ok(mut hup) = signal(SignalKind::hangup()) else {
            eprintln!("relquant: cannot listen for SIGHUP, reload disabled");
            return;
        };
        while hup.recv().await.is_some() {
            match reload(&store, &dir) {
                Ok(()) => eprintln!("relquant: reloaded {}", dir.display()),
                Err(e) => eprintln!("relquant: reload failed, keeping previous data: {e}"),
            }
        }
    });
}

#[cfg(not(unix))]
fn watch_hangup(_store: SharedStore, _dir: PathBuf) {}

pub async fn serve(listener: TcpListener, store: SharedStore, dir: PathBuf) -> std::io::Result<()> {
    watch_hangup(store.clone(), dir);
    axum::serve(listener, router(store)).await
}

pub fn serve_blocking(snap: Snapshot, dir: PathBuf, addr: &str) -> std::io::Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = TcpListener::bind(addr).await?;
        let local: SocketAddr = listener.local_addr()?;
        eprintln!("relquant: serving {} on http://{local}", dir.display());
        serve(listener, Arc::new(SnapshotStore::new(snap)), dir).await
    })
}
