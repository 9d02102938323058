// SPDX-License-Identifier: Apache-2.0

//! Read-only HTTP query service. Every request is answered from an immutable
//! snapshot of the ledger, rebuilt by replay whenever the file has grown.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Serialize;
use serde_json::json;

use cvechain_core::canonical;
use cvechain_core::chaincode::{Chaincode, WorldState};
use cvechain_core::cve::{CveId, CveStatus};
use cvechain_core::identity::ParticipantId;
use cvechain_core::ledger::{query_public, QueryFilter};
use cvechain_core::ledger::store;
use cvechain_core::ledger::{audit_ledger_bytes, replay, verify_chain, AuditReport, Block, SignatureCache, TrustAnchors};

use crate::error::CliError;
use crate::node::{read_complete, trust_anchors, NodeConfig};

/// One consistent view of the ledger.
pub struct Snapshot {
    pub file_len: u64,
    pub blocks: Vec<Block>,
    pub state: WorldState,
    pub report: AuditReport,
}

impl Snapshot {
    /// Build a view of `bytes` (complete lines only). State is replayed from
    /// the longest verified prefix, so a damaged ledger is still served up
    /// to its first bad block and `/v1/audit` reports the damage.
    pub fn build(bytes: &[u8], file_len: u64, anchors: &TrustAnchors, chaincode: &Chaincode) -> Result<Self, CliError> {
        let report = audit_ledger_bytes(bytes, anchors, &mut SignatureCache::default());
        let mut blocks = store::parse_prefix(bytes, usize::MAX);
        if let Some(bad) = verify_chain(&blocks, anchors).first_bad_height {
            blocks.truncate(bad as usize);
        }
        if blocks.is_empty() {
            return Err(CliError::domain("InvalidLedger", "genesis block does not verify"));
        }
        let state = replay(&blocks, chaincode)?.state;
        Ok(Self { file_len, blocks, state, report })
    }
}

pub struct QueryService {
    ledger_path: PathBuf,
    anchors: TrustAnchors,
    chaincode: Chaincode,
    current: RwLock<Arc<Snapshot>>,
}

impl QueryService {
    pub fn open(config: &NodeConfig) -> Result<Self, CliError> {
        let anchors = trust_anchors(config)?;
        // Releasing an embargo during replay opens its envelope.
        let chaincode = Chaincode::new(Some(config.network().embargo_key()));
        let ledger_path = config.ledger_path();
        let snapshot = Self::load(&ledger_path, &anchors, &chaincode)?;
        Ok(Self { ledger_path, anchors, chaincode, current: RwLock::new(Arc::new(snapshot)) })
    }

    fn load(path: &std::path::Path, anchors: &TrustAnchors, chaincode: &Chaincode) -> Result<Snapshot, CliError> {
        let (bytes, _) = read_complete(path)?;
        Snapshot::build(&bytes, bytes.len() as u64, anchors, chaincode)
    }

    /// The latest snapshot, reloading first if more complete lines exist.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        let current = self.current.read().expect("snapshot lock").clone();
        let (bytes, _) = match read_complete(&self.ledger_path) {
            Ok(read) => read,
            Err(e) => {
                log::warn!("keeping previous snapshot: {e}");
                return current;
            }
        };
        if bytes.len() as u64 == current.file_len {
            return current;
        }
        match Snapshot::build(&bytes, bytes.len() as u64, &self.anchors, &self.chaincode) {
            Ok(fresh) => {
                let fresh = Arc::new(fresh);
                *self.current.write().expect("snapshot lock") = fresh.clone();
                fresh
            }
            Err(e) => {
                log::warn!("keeping previous snapshot: {e}");
                current
            }
        }
    }
}

type Shared = Arc<QueryService>;

fn canonical_json<T: Serialize + ?Sized>(status: StatusCode, value: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], canonical::to_vec(value)).into_response()
}

fn error(status: StatusCode, code: &str, detail: impl Into<String>) -> Response {
    canonical_json(status, &json!({"error": code, "detail": detail.into()}))
}

async fn current(service: &Shared) -> Arc<Snapshot> {
    let service = service.clone();
    tokio::task::spawn_blocking(move || service.snapshot()).await.expect("snapshot task")
}

async fn get_cve(State(service): State<Shared>, Path(id): Path<String>) -> Response {
    let Ok(id) = id.parse::<CveId>() else {
        return error(StatusCode::BAD_REQUEST, "BadCveId", id);
    };
    let snap = current(&service).await;
    let filter = QueryFilter { id: Some(id), ..Default::default() };
    match query_public(&snap.state, &filter).pop() {
        Some(view) => canonical_json(StatusCode::OK, &view),
        None => error(StatusCode::NOT_FOUND, "UnknownCve", id.to_string()),
    }
}

fn parse_filter(params: &HashMap<String, String>) -> Result<QueryFilter, String> {
    let mut filter = QueryFilter::default();
    for (key, value) in params {
        match key.as_str() {
            "status" => filter.status = Some(value.parse::<CveStatus>()?),
            "product" => filter.product = Some(value.clone()),
            "year" => filter.year = Some(value.parse().map_err(|_| format!("bad year {value:?}"))?),
            "id" => filter.id = Some(value.parse().map_err(|e| format!("{e}"))?),
            "submitter" => filter.submitter = Some(ParticipantId::new(value.clone()).map_err(|e| e.to_string())?),
            other => return Err(format!("unknown filter {other:?}")),
        }
    }
    Ok(filter)
}

async fn list_cves(State(service): State<Shared>, Query(params): Query<HashMap<String, String>>) -> Response {
    let filter = match parse_filter(&params) {
        Ok(f) => f,
        Err(detail) => return error(StatusCode::BAD_REQUEST, "BadFilter", detail),
    };
    let snap = current(&service).await;
    canonical_json(StatusCode::OK, &query_public(&snap.state, &filter))
}

async fn get_block(State(service): State<Shared>, Path(height): Path<String>) -> Response {
    let Ok(height) = height.parse::<usize>() else {
        return error(StatusCode::BAD_REQUEST, "BadHeight", height);
    };
    let snap = current(&service).await;
    match snap.blocks.get(height) {
        Some(block) => canonical_json(StatusCode::OK, block),
        None => error(StatusCode::NOT_FOUND, "UnknownBlock", height.to_string()),
    }
}

async fn get_audit(State(service): State<Shared>) -> Response {
    let snap = current(&service).await;
    canonical_json(StatusCode::OK, &snap.report)
}

/// Events from blocks at height `since` and above.
async fn get_events(State(service): State<Shared>, Query(params): Query<HashMap<String, String>>) -> Response {
    let mut since = 0u64;
    for (key, value) in &params {
        match (key.as_str(), value.parse()) {
            ("since", Ok(h)) => since = h,
            _ => return error(StatusCode::BAD_REQUEST, "BadFilter", format!("{key}={value}")),
        }
    }
    let snap = current(&service).await;
    let events: Vec<_> = snap.state.event_log.iter().filter(|e| e.block_height >= since).collect();
    canonical_json(StatusCode::OK, &events)
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

/// GET-only routes; there is no mutating endpoint.
pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/v1/cve/{id}", get(get_cve))
        .route("/v1/cve", get(list_cves))
        .route("/v1/blocks/{height}", get(get_block))
        .route("/v1/audit", get(get_audit))
        .route("/v1/events", get(get_events))
        .fallback(not_found)
        .with_state(service)
}

/// Serve until the process is stopped.
pub fn serve(config: &NodeConfig, port: u16) -> Result<(), CliError> {
    let service = Arc::new(QueryService::open(config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        let addr = listener.local_addr()?;
        println!("{}", canonical::to_string(&json!({"listening": addr.to_string()})));
        axum::serve(listener, router(service)).await?;
        Ok(())
    })
}
