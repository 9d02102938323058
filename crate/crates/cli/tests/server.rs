// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use cvechain_cli::server::{router, QueryService};
use cvechain_cli::{Node, NodeConfig};
use cvechain_core::chaincode::seal::seal_record;
use cvechain_core::chaincode::Operation;
use cvechain_core::cve::{CveId, CveRecord, CveStatus, Severity, SeverityLevel, Version, VersionRange};
use cvechain_core::identity::{ParticipantId, Role};

fn pid(s: &str) -> ParticipantId {
    ParticipantId::new(s).unwrap()
}

fn record(seq: u64, text: &str) -> CveRecord {
    CveRecord {
        cve_id: CveId { year: 2025, sequence: seq },
        description: text.into(),
        product: format!("product-{seq}"),
        version: vec![VersionRange::inclusive(Version::new(1, 0, 0), Version::new(1, 4, 2))],
        severity: Severity::new(SeverityLevel::Critical, Some(9.8)),
        status: CveStatus::Draft,
        embargo_until: None,
        submitter_cna: pid("cna.acme"),
        references: vec![],
        annotations: vec![],
        created_at: 0,
        updated_at: 0,
        seal: None,
    }
}

/// A node with one published and one embargoed record.
fn populated() -> (tempfile::TempDir, NodeConfig) {
    let tmp = tempfile::tempdir().unwrap();
    let mut node = Node::init(NodeConfig::new(tmp.path())).unwrap();
    let governor = pid("gov.board1");
    let cert = node.issue(&pid("cna.acme"), Role::Cna).unwrap();
    let op = Operation::OnboardCna { cna_id: pid("cna.acme"), cert_hash: cert.cert_hash(), certificate: cert };
    node.transact(&governor, op).unwrap();
    node.transact(&pid("cna.acme"), Operation::SubmitCve { record: record(1, "public text") }).unwrap();
    let mut secret = record(2, "secret plaintext");
    secret.embargo_until = Some(1_750_009_999);
    let sealed = seal_record(&secret, &node.config().network().embargo_key());
    node.transact(&pid("cna.acme"), Operation::SubmitCve { record: sealed }).unwrap();
    let config = node.config().clone();
    (tmp, config)
}

async fn get(app: &axum::Router, uri: &str) -> (StatusCode, Vec<u8>) {
    request(app, Method::GET, uri).await
}

async fn request(app: &axum::Router, method: Method, uri: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

fn json(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap()
}

fn app(config: &NodeConfig) -> axum::Router {
    router(Arc::new(QueryService::open(config).unwrap()))
}

#[tokio::test]
async fn record_views() {
    let (_tmp, config) = populated();
    let app = app(&config);
    let (status, body) = get(&app, "/v1/cve/CVE-2025-0001").await;
    assert_eq!(status, StatusCode::OK);
    let view = json(&body);
    assert_eq!((view["status"].as_str(), view["description"].as_str()), (Some("PUBLISHED"), Some("public text")));
    // canonical: re-serializing with sorted keys gives the same bytes
    assert_eq!(cvechain_core::canonical::to_vec(&view), body);

    assert_eq!(get(&app, "/v1/cve/CVE-2025-9999").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/v1/cve/not-an-id").await.0, StatusCode::BAD_REQUEST);

    let (status, body) = get(&app, "/v1/cve/CVE-2025-0002").await;
    assert_eq!(status, StatusCode::OK);
    let draft = json(&body);
    assert_eq!(draft["status"], "DRAFT");
    assert!(draft["contentCommitment"].is_string() && draft.get("description").is_none());
    assert!(!String::from_utf8(body).unwrap().contains("secret plaintext"));
}

#[tokio::test]
async fn filtered_list() {
    let (_tmp, config) = populated();
    let app = app(&config);
    let (status, body) = get(&app, "/v1/cve?status=PUBLISHED&year=2025").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body).as_array().unwrap().len(), 1);
    assert_eq!(json(&get(&app, "/v1/cve").await.1).as_array().unwrap().len(), 2);
    assert_eq!(json(&get(&app, "/v1/cve?product=product-2").await.1), Value::Array(vec![]));
    for bad in ["/v1/cve?status=FIXED", "/v1/cve?year=soon", "/v1/cve?colour=red"] {
        assert_eq!(get(&app, bad).await.0, StatusCode::BAD_REQUEST, "{bad}");
    }
    let all = String::from_utf8(get(&app, "/v1/cve").await.1).unwrap();
    assert!(!all.contains("secret plaintext"));
}

#[tokio::test]
async fn blocks_audit_and_events() {
    let (_tmp, config) = populated();
    let app = app(&config);
    let ledger = fs::read_to_string(config.ledger_path()).unwrap();
    let (status, body) = get(&app, "/v1/blocks/1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(format!("{}\n", String::from_utf8(body).unwrap()), ledger.lines().nth(1).unwrap().to_string() + "\n");
    assert_eq!(get(&app, "/v1/blocks/4").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/v1/blocks/x").await.0, StatusCode::BAD_REQUEST);

    let audit = json(&get(&app, "/v1/audit").await.1);
    assert_eq!((audit["valid"].as_bool(), audit["blocks"].as_u64()), (Some(true), Some(4)));

    let events = json(&get(&app, "/v1/events?since=2").await.1);
    let kinds: Vec<&str> = events.as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["CVESubmitted", "CVESubmitted"]);
    assert_eq!(json(&get(&app, "/v1/events").await.1).as_array().unwrap().len(), 3);
    assert_eq!(get(&app, "/v1/events?since=-1").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn read_only_and_non_mutating() {
    let (_tmp, config) = populated();
    let app = app(&config);
    let before = fs::read(config.ledger_path()).unwrap();
    for method in [Method::POST, Method::PUT, Method::DELETE] {
        let (status, _) = request(&app, method.clone(), "/v1/cve/CVE-2025-0001").await;
        assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED, "{method}");
    }
    assert_eq!(get(&app, "/v1/nothing").await.0, StatusCode::NOT_FOUND);
    let storm = (0..200).map(|i| {
        let app = app.clone();
        async move {
            let uri = match i % 5 {
                0 => "/v1/cve/CVE-2025-0001",
                1 => "/v1/cve?status=DRAFT",
                2 => "/v1/blocks/2",
                3 => "/v1/audit",
                _ => "/v1/events?since=0",
            };
            get(&app, uri).await.0
        }
    });
    for status in futures_join(storm).await {
        assert_eq!(status, StatusCode::OK);
    }
    assert_eq!(fs::read(config.ledger_path()).unwrap(), before);
}

async fn futures_join<F: std::future::Future<Output = StatusCode> + Send + 'static>(
    futures: impl Iterator<Item = F>,
) -> Vec<StatusCode> {
    let handles: Vec<_> = futures.map(tokio::spawn).collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

#[tokio::test]
async fn snapshot_follows_new_blocks() {
    let (_tmp, config) = populated();
    let app = app(&config);
    assert_eq!(get(&app, "/v1/cve/CVE-2025-0003").await.0, StatusCode::NOT_FOUND);
    {
        let mut node = Node::open_writer(&config.data_dir).unwrap();
        node.transact(&pid("cna.acme"), Operation::SubmitCve { record: record(3, "later") }).unwrap();
    }
    assert_eq!(get(&app, "/v1/cve/CVE-2025-0003").await.0, StatusCode::OK);
    // a torn tail is ignored until the writer repairs it
    let mut bytes = fs::read(config.ledger_path()).unwrap();
    bytes.extend_from_slice(b"{\"blockHa");
    fs::write(config.ledger_path(), &bytes).unwrap();
    assert_eq!(json(&get(&app, "/v1/audit").await.1)["valid"], true);
}
