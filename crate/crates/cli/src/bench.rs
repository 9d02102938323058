// SPDX-License-Identifier: Apache-2.0

//! Throughput and submit-to-commit latency of the in-process network.
//!
//! Client proposals are signed before the clock starts; the timed section
//! covers endorsement, ordering and commit on every peer.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use cvechain_core::chaincode::Operation;
use cvechain_core::cve::{CveId, CveRecord, CveStatus, Severity, SeverityLevel, Version, VersionRange};
use cvechain_core::identity::{ParticipantId, Role};
use cvechain_core::ledger::{state_hash, Transaction};
use cvechain_core::network::{percentile, Network, NetworkConfig, NetworkError, SubmitError};

/// Submitting CNAs; proposals are spread over them round-robin.
const BENCH_CNAS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub txs: usize,
    pub peers: usize,
    pub committed: usize,
    pub failed: usize,
    pub blocks: u64,
    /// Committed transactions per wall-clock second.
    pub tps: f64,
    pub p50_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub max_latency_ms: f64,
    pub elapsed_ms: f64,
    pub state_hash: String,
    pub tip_hash: String,
    pub replicas_agree: bool,
}

impl BenchReport {
    /// The report with wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self { tps: 0.0, p50_latency_ms: 0.0, p95_latency_ms: 0.0, max_latency_ms: 0.0, elapsed_ms: 0.0, ..self.clone() }
    }
}

fn bench_record(i: usize, cna: &ParticipantId) -> CveRecord {
    let minor = (i % 17) as u64;
    CveRecord {
        cve_id: CveId { year: 2025, sequence: i as u64 + 1 },
        description: format!("Benchmark vulnerability {i}: heap overflow in request parser"),
        product: format!("product-{}", i % 50),
        version: vec![VersionRange::inclusive(Version::new(1, minor, 0), Version::new(1, minor, 9))],
        severity: Severity::new(SeverityLevel::High, Some(7.5)),
        status: CveStatus::Draft,
        embargo_until: None,
        submitter_cna: cna.clone(),
        references: Vec::new(),
        annotations: Vec::new(),
        created_at: 0,
        updated_at: 0,
        seal: None,
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Onboard the submitting CNAs and sign `tx_count` submissions.
fn prepare(tx_count: usize, peer_count: usize) -> Result<(Network, Vec<Transaction>), NetworkError> {
    let mut network = Network::new(NetworkConfig::with_orgs(peer_count))?;
    let governor = network.config().governance[0].clone();
    let cnas: Vec<ParticipantId> =
        (1..=BENCH_CNAS).map(|i| ParticipantId::new(format!("cna.bench{i}")).expect("valid id")).collect();
    for cna in &cnas {
        let certificate = network.enroll(cna, Role::Cna)?;
        let op = Operation::OnboardCna { cna_id: cna.clone(), cert_hash: certificate.cert_hash(), certificate };
        network.submit(&governor, op).map_err(|e| match e {
            SubmitError::Refused(r) => NetworkError::Config(format!("bench setup refused: {r}")),
            SubmitError::Ledger(e) => e.into(),
        })?;
    }
    network.advance_tick()?;
    let proposals = (0..tx_count)
        .map(|i| {
            let cna = &cnas[i % cnas.len()];
            network.propose(cna, Operation::SubmitCve { record: bench_record(i, cna) }).expect("enrolled")
        })
        .collect();
    Ok((network, proposals))
}

/// Submit `tx_count` valid records to a network of `peer_count` peers and
/// measure commit throughput and submit-to-commit latency.
pub fn bench(tx_count: usize, peer_count: usize) -> Result<BenchReport, NetworkError> {
    let (mut network, proposals) = prepare(tx_count, peer_count)?;
    let setup_commits = network.commits().len();
    let setup_height = network.chain().height();

    let mut submitted: HashMap<String, Instant> = HashMap::with_capacity(tx_count);
    let mut latencies: Vec<Duration> = Vec::with_capacity(tx_count);
    let mut seen = setup_commits;
    let mut refused = 0;
    let start = Instant::now();
    let mut collect = |network: &Network, submitted: &mut HashMap<String, Instant>, seen: &mut usize| {
        let now = Instant::now();
        for record in &network.commits()[*seen..] {
            if let Some(at) = submitted.remove(&record.tx_id) {
                latencies.push(now - at);
            }
        }
        *seen = network.commits().len();
    };
    for tx in proposals {
        submitted.insert(tx.tx_id.clone(), Instant::now());
        match network.submit_transaction(tx) {
            Ok(_) => {}
            Err(SubmitError::Refused(r)) => {
                log::warn!("bench proposal refused: {r}");
                refused += 1;
            }
            Err(SubmitError::Ledger(e)) => return Err(e.into()),
        }
        if network.commits().len() > seen {
            collect(&network, &mut submitted, &mut seen);
        }
    }
    network.order_and_commit()?;
    collect(&network, &mut submitted, &mut seen);
    let elapsed = start.elapsed();

    let outcomes = &network.peers()[0].replica().outcomes;
    let measured = outcomes.iter().filter(|o| o.height > setup_height);
    let failed = measured.clone().filter(|o| !o.committed()).count() + refused;
    let committed = measured.filter(|o| o.committed()).count();

    latencies.sort();
    let micros: Vec<u64> = latencies.iter().map(|d| d.as_micros() as u64).collect();
    let pct = |p| percentile(&micros, p) as f64 / 1e3;
    let hashes: Vec<String> = network.peers().iter().map(|p| p.state_hash()).collect();
    Ok(BenchReport {
        txs: tx_count,
        peers: peer_count,
        committed,
        failed,
        blocks: network.chain().height() - setup_height,
        tps: if committed == 0 { 0.0 } else { committed as f64 / elapsed.as_secs_f64() },
        p50_latency_ms: pct(50),
        p95_latency_ms: pct(95),
        max_latency_ms: latencies.last().copied().map_or(0.0, ms),
        elapsed_ms: ms(elapsed),
        state_hash: state_hash(network.state()),
        tip_hash: network.chain().tip().block_hash.clone(),
        replicas_agree: hashes.windows(2).all(|w| w[0] == w[1]),
    })
}
