// SPDX-License-Identifier: Apache-2.0

//! Scripted runs over a [`Network`]: timed actions in, a deterministic
//! trace out.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Network, NetworkConfig, NetworkError, SubmitError};
use crate::chaincode::seal::seal_record;
use crate::chaincode::{Event, Operation};
use crate::corrections::{select_canonical, Authority, MergeCandidate, SplitCandidate};
use crate::cve::{
    ranges_equal, ranges_overlap, version_ranges_subtract, CveId, CveRecord, CveStatus, Severity, SeverityLevel,
    Version, VersionRange,
};
use crate::identity::{ParticipantId, Role};
use crate::ledger::{query_public, QueryFilter};

/// One line of a scenario script: `{"atTick": 3, "action": "submit", "args": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioAction {
    pub at_tick: u64,
    #[serde(flatten)]
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "args", rename_all = "lowercase")]
pub enum Step {
    Submit(SubmitArgs),
    Status(StatusArgs),
    Reject(RejectArgs),
    Dispute(DisputeArgs),
    Merge(MergeArgs),
    Split(SplitArgs),
    Partialdup(PartialDupArgs),
    Onboard(MemberArgs),
    Revoke(MemberArgs),
    /// Embargo sweep at the current clock.
    Tick(TickArgs),
    Query(QueryFilter),
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Submit(_) => "submit",
            Step::Status(_) => "status",
            Step::Reject(_) => "reject",
            Step::Dispute(_) => "dispute",
            Step::Merge(_) => "merge",
            Step::Split(_) => "split",
            Step::Partialdup(_) => "partialdup",
            Step::Onboard(_) => "onboard",
            Step::Revoke(_) => "revoke",
            Step::Tick(_) => "tick",
            Step::Query(_) => "query",
        }
    }
}

/// A new record. Without `cveID` the next free number of `year` (default
/// 2025) is used. Records with an embargo are sealed before submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmitArgs {
    pub caller: ParticipantId,
    #[serde(rename = "cveID", default, skip_serializing_if = "Option::is_none")]
    pub cve_id: Option<CveId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<u32>,
    pub description: String,
    pub product: String,
    pub version: Vec<VersionRange>,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embargo_until: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<CveId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusArgs {
    pub caller: ParticipantId,
    #[serde(rename = "cveID")]
    pub cve_id: CveId,
    pub new_status: CveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RejectArgs {
    pub caller: ParticipantId,
    #[serde(rename = "cveID")]
    pub cve_id: CveId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DisputeArgs {
    pub caller: ParticipantId,
    #[serde(rename = "cveID")]
    pub cve_id: CveId,
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MergeArgs {
    pub caller: ParticipantId,
    pub candidates: Vec<MergeCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitArgs {
    pub caller: ParticipantId,
    #[serde(rename = "cveID")]
    pub cve_id: CveId,
    pub candidates: Vec<SplitCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartialDupArgs {
    pub caller: ParticipantId,
    #[serde(rename = "keepID")]
    pub keep_id: CveId,
    #[serde(rename = "reviseID")]
    pub revise_id: CveId,
}

/// Onboarding or revocation of `cna`, signed by `caller` (default: the
/// first governance member).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MemberArgs {
    pub cna: ParticipantId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caller: Option<ParticipantId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TickArgs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caller: Option<ParticipantId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeStatus {
    /// In a block and executed successfully.
    Committed,
    /// In a block but skipped at commit by a guard.
    Failed,
    /// Not endorsed; never reached the orderer.
    Refused,
    /// Read-only action answered.
    Answered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionOutcome {
    pub index: usize,
    pub at_tick: u64,
    pub action: String,
    pub status: OutcomeStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockTrace {
    pub height: u64,
    pub block_time: u64,
    pub tx_count: usize,
    pub failed_txs: usize,
    pub block_hash: String,
    /// State hash of each peer after this block, in peer order.
    pub state_hashes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceStats {
    pub actions: usize,
    pub txs_submitted: usize,
    pub txs_refused: usize,
    pub txs_committed: usize,
    pub txs_failed: usize,
    pub blocks: u64,
    pub ticks: u64,
    pub simulated_seconds: u64,
    /// Transactions in blocks per simulated second; absent when no
    /// simulated time passed.
    pub committed_per_sim_second: Option<f64>,
    pub latency_p50_seconds: u64,
    pub latency_p95_seconds: u64,
    pub latency_max_seconds: u64,
    pub latency_max_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationTrace {
    pub genesis_hash: String,
    pub peers: Vec<ParticipantId>,
    pub actions: Vec<ActionOutcome>,
    pub blocks: Vec<BlockTrace>,
    pub events: Vec<Event>,
    pub stats: TraceStats,
}

impl SimulationTrace {
    /// Every peer reported the same state hash at every height.
    pub fn replicas_agree(&self) -> bool {
        self.blocks.iter().all(|b| b.state_hashes.windows(2).all(|w| w[0] == w[1]))
    }
}

/// Bootstrap a network from `config` and run `script` on it.
pub fn run_scenario(config: NetworkConfig, script: &[ScenarioAction]) -> Result<SimulationTrace, NetworkError> {
    let mut network = Network::new(config)?;
    run_scenario_on(&mut network, script)
}

/// Run `script` on an existing network. Actions execute in tick order (script
/// order within a tick); whatever is pending at the end of a tick is
/// committed before the clock moves on.
pub fn run_scenario_on(network: &mut Network, script: &[ScenarioAction]) -> Result<SimulationTrace, NetworkError> {
    network.track_state_hashes();
    let mut order: Vec<usize> = (0..script.len()).collect();
    order.sort_by_key(|&i| script[i].at_tick);

    let mut runner = Runner { reserved: BTreeMap::new(), outcomes: Vec::with_capacity(script.len()) };
    for &index in &order {
        let action = &script[index];
        while network.tick() < action.at_tick {
            network.advance_tick()?;
        }
        let outcome = runner.perform(network, index, action)?;
        runner.outcomes.push(outcome);
    }
    if !script.is_empty() {
        network.advance_tick()?;
    }
    Ok(runner.finish(network))
}

struct Runner {
    /// Highest sequence handed out client-side per year.
    reserved: BTreeMap<u32, u64>,
    outcomes: Vec<ActionOutcome>,
}

impl Runner {
    fn next_id(&mut self, network: &Network, year: u32) -> CveId {
        let committed = network.state().id_counters.get(&year).copied().unwrap_or(0);
        let reserved = self.reserved.entry(year).or_insert(0);
        *reserved = (*reserved).max(committed) + 1;
        CveId { year, sequence: *reserved }
    }

    fn perform(
        &mut self,
        network: &mut Network,
        index: usize,
        action: &ScenarioAction,
    ) -> Result<ActionOutcome, NetworkError> {
        let mut outcome = ActionOutcome {
            index,
            at_tick: action.at_tick,
            action: action.step.name().to_string(),
            status: OutcomeStatus::Answered,
            tx_id: None,
            height: None,
            error: None,
            detail: None,
            result: None,
        };
        let governor = network.config().governance[0].clone();
        let (caller, operation) = match &action.step {
            Step::Query(filter) => {
                let views = query_public(network.state(), filter);
                outcome.result = Some(serde_json::to_value(views).expect("views serialize"));
                return Ok(outcome);
            }
            Step::Submit(args) => {
                let cve_id = match args.cve_id {
                    Some(id) => {
                        let reserved = self.reserved.entry(id.year).or_insert(0);
                        *reserved = (*reserved).max(id.sequence);
                        id
                    }
                    None => self.next_id(network, args.year.unwrap_or(2025)),
                };
                let mut record = CveRecord {
                    cve_id,
                    description: args.description.clone(),
                    product: args.product.clone(),
                    version: args.version.clone(),
                    severity: args.severity,
                    status: CveStatus::Draft,
                    embargo_until: args.embargo_until,
                    submitter_cna: args.caller.clone(),
                    references: args.references.clone(),
                    annotations: Vec::new(),
                    created_at: 0,
                    updated_at: 0,
                    seal: None,
                };
                if args.embargo_until.is_some() {
                    record = seal_record(&record, &network.config().embargo_key());
                }
                (args.caller.clone(), Operation::SubmitCve { record })
            }
            Step::Status(a) => {
                (a.caller.clone(), Operation::UpdateCveStatus { cve_id: a.cve_id, new_status: a.new_status })
            }
            Step::Reject(a) => (a.caller.clone(), Operation::RejectCve { cve_id: a.cve_id, reason: a.reason.clone() }),
            Step::Dispute(a) => (
                a.caller.clone(),
                Operation::DisputeCve { cve_id: a.cve_id, note: a.note.clone(), external_ref: a.external_ref.clone() },
            ),
            Step::Merge(a) => (a.caller.clone(), Operation::MergeCves { candidates: a.candidates.clone() }),
            Step::Split(a) => {
                (a.caller.clone(), Operation::SplitCve { cve_id: a.cve_id, candidates: a.candidates.clone() })
            }
            Step::Partialdup(a) => {
                (a.caller.clone(), Operation::ResolvePartialDuplicate { keep_id: a.keep_id, revise_id: a.revise_id })
            }
            Step::Onboard(a) => {
                let certificate = match network.identity(&a.cna) {
                    Some(id) if network.ca().live_serial(&a.cna) == Some(id.certificate.serial) => {
                        id.certificate.clone()
                    }
                    _ => network.enroll(&a.cna, Role::Cna)?,
                };
                let operation = Operation::OnboardCna {
                    cna_id: a.cna.clone(),
                    cert_hash: certificate.cert_hash(),
                    certificate,
                };
                (a.caller.clone().unwrap_or(governor), operation)
            }
            Step::Revoke(a) => (a.caller.clone().unwrap_or(governor), Operation::RevokeCna { cna_id: a.cna.clone() }),
            Step::Tick(a) => (a.caller.clone().unwrap_or(governor), Operation::CheckEmbargoReleases {}),
        };
        match network.submit(&caller, operation) {
            Ok(tx_id) => {
                // Resolved to COMMITTED or FAILED once the block is known.
                outcome.status = OutcomeStatus::Committed;
                outcome.tx_id = Some(tx_id);
            }
            Err(SubmitError::Refused(refusal)) => {
                outcome.status = OutcomeStatus::Refused;
                outcome.error = Some(refusal.code);
                outcome.detail = Some(refusal.detail);
            }
            Err(SubmitError::Ledger(e)) => return Err(e.into()),
        }
        Ok(outcome)
    }

    fn finish(mut self, network: &Network) -> SimulationTrace {
        let peer0 = &network.peers()[0];
        let mut by_tx: BTreeMap<&str, VecDeque<usize>> = BTreeMap::new();
        for (i, o) in self.outcomes.iter().enumerate() {
            if let Some(tx_id) = &o.tx_id {
                by_tx.entry(tx_id.as_str()).or_default().push_back(i);
            }
        }
        let mut resolved = Vec::new();
        for tx in &peer0.replica().outcomes {
            if let Some(i) = by_tx.get_mut(tx.tx_id.as_str()).and_then(VecDeque::pop_front) {
                resolved.push((i, tx.clone()));
            }
        }
        for (i, tx) in resolved {
            let o = &mut self.outcomes[i];
            o.height = Some(tx.height);
            if tx.error.is_some() {
                o.status = OutcomeStatus::Failed;
                o.error = tx.error;
                o.detail = tx.detail;
            }
        }
        self.outcomes.sort_by_key(|o| o.index);

        let logs: Vec<BTreeMap<u64, &String>> =
            network.peers().iter().map(|p| p.hash_log().iter().map(|(h, s)| (*h, s)).collect()).collect();
        let failed_per_height = peer0.replica().outcomes.iter().filter(|o| !o.committed()).fold(
            BTreeMap::<u64, usize>::new(),
            |mut acc, o| {
                *acc.entry(o.height).or_default() += 1;
                acc
            },
        );
        let blocks: Vec<BlockTrace> = network
            .chain()
            .blocks()
            .iter()
            .map(|b| BlockTrace {
                height: b.height,
                block_time: b.block_time,
                tx_count: b.txs.len(),
                failed_txs: failed_per_height.get(&b.height).copied().unwrap_or(0),
                block_hash: b.block_hash.clone(),
                state_hashes: logs.iter().filter_map(|log| log.get(&b.height).map(|s| (*s).clone())).collect(),
            })
            .collect();

        let chain = network.chain().blocks();
        let genesis_time = chain[0].block_time;
        let simulated_seconds = network.chain().tip().block_time - genesis_time;
        let txs_in_blocks: usize = chain.iter().map(|b| b.txs.len()).sum();
        let txs_failed = peer0.replica().outcomes.iter().filter(|o| !o.committed()).count();
        let mut latency: Vec<u64> = network.commits().iter().map(|c| c.committed_at - c.submitted_at).collect();
        latency.sort_unstable();
        let max_ticks = network.commits().iter().map(|c| c.committed_tick - c.submitted_tick).max().unwrap_or(0);
        let stats = TraceStats {
            actions: self.outcomes.len(),
            txs_submitted: self.outcomes.iter().filter(|o| o.tx_id.is_some()).count(),
            txs_refused: self.outcomes.iter().filter(|o| o.status == OutcomeStatus::Refused).count(),
            txs_committed: txs_in_blocks,
            txs_failed,
            blocks: network.chain().height(),
            ticks: network.tick(),
            simulated_seconds,
            committed_per_sim_second: (simulated_seconds > 0)
                .then(|| txs_in_blocks as f64 / simulated_seconds as f64),
            latency_p50_seconds: percentile(&latency, 50),
            latency_p95_seconds: percentile(&latency, 95),
            latency_max_seconds: latency.last().copied().unwrap_or(0),
            latency_max_ticks: max_ticks,
        };
        SimulationTrace {
            genesis_hash: chain[0].block_hash.clone(),
            peers: network.peers().iter().map(|p| p.peer_id().clone()).collect(),
            actions: self.outcomes,
            blocks,
            events: network.state().event_log.iter().cloned().collect(),
            stats,
        }
    }
}

/// Nearest-rank percentile of sorted `values`; 0 when empty.
pub fn percentile(sorted: &[u64], pct: usize) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (pct * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

// ---------------------------------------------------------------------------
// Workload generator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct ModelRecord {
    id: CveId,
    submitter: ParticipantId,
    status: CveStatus,
    embargo_until: Option<u64>,
    version: Vec<VersionRange>,
    /// Last tick an action touched this record; endorsement only sees
    /// committed state, so a record is used at most once per tick.
    touched: u64,
}

struct Model {
    rng: ChaCha8Rng,
    governor: ParticipantId,
    genesis_time: u64,
    /// CNA -> first tick at which it may transact.
    active: BTreeMap<ParticipantId, u64>,
    revoked: BTreeSet<ParticipantId>,
    next_cna: usize,
    next_seq: u64,
    records: Vec<ModelRecord>,
    script: Vec<ScenarioAction>,
    txs: usize,
}

const WORKLOAD_YEAR: u32 = 2025;

impl Model {
    fn push(&mut self, tick: u64, step: Step) {
        if !matches!(step, Step::Query(_)) {
            self.txs += 1;
        }
        self.script.push(ScenarioAction { at_tick: tick, step });
    }

    fn usable_cnas(&self, tick: u64) -> Vec<ParticipantId> {
        self.active.iter().filter(|(_, from)| **from <= tick).map(|(c, _)| c.clone()).collect()
    }

    fn pick<T: Clone>(&mut self, items: &[T]) -> Option<T> {
        (!items.is_empty()).then(|| items[self.rng.random_range(0..items.len())].clone())
    }

    fn eligible(&self, tick: u64, statuses: &[CveStatus]) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| self.records[i].touched < tick && statuses.contains(&self.records[i].status))
            .collect()
    }

    /// Submitter if it can still transact, else governance.
    fn corrector(&self, record: &ModelRecord, tick: u64) -> ParticipantId {
        match self.active.get(&record.submitter) {
            Some(from) if *from <= tick => record.submitter.clone(),
            _ => self.governor.clone(),
        }
    }

    fn severity(&mut self) -> Severity {
        let tenths: u16 = self.rng.random_range(1..=100);
        Severity::new(SeverityLevel::for_score_tenths(tenths), Some(f64::from(tenths) / 10.0))
    }

    fn range(&mut self) -> VersionRange {
        let lo: u64 = self.rng.random_range(0..6);
        let hi: u64 = self.rng.random_range(lo..6);
        VersionRange::inclusive(Version::new(1, lo, 0), Version::new(1, hi, 9))
    }

    fn onboard(&mut self, tick: u64) {
        let cna = match self.revoked.iter().next().cloned() {
            Some(c) if self.rng.random_bool(0.5) => {
                self.revoked.remove(&c);
                c
            }
            _ => {
                self.next_cna += 1;
                ParticipantId::new(format!("cna.w{}", self.next_cna)).expect("valid id")
            }
        };
        self.active.insert(cna.clone(), tick + 1);
        self.push(tick, Step::Onboard(MemberArgs { cna, caller: None }));
    }

    fn submit(&mut self, tick: u64, now: u64) -> bool {
        let cnas = self.usable_cnas(tick);
        let Some(caller) = self.pick(&cnas) else { return false };
        self.next_seq += 1;
        let id = CveId { year: WORKLOAD_YEAR, sequence: self.next_seq };
        let embargo_until = self.rng.random_bool(0.3).then(|| now + self.rng.random_range(1..30));
        let version = vec![self.range()];
        let severity = self.severity();
        let product = format!("product-{}", self.rng.random_range(0..5));
        self.records.push(ModelRecord {
            id,
            submitter: caller.clone(),
            status: if embargo_until.is_some() { CveStatus::Draft } else { CveStatus::Published },
            embargo_until,
            version: version.clone(),
            touched: tick,
        });
        self.push(
            tick,
            Step::Submit(SubmitArgs {
                caller,
                cve_id: Some(id),
                year: None,
                description: format!("Workload finding {} in {product}", id),
                product,
                version,
                severity,
                embargo_until,
                references: Vec::new(),
            }),
        );
        true
    }

    fn sweep(&mut self, tick: u64, now: u64) {
        for r in &mut self.records {
            if r.status == CveStatus::Draft && r.embargo_until.is_some_and(|t| t <= now) {
                r.status = CveStatus::Published;
                r.touched = tick;
            }
        }
        self.push(tick, Step::Tick(TickArgs::default()));
    }

    fn status(&mut self, tick: u64) -> bool {
        use CveStatus::*;
        let pool = self.eligible(tick, &[Draft, Published, Disputed]);
        let Some(i) = self.pick(&pool) else { return false };
        let new_status = match self.records[i].status {
            Published => Archived,
            _ => Published,
        };
        let caller = self.corrector(&self.records[i], tick);
        let r = &mut self.records[i];
        r.status = new_status;
        r.touched = tick;
        let cve_id = r.id;
        self.push(tick, Step::Status(StatusArgs { caller, cve_id, new_status }));
        true
    }

    fn dispute(&mut self, tick: u64) -> bool {
        let pool = self.eligible(tick, &[CveStatus::Published]);
        let cnas = self.usable_cnas(tick);
        let (Some(i), Some(caller)) = (self.pick(&pool), self.pick(&cnas)) else { return false };
        let r = &mut self.records[i];
        r.status = CveStatus::Disputed;
        r.touched = tick;
        let cve_id = r.id;
        self.push(
            tick,
            Step::Dispute(DisputeArgs {
                caller,
                cve_id,
                note: "vendor contests exploitability".into(),
                external_ref: Some(format!("https://example.org/advisory/{}", cve_id)),
            }),
        );
        true
    }

    fn reject(&mut self, tick: u64) -> bool {
        use CveStatus::*;
        let pool = self.eligible(tick, &[Draft, Published, Disputed]);
        let Some(i) = self.pick(&pool) else { return false };
        let caller = self.corrector(&self.records[i], tick);
        let r = &mut self.records[i];
        r.status = Rejected;
        r.touched = tick;
        let cve_id = r.id;
        self.push(tick, Step::Reject(RejectArgs { caller, cve_id, reason: "not a security issue".into() }));
        true
    }

    fn merge(&mut self, tick: u64) -> bool {
        let mut pool = self.eligible(tick, &[CveStatus::Published, CveStatus::Disputed]);
        let size = self.rng.random_range(2..=3);
        if pool.len() < size {
            return false;
        }
        let mut chosen = Vec::with_capacity(size);
        for _ in 0..size {
            chosen.push(pool.swap_remove(self.rng.random_range(0..pool.len())));
        }
        let authorities = [Authority::Researcher, Authority::Coordinator, Authority::Vendor];
        let candidates: Vec<MergeCandidate> = chosen
            .iter()
            .map(|&i| MergeCandidate {
                cve_id: self.records[i].id,
                reference_count: self.rng.random_range(0..3),
                authority: authorities[self.rng.random_range(0..3)],
                publicized_at: self.genesis_time + self.rng.random_range(0..3),
            })
            .collect();
        let canonical = select_canonical(&candidates).expect("distinct candidates");
        for &i in &chosen {
            let r = &mut self.records[i];
            if r.id != canonical {
                r.status = CveStatus::Rejected;
            }
            r.touched = tick;
        }
        let caller = self.governor.clone();
        self.push(tick, Step::Merge(MergeArgs { caller, candidates }));
        true
    }

    /// Must run before any submission of its tick so the ids it allocates
    /// on-ledger are the ones the model expects.
    fn split(&mut self, tick: u64) -> bool {
        let pool = self.eligible(tick, &[CveStatus::Published]);
        let Some(i) = self.pick(&pool) else { return false };
        let parts = self.rng.random_range(2..=3u32);
        let candidates: Vec<SplitCandidate> = (1..=parts)
            .map(|order| SplitCandidate {
                descriptor: format!("Split part {order} of {}", self.records[i].id),
                association_frequency: self.rng.random_range(0..3),
                severity: self.severity(),
                version_breadth: self.rng.random_range(0..3),
                mention_order: order,
            })
            .collect();
        self.records[i].touched = tick;
        let original = self.records[i].clone();
        for _ in 1..parts {
            self.next_seq += 1;
            self.records.push(ModelRecord {
                id: CveId { year: WORKLOAD_YEAR, sequence: self.next_seq },
                status: CveStatus::Published,
                embargo_until: None,
                touched: tick,
                ..original.clone()
            });
        }
        let caller = self.governor.clone();
        self.push(tick, Step::Split(SplitArgs { caller, cve_id: original.id, candidates }));
        true
    }

    fn partial_duplicate(&mut self, tick: u64) -> bool {
        let pool = self.eligible(tick, &[CveStatus::Published, CveStatus::Disputed]);
        for _ in 0..20 {
            let (Some(k), Some(r)) = (self.pick(&pool), self.pick(&pool)) else { return false };
            let (keep, revise) = (&self.records[k], &self.records[r]);
            if k == r || !ranges_overlap(&keep.version, &revise.version) || ranges_equal(&keep.version, &revise.version)
            {
                continue;
            }
            let remaining = version_ranges_subtract(&revise.version, &keep.version);
            let (keep_id, revise_id) = (keep.id, revise.id);
            self.records[k].touched = tick;
            let revised = &mut self.records[r];
            revised.touched = tick;
            if remaining.is_empty() {
                revised.status = CveStatus::Rejected;
            } else {
                revised.version = remaining;
            }
            let caller = self.governor.clone();
            self.push(tick, Step::Partialdup(PartialDupArgs { caller, keep_id, revise_id }));
            return true;
        }
        false
    }

    fn revoke(&mut self, tick: u64) -> bool {
        let cnas = self.usable_cnas(tick);
        if cnas.len() <= 2 {
            return false;
        }
        let Some(cna) = self.pick(&cnas) else { return false };
        self.active.remove(&cna);
        self.revoked.insert(cna.clone());
        self.push(tick, Step::Revoke(MemberArgs { cna, caller: None }));
        true
    }
}

/// A seeded mix of submissions (some embargoed), status changes, every
/// correction operation, embargo sweeps, onboarding, revocation and a few
/// queries, containing at least `tx_count` transaction-producing actions.
///
/// The generator tracks the expected registry so that nearly every action
/// is valid when endorsed; actions touching the same record never share a
/// tick.
pub fn mixed_workload(tx_count: usize, seed: u64, config: &NetworkConfig) -> Vec<ScenarioAction> {
    let mut m = Model {
        rng: ChaCha8Rng::seed_from_u64(seed),
        governor: config.governance[0].clone(),
        genesis_time: config.genesis_time,
        active: BTreeMap::new(),
        revoked: BTreeSet::new(),
        next_cna: 0,
        next_seq: 0,
        records: Vec::new(),
        script: Vec::new(),
        txs: 0,
    };
    for _ in 0..3 {
        m.onboard(0);
    }
    let mut tick = 1;
    while m.txs < tx_count {
        let now = config.orderer.time_at(config.genesis_time, tick);
        if m.rng.random_bool(0.3) {
            m.split(tick);
        }
        let actions = m.rng.random_range(6..14);
        let mut swept = false;
        for _ in 0..actions {
            let roll = m.rng.random_range(0..100);
            let done = match roll {
                0..=44 => m.submit(tick, now),
                45..=54 => m.status(tick),
                55..=61 => m.dispute(tick),
                62..=67 => m.reject(tick),
                68..=71 => m.merge(tick),
                72..=76 => m.partial_duplicate(tick),
                77..=87 if !swept => {
                    swept = true;
                    m.sweep(tick, now);
                    true
                }
                88..=90 => {
                    let year = Some(WORKLOAD_YEAR);
                    m.push(tick, Step::Query(QueryFilter { year, ..QueryFilter::default() }));
                    true
                }
                _ => false,
            };
            if !done {
                m.submit(tick, now);
            }
        }
        // Membership changes go last so earlier actions of the tick commit
        // under the old membership.
        if m.rng.random_bool(0.05) {
            m.onboard(tick);
        } else if m.rng.random_bool(0.04) {
            m.revoke(tick);
        }
        tick += 1;
    }
    m.script
}
