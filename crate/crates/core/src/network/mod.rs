// SPDX-License-Identifier: Apache-2.0

//! In-process simulation of the consortium topology: one peer per CNA
//! organization, a single ordering service, and endorsement policies.
//!
//! Everything runs on a logical clock, so a run is a pure function of the
//! configuration, the seed and the submission order. Transactions are
//! validated twice: peers simulate them against their current state before
//! endorsing, and every peer re-executes them at commit.

mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use scenario::{
    mixed_workload, percentile, run_scenario, run_scenario_on, ActionOutcome, BlockTrace, OutcomeStatus, ScenarioAction,
    SimulationTrace, Step, TraceStats,
};

use crate::chaincode::seal::EmbargoKey;
use crate::chaincode::{Chaincode, EventKind, Operation, TxContext, TxPayload, WorldState};
use crate::identity::{
    sign_payload, Certificate, CertificateAuthority, IdentityError, ParticipantId, Role, SigningKey,
};
use crate::ledger::{
    check_creator, check_proposal, replay, state_hash, verify_chain, Block, Chain, Endorsement, GenesisConfig,
    LedgerError, PeerIdentity, Replica, SignatureCache, Transaction, TrustAnchors,
};

/// Which endorsements a transaction needs before it may be ordered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum EndorsementPolicy {
    /// At least `n` distinct peers.
    AnyN { n: usize },
    /// Peers from a strict majority of `orgs`.
    MajorityOf { orgs: BTreeSet<ParticipantId> },
    /// A peer from every one of `orgs`.
    AllOf { orgs: BTreeSet<ParticipantId> },
}

impl Default for EndorsementPolicy {
    fn default() -> Self {
        EndorsementPolicy::AnyN { n: 1 }
    }
}

impl fmt::Display for EndorsementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |orgs: &BTreeSet<ParticipantId>| orgs.iter().map(|o| o.as_str()).collect::<Vec<_>>().join(",");
        match self {
            EndorsementPolicy::AnyN { n } => write!(f, "ANY_N({n})"),
            EndorsementPolicy::MajorityOf { orgs } => write!(f, "MAJORITY_OF({})", list(orgs)),
            EndorsementPolicy::AllOf { orgs } => write!(f, "ALL_OF({})", list(orgs)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("ANY_N requires n >= 1")]
    ZeroQuorum,
    #[error("policy organization set is empty")]
    EmptyOrgSet,
    #[error("policy names unknown organization {0}")]
    UnknownOrg(ParticipantId),
    #[error("ANY_N({n}) cannot be met by {peers} peers")]
    Unsatisfiable { n: usize, peers: usize },
}

impl EndorsementPolicy {
    /// `peer_count` distinct peers from `orgs` have endorsed.
    pub fn is_satisfied(&self, peer_count: usize, orgs: &BTreeSet<ParticipantId>) -> bool {
        match self {
            EndorsementPolicy::AnyN { n } => *n >= 1 && peer_count >= *n,
            EndorsementPolicy::MajorityOf { orgs: required } => {
                !required.is_empty() && 2 * required.intersection(orgs).count() > required.len()
            }
            EndorsementPolicy::AllOf { orgs: required } => !required.is_empty() && required.is_subset(orgs),
        }
    }

    /// Whether an endorsement from a peer of `org` can count toward the policy.
    pub fn counts(&self, org: &ParticipantId) -> bool {
        match self {
            EndorsementPolicy::AnyN { .. } => true,
            EndorsementPolicy::MajorityOf { orgs } | EndorsementPolicy::AllOf { orgs } => orgs.contains(org),
        }
    }

    /// Check the policy is well-formed and satisfiable by `peers`, given as
    /// their organizations (one entry per peer).
    pub fn validate(&self, peers: &[ParticipantId]) -> Result<(), PolicyError> {
        match self {
            EndorsementPolicy::AnyN { n: 0 } => Err(PolicyError::ZeroQuorum),
            EndorsementPolicy::AnyN { n } if *n > peers.len() => {
                Err(PolicyError::Unsatisfiable { n: *n, peers: peers.len() })
            }
            EndorsementPolicy::AnyN { .. } => Ok(()),
            EndorsementPolicy::MajorityOf { orgs } | EndorsementPolicy::AllOf { orgs } => {
                if orgs.is_empty() {
                    return Err(PolicyError::EmptyOrgSet);
                }
                match orgs.iter().find(|o| !peers.contains(o)) {
                    Some(unknown) => Err(PolicyError::UnknownOrg(unknown.clone())),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Block cutting and the logical clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct OrdererConfig {
    pub max_block_txs: usize,
    pub tick_seconds: u64,
    /// Block clock for ticks 0, 1, 2, ...; after the script runs out the
    /// clock advances by `tickSeconds` per tick.
    pub clock_source: Vec<u64>,
}

impl Default for OrdererConfig {
    fn default() -> Self {
        Self { max_block_txs: 100, tick_seconds: 1, clock_source: Vec::new() }
    }
}

impl OrdererConfig {
    /// Block clock at `tick`, for a network whose genesis time is `start`.
    pub fn time_at(&self, start: u64, tick: u64) -> u64 {
        match self.clock_source.len() as u64 {
            0 => start + tick * self.tick_seconds,
            len if tick < len => self.clock_source[tick as usize],
            len => self.clock_source[len as usize - 1] + (tick - (len - 1)) * self.tick_seconds,
        }
    }
}

/// Everything that determines a simulated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Master secret from which every key in the network is derived.
    pub seed: String,
    /// One peer (`peer0.<org>`) is run per organization.
    pub orgs: Vec<ParticipantId>,
    pub governance: Vec<ParticipantId>,
    pub policy: EndorsementPolicy,
    pub orderer: OrdererConfig,
    pub genesis_time: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::with_orgs(3)
    }
}

impl NetworkConfig {
    /// Default configuration with `count` organizations `cna.org1` ...
    pub fn with_orgs(count: usize) -> Self {
        Self {
            seed: "cvechain-sim".into(),
            orgs: (1..=count).map(|i| ParticipantId::new(format!("cna.org{i}")).expect("valid id")).collect(),
            governance: vec![ParticipantId::new("gov.board1").expect("valid id")],
            policy: EndorsementPolicy::default(),
            orderer: OrdererConfig::default(),
            genesis_time: 1_750_000_000,
        }
    }

    pub fn peer_id(org: &ParticipantId) -> ParticipantId {
        ParticipantId::new(format!("peer0.{org}")).expect("prefixing a valid id keeps it valid")
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::Config(m));
        if self.orgs.is_empty() {
            return bad("at least one organization is required".into());
        }
        if self.orgs.iter().collect::<BTreeSet<_>>().len() != self.orgs.len() {
            return bad("organizations must be distinct".into());
        }
        if self.governance.is_empty() {
            return bad("at least one governance member is required".into());
        }
        if self.governance.iter().collect::<BTreeSet<_>>().len() != self.governance.len() {
            return bad("governance members must be distinct".into());
        }
        self.policy.validate(&self.orgs).map_err(|e| NetworkError::Config(e.to_string()))?;
        if self.orderer.max_block_txs == 0 || self.orderer.tick_seconds == 0 {
            return bad("maxBlockTxs and tickSeconds must be positive".into());
        }
        let clock = &self.orderer.clock_source;
        if clock.first().is_some_and(|&t| t < self.genesis_time) || clock.windows(2).any(|w| w[1] < w[0]) {
            return bad("clockSource must be non-decreasing and start at or after genesisTime".into());
        }
        Ok(())
    }

    pub fn embargo_key(&self) -> EmbargoKey {
        EmbargoKey::derive(self.seed.as_bytes(), "embargo")
    }

    pub fn ca_key(&self) -> SigningKey {
        SigningKey::derive(self.seed.as_bytes(), "ca")
    }

    /// Deterministic key of participant `id`.
    pub fn participant_key(&self, id: &ParticipantId) -> SigningKey {
        SigningKey::derive(self.seed.as_bytes(), id.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// A signing key with the certificate that vouches for it.
#[derive(Debug, Clone)]
pub struct Identity {
    pub key: SigningKey,
    pub certificate: Certificate,
}

/// Why a transaction was not endorsed. `code` is the chaincode error name,
/// or one of `InvalidTransaction`, `DuplicateTxId`, `UnauthorizedCaller`
/// (caller certificate rejected), `UnknownIdentity` or `PolicyUnsatisfied`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "camelCase")]
#[error("{code}: {detail}")]
pub struct Refusal {
    pub peer_id: Option<ParticipantId>,
    pub code: String,
    pub detail: String,
}

impl Refusal {
    fn new(peer_id: Option<&ParticipantId>, code: &str, detail: impl Into<String>) -> Self {
        Self { peer_id: peer_id.cloned(), code: code.to_string(), detail: detail.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SubmitError {
    #[error("endorsement refused: {0}")]
    Refused(Refusal),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// One organization's peer: its own chain replica and world state.
pub struct Peer {
    peer_id: ParticipantId,
    org: ParticipantId,
    key: SigningKey,
    chain: Chain,
    replica: Replica,
    cache: SignatureCache,
    hash_log: Option<Vec<(u64, String)>>,
}

impl Peer {
    pub fn peer_id(&self) -> &ParticipantId {
        &self.peer_id
    }

    pub fn org(&self) -> &ParticipantId {
        &self.org
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn replica(&self) -> &Replica {
        &self.replica
    }

    pub fn state(&self) -> &WorldState {
        &self.replica.state
    }

    pub fn state_hash(&self) -> String {
        state_hash(&self.replica.state)
    }

    /// `(height, stateHash)` after each commit, once tracking is enabled.
    pub fn hash_log(&self) -> &[(u64, String)] {
        self.hash_log.as_deref().unwrap_or(&[])
    }

    /// Simulate `tx` against a copy of the local state at block clock `now`
    /// and sign the payload if every check passes.
    pub fn endorse(
        &mut self,
        tx: &Transaction,
        chaincode: &Chaincode,
        now: u64,
    ) -> Result<Endorsement, Refusal> {
        let me = Some(&self.peer_id);
        let bytes = check_proposal(tx, self.chain.config(), &mut self.cache)
            .map_err(|(_, detail)| Refusal::new(me, "InvalidTransaction", detail))?;
        if self.replica.has_seen(&tx.tx_id) {
            return Err(Refusal::new(me, "DuplicateTxId", tx.tx_id.clone()));
        }
        check_creator(&self.replica.state, &tx.creator)
            .map_err(|detail| Refusal::new(me, "UnauthorizedCaller", detail))?;
        let mut simulated = self.replica.state.clone();
        let ctx = TxContext { height: self.replica.height + 1, tx_index: 0, now };
        chaincode
            .execute(&mut simulated, &tx.payload, &ctx)
            .map_err(|e| Refusal::new(me, e.code(), e.to_string()))?;
        Ok(Endorsement { peer_id: self.peer_id.clone(), signature: sign_payload(&self.key, &bytes) })
    }

    /// Verify a block from the orderer, append it and execute it.
    pub fn commit(&mut self, block: &Block, chaincode: &Chaincode) -> Result<(), LedgerError> {
        self.chain.push_verified_with(block.clone(), &mut self.cache)?;
        self.replica.apply_block(block, chaincode);
        if self.hash_log.is_some() {
            let entry = (block.height, self.state_hash());
            self.hash_log.as_mut().expect("checked").push(entry);
        }
        Ok(())
    }
}

/// A transaction waiting for the orderer.
#[derive(Debug, Clone)]
struct Pending {
    arrival: u64,
    submitted_at: u64,
    submitted_tick: u64,
    tx: Transaction,
}

/// When a transaction was proposed and when it was committed, on the
/// logical clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommitRecord {
    pub tx_id: String,
    pub height: u64,
    pub submitted_at: u64,
    pub committed_at: u64,
    pub submitted_tick: u64,
    pub committed_tick: u64,
}

/// Peers, orderer, CA and client wallet of one simulated consortium.
pub struct Network {
    config: NetworkConfig,
    ca: CertificateAuthority,
    chaincode: Chaincode,
    orderer: Chain,
    order_cache: SignatureCache,
    peers: Vec<Peer>,
    wallet: BTreeMap<ParticipantId, Identity>,
    pending: Vec<Pending>,
    next_arrival: u64,
    tick: u64,
    now: u64,
    commits: Vec<CommitRecord>,
}

impl Network {
    /// Bootstrap a fresh network: CA, peer and governance certificates and
    /// the genesis block, all derived from the seed.
    pub fn new(config: NetworkConfig) -> Result<Self, NetworkError> {
        config.validate()?;
        let ca = CertificateAuthority::new(config.ca_key());
        let t0 = config.genesis_time;
        let mut peer_identities = Vec::with_capacity(config.orgs.len());
        for org in &config.orgs {
            let peer_id = NetworkConfig::peer_id(org);
            let key = config.participant_key(&peer_id);
            let certificate = ca.issue_certificate(peer_id.clone(), Role::Peer, key.public_key(), t0)?;
            peer_identities.push(PeerIdentity { peer_id, org: org.clone(), certificate });
        }
        let mut wallet = BTreeMap::new();
        for member in &config.governance {
            let key = config.participant_key(member);
            let certificate = ca.issue_certificate(member.clone(), Role::Governance, key.public_key(), t0)?;
            wallet.insert(member.clone(), Identity { key, certificate });
        }
        let genesis_config = GenesisConfig {
            ca_public_key: ca.public_key(),
            governance: config.governance.clone(),
            peers: peer_identities,
            policy: config.policy.clone(),
        };
        let genesis = Block::genesis(genesis_config, ca.signing_key(), t0);
        let mut network = Self::resume(config, ca, vec![genesis])?;
        network.wallet = wallet;
        Ok(network)
    }

    /// Rebuild a network from a committed chain. The chain is verified and
    /// replayed once; every peer starts from the same replica.
    pub fn resume(config: NetworkConfig, ca: CertificateAuthority, blocks: Vec<Block>) -> Result<Self, NetworkError> {
        let chain = Chain::from_blocks(blocks)?;
        let report = verify_chain(chain.blocks(), &TrustAnchors::ca(ca.public_key()));
        if !report.valid {
            return Err(NetworkError::Config(format!(
                "chain fails verification at height {:?}: {}",
                report.first_bad_height,
                report.detail.unwrap_or_default()
            )));
        }
        let chaincode = Chaincode::new(Some(config.embargo_key()));
        let replica = replay(chain.blocks(), &chaincode)?;
        let mut peers = Vec::new();
        for identity in &chain.config().peers {
            let key = config.participant_key(&identity.peer_id);
            if key.public_key() != identity.certificate.public_key {
                return Err(NetworkError::Config(format!("seed does not match key of {}", identity.peer_id)));
            }
            peers.push(Peer {
                peer_id: identity.peer_id.clone(),
                org: identity.org.clone(),
                key,
                chain: chain.clone(),
                replica: replica.clone(),
                cache: SignatureCache::default(),
                hash_log: None,
            });
        }
        let now = chain.tip().block_time;
        Ok(Self {
            config,
            ca,
            chaincode,
            orderer: chain,
            order_cache: SignatureCache::default(),
            peers,
            wallet: BTreeMap::new(),
            pending: Vec::new(),
            next_arrival: 0,
            tick: 0,
            now,
            commits: Vec::new(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn ca(&self) -> &CertificateAuthority {
        &self.ca
    }

    pub fn chaincode(&self) -> &Chaincode {
        &self.chaincode
    }

    pub fn peers(&self) -> &[Peer] {
        &self.peers
    }

    /// The orderer's copy of the chain.
    pub fn chain(&self) -> &Chain {
        &self.orderer
    }

    /// State of the first peer; all peers agree after every commit.
    pub fn state(&self) -> &WorldState {
        self.peers[0].state()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Current block clock.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn commits(&self) -> &[CommitRecord] {
        &self.commits
    }

    /// Start recording every peer's state hash after each block.
    pub fn track_state_hashes(&mut self) {
        for peer in &mut self.peers {
            if peer.hash_log.is_none() {
                peer.hash_log = Some(vec![(peer.replica.height, peer.state_hash())]);
            }
        }
    }

    pub fn identity(&self, id: &ParticipantId) -> Option<&Identity> {
        self.wallet.get(id)
    }

    pub fn add_identity(&mut self, identity: Identity) {
        self.wallet.insert(identity.certificate.subject.clone(), identity);
    }

    /// Have the CA issue a certificate for `subject` (key derived from the
    /// seed) and keep it in the wallet.
    pub fn enroll(&mut self, subject: &ParticipantId, role: Role) -> Result<Certificate, IdentityError> {
        let key = self.config.participant_key(subject);
        let certificate = self.ca.issue_certificate(subject.clone(), role, key.public_key(), self.now)?;
        self.wallet.insert(subject.clone(), Identity { key, certificate: certificate.clone() });
        Ok(certificate)
    }

    /// Sign `operation` as `caller` using the wallet.
    pub fn propose(&self, caller: &ParticipantId, operation: Operation) -> Result<Transaction, Refusal> {
        let identity = self
            .wallet
            .get(caller)
            .ok_or_else(|| Refusal::new(None, "UnknownIdentity", format!("no key for {caller}")))?;
        Ok(propose_with(identity, operation, self.now))
    }

    /// Collect endorsements in peer order until the policy is met.
    pub fn endorse(&mut self, mut tx: Transaction) -> Result<Transaction, Refusal> {
        let policy = self.orderer.config().policy.clone();
        let mut orgs = BTreeSet::new();
        let mut first_refusal = None;
        for peer in &mut self.peers {
            if policy.is_satisfied(tx.endorsements.len(), &orgs) {
                break;
            }
            if !policy.counts(&peer.org) {
                continue;
            }
            match peer.endorse(&tx, &self.chaincode, self.now) {
                Ok(endorsement) => {
                    orgs.insert(peer.org.clone());
                    tx.endorsements.push(endorsement);
                }
                Err(refusal) => {
                    first_refusal.get_or_insert(refusal);
                }
            }
        }
        if policy.is_satisfied(tx.endorsements.len(), &orgs) {
            Ok(tx)
        } else {
            Err(first_refusal
                .unwrap_or_else(|| Refusal::new(None, "PolicyUnsatisfied", format!("policy {policy} not met"))))
        }
    }

    /// Propose, endorse and enqueue. Returns the transaction id.
    pub fn submit(&mut self, caller: &ParticipantId, operation: Operation) -> Result<String, SubmitError> {
        let tx = self.propose(caller, operation).map_err(SubmitError::Refused)?;
        self.submit_transaction(tx)
    }

    /// Endorse a signed transaction and hand it to the orderer, which cuts a
    /// block as soon as `maxBlockTxs` are waiting.
    pub fn submit_transaction(&mut self, tx: Transaction) -> Result<String, SubmitError> {
        let arrival = self.next_arrival;
        self.next_arrival += 1;
        self.submit_with_arrival(tx, arrival)
    }

    /// Like [`Network::submit_transaction`] with an explicit arrival number;
    /// transactions with equal arrival numbers are ordered by id.
    pub fn submit_with_arrival(&mut self, tx: Transaction, arrival: u64) -> Result<String, SubmitError> {
        let tx = self.endorse(tx).map_err(SubmitError::Refused)?;
        let tx_id = tx.tx_id.clone();
        self.pending.push(Pending { arrival, submitted_at: self.now, submitted_tick: self.tick, tx });
        self.next_arrival = self.next_arrival.max(arrival + 1);
        if self.pending.len() >= self.config.orderer.max_block_txs {
            self.order_and_commit()?;
        }
        Ok(tx_id)
    }

    /// Order every pending transaction (FIFO by arrival, ties by txId), cut
    /// blocks of at most `maxBlockTxs` at the current clock and have every
    /// peer commit them.
    pub fn order_and_commit(&mut self) -> Result<Vec<Block>, LedgerError> {
        let mut pending = std::mem::take(&mut self.pending);
        pending.sort_by(|a, b| (a.arrival, &a.tx.tx_id).cmp(&(b.arrival, &b.tx.tx_id)));
        let mut cut = Vec::new();
        let mut rest = pending.into_iter().peekable();
        while rest.peek().is_some() {
            let batch: Vec<Pending> = rest.by_ref().take(self.config.orderer.max_block_txs).collect();
            let submitted: Vec<(u64, u64)> = batch.iter().map(|p| (p.submitted_at, p.submitted_tick)).collect();
            let txs = batch.into_iter().map(|p| p.tx).collect();
            let block = self.orderer.next_block_with(txs, self.now, &mut self.order_cache)?;
            for peer in &mut self.peers {
                peer.commit(&block, &self.chaincode)?;
            }
            self.orderer.push_verified_with(block.clone(), &mut self.order_cache)?;
            self.mirror_revocations(block.height);
            for (tx, (submitted_at, submitted_tick)) in block.txs.iter().zip(submitted) {
                self.commits.push(CommitRecord {
                    tx_id: tx.tx_id.clone(),
                    height: block.height,
                    submitted_at,
                    committed_at: block.block_time,
                    submitted_tick,
                    committed_tick: self.tick,
                });
            }
            cut.push(block);
        }
        Ok(cut)
    }

    /// Keep the CA's revocation list in step with serials revoked on-ledger
    /// at `height`, so a revoked CNA can later be issued a fresh certificate.
    fn mirror_revocations(&self, height: u64) {
        let log = &self.peers[0].state().event_log;
        for event in log.iter().rev().take_while(|e| e.block_height == height) {
            if event.kind == EventKind::CnaRevoked {
                if let Some(serial) = event.payload.get("serial").and_then(|v| v.as_u64()) {
                    self.ca.revoke_certificate(serial);
                }
            }
        }
    }

    /// Commit what is pending, then move the logical clock to the next tick.
    pub fn advance_tick(&mut self) -> Result<Vec<Block>, LedgerError> {
        let blocks = self.order_and_commit()?;
        self.tick += 1;
        self.now = self.now.max(self.config.orderer.time_at(self.config.genesis_time, self.tick));
        Ok(blocks)
    }

    /// Set the block clock directly (used by the CLI, which has no ticks).
    pub fn set_clock(&mut self, now: u64) -> Result<(), LedgerError> {
        if now < self.now {
            return Err(LedgerError::ClockRegression { block_time: now, parent_time: self.now });
        }
        self.now = now;
        Ok(())
    }
}

/// Sign `operation` as `identity` with proposal clock `now`.
pub fn propose_with(identity: &Identity, operation: Operation, now: u64) -> Transaction {
    let payload = TxPayload::new(operation, identity.certificate.subject.clone(), now);
    Transaction::new(payload, identity.certificate.clone(), &identity.key)
}

#[cfg(test)]
mod tests;
