// SPDX-License-Identifier: Apache-2.0

//! Hash-chained block store: transaction and block formats, chain
//! verification, replay into world state, and public queries.

mod query;
pub mod store;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

pub use query::{query_public, QueryFilter, RecordView};

use crate::canonical;
use crate::chaincode::{Chaincode, TxContext, TxPayload, WorldState};
use crate::identity::{
    sign_payload, verify_certificate, verify_payload, Certificate, ParticipantId, PublicKey, RevocationList, Role,
    Signature, SigningKey,
};
use crate::network::EndorsementPolicy;

pub const ZERO_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Endorsement {
    pub peer_id: ParticipantId,
    pub signature: Signature,
}

/// A signed chaincode invocation. `creator` is the caller's certificate,
/// carried so the chain can be audited without replaying state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Transaction {
    pub tx_id: String,
    pub payload: TxPayload,
    pub creator: Certificate,
    pub caller_signature: Signature,
    pub endorsements: Vec<Endorsement>,
}

impl Transaction {
    /// Sign `payload` as `creator`. Endorsements are attached afterwards.
    pub fn new(payload: TxPayload, creator: Certificate, key: &SigningKey) -> Self {
        let bytes = payload.to_canonical_bytes();
        Self {
            tx_id: canonical::sha256_hex(&bytes),
            caller_signature: sign_payload(key, &bytes),
            payload,
            creator,
            endorsements: Vec::new(),
        }
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        self.payload.to_canonical_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PeerIdentity {
    pub peer_id: ParticipantId,
    pub org: ParticipantId,
    pub certificate: Certificate,
}

/// Network configuration fixed at genesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GenesisConfig {
    pub ca_public_key: PublicKey,
    pub governance: Vec<ParticipantId>,
    pub peers: Vec<PeerIdentity>,
    pub policy: EndorsementPolicy,
}

impl GenesisConfig {
    pub fn digest(&self) -> String {
        canonical::hash_hex(self)
    }

    pub fn peer(&self, id: &ParticipantId) -> Option<&PeerIdentity> {
        self.peers.iter().find(|p| &p.peer_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Genesis {
    pub config: GenesisConfig,
    /// CA signature over the config digest.
    pub ca_signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Block {
    pub height: u64,
    pub prev_hash: String,
    pub block_time: u64,
    pub txs: Vec<Transaction>,
    /// Present on block 0 only.
    #[serde(default)]
    pub genesis: Option<Genesis>,
    pub block_hash: String,
}

impl Block {
    pub fn genesis(config: GenesisConfig, ca_key: &SigningKey, block_time: u64) -> Self {
        let ca_signature = sign_payload(ca_key, config.digest().as_bytes());
        let mut block = Self {
            height: 0,
            prev_hash: ZERO_HASH.to_string(),
            block_time,
            txs: Vec::new(),
            genesis: Some(Genesis { config, ca_signature }),
            block_hash: String::new(),
        };
        block.block_hash = block.compute_hash();
        block
    }

    /// SHA-256 over height, previous hash, block time and the transaction
    /// ids (for genesis, the config digest stands in for the ids).
    pub fn compute_hash(&self) -> String {
        let mut bytes = Vec::with_capacity(80 + 64 * self.txs.len());
        bytes.extend_from_slice(&self.height.to_be_bytes());
        bytes.extend_from_slice(self.prev_hash.as_bytes());
        bytes.extend_from_slice(&self.block_time.to_be_bytes());
        if let Some(genesis) = &self.genesis {
            bytes.extend_from_slice(genesis.config.digest().as_bytes());
        }
        for tx in &self.txs {
            bytes.extend_from_slice(tx.tx_id.as_bytes());
        }
        canonical::sha256_hex(&bytes)
    }

    pub fn to_line(&self) -> String {
        let mut line = canonical::to_string(self);
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditReason {
    HashMismatch,
    SignatureInvalid,
    EndorsementInsufficient,
    ClockRegression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub valid: bool,
    pub first_bad_height: Option<u64>,
    pub reason: Option<AuditReason>,
    pub detail: Option<String>,
    pub blocks: u64,
}

impl AuditReport {
    fn ok(blocks: u64) -> Self {
        Self { valid: true, first_bad_height: None, reason: None, detail: None, blocks }
    }

    pub fn bad(height: u64, reason: AuditReason, detail: impl Into<String>, blocks: u64) -> Self {
        Self { valid: false, first_bad_height: Some(height), reason: Some(reason), detail: Some(detail.into()), blocks }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LedgerError {
    #[error("transaction {tx_id} does not satisfy the endorsement policy")]
    PolicyUnsatisfied { tx_id: String },
    #[error("block time {block_time} is earlier than parent time {parent_time}")]
    ClockRegression { block_time: u64, parent_time: u64 },
    #[error("invalid transaction {tx_id}: {detail}")]
    InvalidTransaction { tx_id: String, detail: String },
    #[error("chain has no genesis block")]
    MissingGenesis,
    #[error("malformed ledger line {line}: {detail}")]
    Malformed { line: u64, detail: String },
}

/// Caller-supplied roots of trust for auditing a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustAnchors {
    pub ca_public_key: PublicKey,
    /// If set, the genesis block must have exactly this hash.
    pub genesis_hash: Option<String>,
}

impl TrustAnchors {
    pub fn ca(ca_public_key: PublicKey) -> Self {
        Self { ca_public_key, genesis_hash: None }
    }
}

/// Memoizes successful signature checks so repeated audits of mostly
/// unchanged chains stay cheap.
#[derive(Default)]
pub struct SignatureCache {
    verified: HashSet<[u8; 32]>,
}

impl SignatureCache {
    pub fn verify(&mut self, key: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
        let mut material = Vec::with_capacity(96 + msg.len());
        material.extend_from_slice(key.as_bytes());
        material.extend_from_slice(&sig.to_bytes());
        material.extend_from_slice(msg);
        let digest = canonical::sha256(&material);
        if self.verified.contains(&digest) {
            return true;
        }
        let ok = verify_payload(key, msg, sig);
        if ok {
            self.verified.insert(digest);
        }
        ok
    }
}

/// State-independent validity of one transaction: id, creator certificate,
/// caller signature, endorsement signatures and policy.
pub fn check_transaction(
    tx: &Transaction,
    config: &GenesisConfig,
    cache: &mut SignatureCache,
) -> Result<(), (AuditReason, String)> {
    let bytes = check_proposal(tx, config, cache)?;
    let mut endorsing_peers = BTreeSet::new();
    let mut endorsing_orgs = BTreeSet::new();
    for e in &tx.endorsements {
        let Some(peer) = config.peer(&e.peer_id) else {
            return Err((AuditReason::SignatureInvalid, format!("unknown endorsing peer {}", e.peer_id)));
        };
        if !cache.verify(&peer.certificate.public_key, &bytes, &e.signature) {
            return Err((AuditReason::SignatureInvalid, format!("endorsement by {} invalid", e.peer_id)));
        }
        if !endorsing_peers.insert(e.peer_id.clone()) {
            return Err((AuditReason::EndorsementInsufficient, format!("duplicate endorsement by {}", e.peer_id)));
        }
        endorsing_orgs.insert(peer.org.clone());
    }
    if !config.policy.is_satisfied(endorsing_peers.len(), &endorsing_orgs) {
        return Err((AuditReason::EndorsementInsufficient, format!("policy not met for {}", tx.tx_id)));
    }
    Ok(())
}

/// Checks on a signed proposal before any endorsement: id, creator
/// certificate and caller signature. Returns the payload bytes.
pub fn check_proposal(
    tx: &Transaction,
    config: &GenesisConfig,
    cache: &mut SignatureCache,
) -> Result<Vec<u8>, (AuditReason, String)> {
    let bytes = tx.payload_bytes();
    if canonical::sha256_hex(&bytes) != tx.tx_id {
        return Err((AuditReason::HashMismatch, format!("txId {} does not match payload", tx.tx_id)));
    }
    let creator = &tx.creator;
    if creator.subject != tx.payload.caller {
        return Err((AuditReason::SignatureInvalid, format!("creator {} is not caller", creator.subject)));
    }
    if !creator.role.can_transact() {
        return Err((AuditReason::SignatureInvalid, format!("role {} cannot transact", creator.role.as_str())));
    }
    if !cache.verify(&config.ca_public_key, &creator.signed_bytes(), &creator.ca_signature) {
        return Err((AuditReason::SignatureInvalid, format!("certificate of {} not issued by CA", creator.subject)));
    }
    if !cache.verify(&creator.public_key, &bytes, &tx.caller_signature) {
        return Err((AuditReason::SignatureInvalid, format!("caller signature on {} invalid", tx.tx_id)));
    }
    Ok(bytes)
}

fn check_genesis(block: &Block, anchors: &TrustAnchors, cache: &mut SignatureCache) -> Result<(), (AuditReason, String)> {
    let Some(genesis) = &block.genesis else {
        return Err((AuditReason::HashMismatch, "block 0 carries no genesis config".into()));
    };
    if block.height != 0 || block.prev_hash != ZERO_HASH || !block.txs.is_empty() {
        return Err((AuditReason::HashMismatch, "malformed genesis block".into()));
    }
    if block.compute_hash() != block.block_hash {
        return Err((AuditReason::HashMismatch, "genesis hash mismatch".into()));
    }
    if let Some(expected) = &anchors.genesis_hash {
        if expected != &block.block_hash {
            return Err((AuditReason::HashMismatch, "genesis differs from trust anchor".into()));
        }
    }
    if genesis.config.ca_public_key != anchors.ca_public_key {
        return Err((AuditReason::SignatureInvalid, "genesis names a different CA".into()));
    }
    if !cache.verify(&anchors.ca_public_key, genesis.config.digest().as_bytes(), &genesis.ca_signature) {
        return Err((AuditReason::SignatureInvalid, "genesis not signed by CA".into()));
    }
    let empty = RevocationList::default();
    for peer in &genesis.config.peers {
        let cert = &peer.certificate;
        if cert.subject != peer.peer_id
            || cert.role != Role::Peer
            || verify_certificate(cert, &empty, &anchors.ca_public_key).is_err()
        {
            return Err((AuditReason::SignatureInvalid, format!("bad certificate for peer {}", peer.peer_id)));
        }
    }
    Ok(())
}

/// Check one non-genesis block against its parent.
fn check_block(
    block: &Block,
    parent: &Block,
    config: &GenesisConfig,
    cache: &mut SignatureCache,
) -> Result<(), (AuditReason, String)> {
    if block.genesis.is_some() {
        return Err((AuditReason::HashMismatch, "genesis config outside block 0".into()));
    }
    if block.height != parent.height + 1 {
        return Err((AuditReason::HashMismatch, format!("height {} follows {}", block.height, parent.height)));
    }
    if block.prev_hash != parent.block_hash {
        return Err((AuditReason::HashMismatch, "prevHash does not link to parent".into()));
    }
    if block.compute_hash() != block.block_hash {
        return Err((AuditReason::HashMismatch, "blockHash mismatch".into()));
    }
    if block.block_time < parent.block_time {
        return Err((AuditReason::ClockRegression, format!("{} < {}", block.block_time, parent.block_time)));
    }
    for tx in &block.txs {
        check_transaction(tx, config, cache)?;
    }
    Ok(())
}

/// Recompute every hash, link, signature, endorsement policy and clock step,
/// reporting the first violation.
pub fn verify_chain(chain: &[Block], anchors: &TrustAnchors) -> AuditReport {
    verify_chain_cached(chain, anchors, &mut SignatureCache::default())
}

pub fn verify_chain_cached(chain: &[Block], anchors: &TrustAnchors, cache: &mut SignatureCache) -> AuditReport {
    let blocks = chain.len() as u64;
    let Some(genesis) = chain.first() else {
        return AuditReport::bad(0, AuditReason::HashMismatch, "empty chain", 0);
    };
    if let Err((reason, detail)) = check_genesis(genesis, anchors, cache) {
        return AuditReport::bad(0, reason, detail, blocks);
    }
    let config = &genesis.genesis.as_ref().expect("checked").config;
    for (i, pair) in chain.windows(2).enumerate() {
        if let Err((reason, detail)) = check_block(&pair[1], &pair[0], config, cache) {
            return AuditReport::bad(i as u64 + 1, reason, detail, blocks);
        }
    }
    AuditReport::ok(blocks)
}

/// Audit raw ledger bytes in block-lines form. Lines must be canonical JSON
/// and newline-terminated; a line that fails to parse is reported at its
/// position.
pub fn audit_ledger_bytes(bytes: &[u8], anchors: &TrustAnchors, cache: &mut SignatureCache) -> AuditReport {
    match store::parse_strict(bytes) {
        Ok(chain) => verify_chain_cached(&chain, anchors, cache),
        Err(LedgerError::Malformed { line, detail }) => {
            // Report an earlier structural fault if the parsed prefix has one.
            let prefix = store::parse_prefix(bytes, line as usize);
            if line > 0 {
                let report = verify_chain_cached(&prefix, anchors, cache);
                if !report.valid {
                    return report;
                }
            }
            AuditReport::bad(line, AuditReason::HashMismatch, detail, line)
        }
        Err(other) => AuditReport::bad(0, AuditReason::HashMismatch, other.to_string(), 0),
    }
}

/// An append-only chain with its genesis configuration.
#[derive(Debug, Clone)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Chain {
    pub fn new(genesis: Block) -> Result<Self, LedgerError> {
        if genesis.genesis.is_none() || genesis.height != 0 {
            return Err(LedgerError::MissingGenesis);
        }
        Ok(Self { blocks: vec![genesis] })
    }

    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self, LedgerError> {
        match blocks.first() {
            Some(b) if b.genesis.is_some() => Ok(Self { blocks }),
            _ => Err(LedgerError::MissingGenesis),
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn config(&self) -> &GenesisConfig {
        &self.blocks[0].genesis.as_ref().expect("checked at construction").config
    }

    /// Build the next block from `txs` without appending it.
    pub fn next_block(&self, txs: Vec<Transaction>, block_time: u64) -> Result<Block, LedgerError> {
        self.next_block_with(txs, block_time, &mut SignatureCache::default())
    }

    pub fn next_block_with(
        &self,
        txs: Vec<Transaction>,
        block_time: u64,
        cache: &mut SignatureCache,
    ) -> Result<Block, LedgerError> {
        let parent = self.tip();
        if block_time < parent.block_time {
            return Err(LedgerError::ClockRegression { block_time, parent_time: parent.block_time });
        }
        for tx in &txs {
            match check_transaction(tx, self.config(), cache) {
                Ok(()) => {}
                Err((AuditReason::EndorsementInsufficient, _)) => {
                    return Err(LedgerError::PolicyUnsatisfied { tx_id: tx.tx_id.clone() })
                }
                Err((_, detail)) => return Err(LedgerError::InvalidTransaction { tx_id: tx.tx_id.clone(), detail }),
            }
        }
        let mut block = Block {
            height: parent.height + 1,
            prev_hash: parent.block_hash.clone(),
            block_time,
            txs,
            genesis: None,
            block_hash: String::new(),
        };
        block.block_hash = block.compute_hash();
        Ok(block)
    }

    /// Order `txs` into a new block at `block_time` and append it.
    pub fn append_block(&mut self, txs: Vec<Transaction>, block_time: u64) -> Result<&Block, LedgerError> {
        let block = self.next_block(txs, block_time)?;
        self.blocks.push(block);
        Ok(self.tip())
    }

    /// Append a block produced elsewhere (e.g. received from the orderer).
    pub fn push_verified(&mut self, block: Block) -> Result<(), LedgerError> {
        self.push_verified_with(block, &mut SignatureCache::default())
    }

    pub fn push_verified_with(&mut self, block: Block, cache: &mut SignatureCache) -> Result<(), LedgerError> {
        check_block(&block, self.tip(), self.config(), cache)
            .map_err(|(_, detail)| LedgerError::InvalidTransaction { tx_id: String::new(), detail })?;
        self.blocks.push(block);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TxOutcome {
    pub height: u64,
    pub tx_index: u32,
    pub tx_id: String,
    pub op: String,
    /// Error code when the transaction was skipped at commit.
    pub error: Option<String>,
    pub detail: Option<String>,
}

impl TxOutcome {
    pub fn committed(&self) -> bool {
        self.error.is_none()
    }
}

/// World state plus the bookkeeping needed to keep applying blocks.
#[derive(Debug, Clone)]
pub struct Replica {
    pub state: WorldState,
    pub height: u64,
    pub outcomes: Vec<TxOutcome>,
    seen_tx_ids: HashSet<String>,
}

impl Replica {
    pub fn from_genesis(genesis: &Block) -> Result<Self, LedgerError> {
        let config = &genesis.genesis.as_ref().ok_or(LedgerError::MissingGenesis)?.config;
        Ok(Self {
            state: WorldState::bootstrap(config.ca_public_key, config.governance.iter().cloned()),
            height: 0,
            outcomes: Vec::new(),
            seen_tx_ids: HashSet::new(),
        })
    }

    /// Execute every transaction of `block` in order. Failing transactions
    /// are recorded and skipped; they never abort the block.
    pub fn apply_block(&mut self, block: &Block, chaincode: &Chaincode) -> &[TxOutcome] {
        let start = self.outcomes.len();
        for (i, tx) in block.txs.iter().enumerate() {
            let ctx = TxContext { height: block.height, tx_index: i as u32, now: block.block_time };
            let result = self.commit_tx(tx, &ctx, chaincode);
            let (error, detail) = match result {
                Ok(()) => (None, None),
                Err((code, detail)) => (Some(code), Some(detail)),
            };
            self.outcomes.push(TxOutcome {
                height: block.height,
                tx_index: i as u32,
                tx_id: tx.tx_id.clone(),
                op: tx.payload.operation.name().to_string(),
                error,
                detail,
            });
        }
        self.height = block.height;
        &self.outcomes[start..]
    }

    pub fn has_seen(&self, tx_id: &str) -> bool {
        self.seen_tx_ids.contains(tx_id)
    }

    /// Commit-time validation against the current state, then execution.
    fn commit_tx(&mut self, tx: &Transaction, ctx: &TxContext, chaincode: &Chaincode) -> Result<(), (String, String)> {
        if !self.seen_tx_ids.insert(tx.tx_id.clone()) {
            return Err(("DuplicateTxId".into(), tx.tx_id.clone()));
        }
        check_creator(&self.state, &tx.creator).map_err(|d| ("UnauthorizedCaller".to_string(), d))?;
        chaincode
            .execute(&mut self.state, &tx.payload, ctx)
            .map(|_| ())
            .map_err(|e| (e.code().to_string(), e.to_string()))
    }
}

/// The creator certificate must chain to the CA and must not be revoked
/// on-ledger.
pub fn check_creator(state: &WorldState, cert: &Certificate) -> Result<(), String> {
    if !cert.role.can_transact() {
        return Err(format!("role {} cannot transact", cert.role.as_str()));
    }
    verify_certificate(cert, &state.crl, &state.ca_public_key).map_err(|e| e.to_string())
}

/// Fold chaincode execution over the whole chain.
pub fn replay(chain: &[Block], chaincode: &Chaincode) -> Result<Replica, LedgerError> {
    let genesis = chain.first().ok_or(LedgerError::MissingGenesis)?;
    let mut replica = Replica::from_genesis(genesis)?;
    for block in &chain[1..] {
        replica.apply_block(block, chaincode);
    }
    Ok(replica)
}

/// SHA-256 of the canonical serialization of the world state.
pub fn state_hash(state: &WorldState) -> String {
    canonical::hash_hex(state)
}

#[cfg(test)]
mod tests;
