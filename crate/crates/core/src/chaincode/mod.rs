// SPDX-License-Identifier: Apache-2.0

//! Deterministic transaction execution over the world state.
//!
//! Every operation checks all of its guards before touching the state, so an
//! error always leaves the state exactly as it was. Time comes from the
//! block clock in [`TxContext`], never from the host.

mod ops;
pub mod seal;

use std::collections::{BTreeMap, BTreeSet};

use imbl::{OrdMap, Vector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use ops::{Operation, TxPayload};
use seal::{open_seal, EmbargoKey, RecordContent, SealError};

use crate::cve::{
    status_transition_valid, strip_dispute_prefix, validate_schema, ContentSeal, CveId, CveIdError, CveRecord,
    CveStatus, Violation, MIN_CVE_YEAR,
};
use crate::identity::{verify_certificate, Certificate, ParticipantId, PublicKey, RevocationList, Role};

/// Longest allowed embargo, measured from the block clock.
pub const EMBARGO_HORIZON_SECS: u64 = 400 * 86_400;

/// Position of the executing transaction and the block clock (`now`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TxContext {
    pub height: u64,
    pub tx_index: u32,
    pub now: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "CVESubmitted")]
    CveSubmitted,
    #[serde(rename = "CVEStatusChanged")]
    CveStatusChanged,
    EmbargoReleased,
    #[serde(rename = "CNAOnboarded")]
    CnaOnboarded,
    #[serde(rename = "CNARevoked")]
    CnaRevoked,
    #[serde(rename = "CVERejected")]
    CveRejected,
    #[serde(rename = "CVEMerged")]
    CveMerged,
    #[serde(rename = "CVESplit")]
    CveSplit,
    #[serde(rename = "CVEDisputed")]
    CveDisputed,
    PartialDupResolved,
}

/// Off-chain indexing event. Ordered by `(blockHeight, txIndex, eventIndex)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub kind: EventKind,
    pub subject: String,
    pub block_height: u64,
    pub tx_index: u32,
    pub event_index: u32,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CnaEntry {
    pub cert_hash: String,
    pub serial: u64,
}

/// Registry and event log are persistent structures, so cloning a state for
/// endorsement simulation or a pinned query snapshot is cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldState {
    pub ca_public_key: PublicKey,
    pub cve_registry: OrdMap<CveId, CveRecord>,
    #[serde(rename = "authorizedCNAs")]
    pub authorized_cnas: BTreeMap<ParticipantId, CnaEntry>,
    pub governance_members: BTreeSet<ParticipantId>,
    /// Highest allocated sequence per year.
    pub id_counters: BTreeMap<u32, u64>,
    /// Serials revoked on-ledger, consulted when transaction certificates
    /// are checked.
    pub crl: RevocationList,
    pub event_log: Vector<Event>,
}

impl WorldState {
    pub fn bootstrap(ca_public_key: PublicKey, governance: impl IntoIterator<Item = ParticipantId>) -> Self {
        Self {
            ca_public_key,
            cve_registry: OrdMap::new(),
            authorized_cnas: BTreeMap::new(),
            governance_members: governance.into_iter().collect(),
            id_counters: BTreeMap::new(),
            crl: RevocationList::default(),
            event_log: Vector::new(),
        }
    }

    pub fn is_governance(&self, id: &ParticipantId) -> bool {
        self.governance_members.contains(id)
    }

    pub fn is_authorized_cna(&self, id: &ParticipantId) -> bool {
        self.authorized_cnas.contains_key(id)
    }

    pub fn record(&self, id: &CveId) -> Option<&CveRecord> {
        self.cve_registry.get(id)
    }

    pub(crate) fn existing(&self, id: &CveId) -> Result<&CveRecord, ChaincodeError> {
        self.cve_registry.get(id).ok_or(ChaincodeError::UnknownCveId(*id))
    }

    /// Hand out the next unused sequence number for `year`. Numbers are
    /// never reused, even after the record carrying them is rejected.
    pub fn allocate_cve_id(&mut self, year: u32) -> Result<CveId, ChaincodeError> {
        let id = self.peek_next_id(year)?;
        self.id_counters.insert(year, id.sequence);
        Ok(id)
    }

    /// The id the next submission without an explicit id would receive.
    pub fn peek_next_id(&self, year: u32) -> Result<CveId, ChaincodeError> {
        if year < MIN_CVE_YEAR {
            return Err(ChaincodeError::InvalidCveId(CveIdError::YearOutOfRange(year)));
        }
        let next = self.id_counters.get(&year).copied().unwrap_or(0) + 1;
        Ok(CveId { year, sequence: next })
    }

    pub(crate) fn emit(&mut self, kind: EventKind, subject: impl ToString, payload: Value, ctx: &TxContext) -> Event {
        let event_index = match self.event_log.last() {
            Some(last) if last.block_height == ctx.height && last.tx_index == ctx.tx_index => last.event_index + 1,
            _ => 0,
        };
        let event = Event {
            kind,
            subject: subject.to_string(),
            block_height: ctx.height,
            tx_index: ctx.tx_index,
            event_index,
            payload,
        };
        self.event_log.push_back(event.clone());
        event
    }

    /// Caller may act on `record` as its submitter or as governance.
    pub(crate) fn may_correct(&self, record: &CveRecord, caller: &ParticipantId) -> bool {
        &record.submitter_cna == caller || self.is_governance(caller)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChaincodeError {
    #[error("caller {0} is not an authorized CNA")]
    UnauthorizedCaller(ParticipantId),
    #[error("schema violations: {0:?}")]
    SchemaViolation(Vec<Violation>),
    #[error("{0} is already registered")]
    DuplicateCveId(CveId),
    #[error("embargo until {embargo_until} exceeds the horizon ending at {horizon}")]
    ClockViolation { embargo_until: u64, horizon: u64 },
    #[error("unknown CVE id {0}")]
    UnknownCveId(CveId),
    #[error("{caller} is neither the submitter of {cve_id} nor a governance member")]
    NotSubmitter { cve_id: CveId, caller: ParticipantId },
    #[error("illegal status transition {from} -> {to}")]
    IllegalTransition { from: CveStatus, to: CveStatus },
    #[error("transition to {0} must use the corresponding correction operation")]
    CorrectionRequired(CveStatus),
    #[error("caller {0} is not a governance member")]
    NotGovernance(ParticipantId),
    #[error("bad certificate: {0}")]
    BadCertificate(String),
    #[error("{0} is already an authorized CNA")]
    AlreadyAuthorized(ParticipantId),
    #[error("{0} is not an authorized CNA")]
    NotAuthorizedCna(ParticipantId),
    #[error(transparent)]
    InvalidCveId(CveIdError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("embargo envelope: {0}")]
    Envelope(SealError),
    #[error("{id} has status {status}, which this operation does not accept")]
    IneligibleStatus { id: CveId, status: CveStatus },
    #[error("at least two candidates are required")]
    TooFewCandidates,
    #[error("candidate list contains duplicates")]
    DuplicateCandidates,
    #[error("version ranges of {0} and {1} do not overlap")]
    NoOverlap(CveId, CveId),
    #[error("version ranges of {0} and {1} are identical; merge instead")]
    IdenticalCoverage(CveId, CveId),
}

impl ChaincodeError {
    /// Stable machine-readable error name.
    pub fn code(&self) -> &'static str {
        match self {
            ChaincodeError::UnauthorizedCaller(_) => "UnauthorizedCaller",
            ChaincodeError::SchemaViolation(_) => "SchemaViolation",
            ChaincodeError::DuplicateCveId(_) => "DuplicateCveId",
            ChaincodeError::ClockViolation { .. } => "ClockViolation",
            ChaincodeError::UnknownCveId(_) => "UnknownCveId",
            ChaincodeError::NotSubmitter { .. } => "NotSubmitter",
            ChaincodeError::IllegalTransition { .. } => "IllegalTransition",
            ChaincodeError::CorrectionRequired(_) => "CorrectionRequired",
            ChaincodeError::NotGovernance(_) => "NotGovernance",
            ChaincodeError::BadCertificate(_) => "BadCertificate",
            ChaincodeError::AlreadyAuthorized(_) => "AlreadyAuthorized",
            ChaincodeError::NotAuthorizedCna(_) => "NotAuthorizedCna",
            ChaincodeError::InvalidCveId(_) => "InvalidCveId",
            ChaincodeError::InvalidArgument(_) => "InvalidArgument",
            ChaincodeError::Envelope(_) => "EnvelopeError",
            ChaincodeError::IneligibleStatus { .. } => "IneligibleStatus",
            ChaincodeError::TooFewCandidates => "TooFewCandidates",
            ChaincodeError::DuplicateCandidates => "DuplicateCandidates",
            ChaincodeError::NoOverlap(..) => "NoOverlap",
            ChaincodeError::IdenticalCoverage(..) => "IdenticalCoverage",
        }
    }
}

/// The contract executor. Holds the consortium embargo key, which is needed
/// to validate and release sealed drafts; every committing peer of one
/// network must be configured with the same key.
#[derive(Debug, Clone, Default)]
pub struct Chaincode {
    embargo_key: Option<EmbargoKey>,
}

impl Chaincode {
    pub fn new(embargo_key: Option<EmbargoKey>) -> Self {
        Self { embargo_key }
    }

    pub fn embargo_key(&self) -> Option<&EmbargoKey> {
        self.embargo_key.as_ref()
    }

    /// Dispatch one transaction payload.
    pub fn execute(
        &self,
        state: &mut WorldState,
        payload: &TxPayload,
        ctx: &TxContext,
    ) -> Result<Vec<Event>, ChaincodeError> {
        let caller = &payload.caller;
        match &payload.operation {
            Operation::SubmitCve { record } => self.submit_cve(state, record, caller, ctx).map(|e| vec![e]),
            Operation::UpdateCveStatus { cve_id, new_status } => {
                self.update_cve_status(state, cve_id, *new_status, caller, ctx).map(|e| vec![e])
            }
            Operation::CheckEmbargoReleases {} => {
                if !state.is_authorized_cna(caller) && !state.is_governance(caller) {
                    return Err(ChaincodeError::UnauthorizedCaller(caller.clone()));
                }
                Ok(self.check_embargo_releases(state, ctx))
            }
            Operation::OnboardCna { cna_id, cert_hash, certificate } => {
                self.onboard_cna(state, cna_id, cert_hash, certificate, caller, ctx).map(|e| vec![e])
            }
            Operation::RevokeCna { cna_id } => self.revoke_cna(state, cna_id, caller, ctx).map(|e| vec![e]),
            Operation::RejectCve { cve_id, reason } => {
                self.reject_cve(state, cve_id, reason, caller, ctx).map(|e| vec![e])
            }
            Operation::MergeCves { candidates } => self.merge_cves(state, candidates, caller, ctx),
            Operation::SplitCve { cve_id, candidates } => self.split_cve(state, cve_id, candidates, caller, ctx),
            Operation::DisputeCve { cve_id, note, external_ref } => {
                self.dispute_cve(state, cve_id, note, external_ref.as_deref(), caller, ctx).map(|e| vec![e])
            }
            Operation::ResolvePartialDuplicate { keep_id, revise_id } => {
                self.resolve_partial_duplicate(state, keep_id, revise_id, caller, ctx).map(|e| vec![e])
            }
        }
    }

    fn open(&self, seal: &ContentSeal) -> Result<(RecordContent, String), ChaincodeError> {
        open_seal(seal, self.embargo_key.as_ref()).map_err(ChaincodeError::Envelope)
    }

    /// Register a new record. It lands as DRAFT while `embargoUntil` is in the
    /// future and PUBLISHED otherwise.
    pub fn submit_cve(
        &self,
        state: &mut WorldState,
        input: &CveRecord,
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Event, ChaincodeError> {
        if !state.is_authorized_cna(caller) {
            return Err(ChaincodeError::UnauthorizedCaller(caller.clone()));
        }
        if state.cve_registry.contains_key(&input.cve_id) {
            return Err(ChaincodeError::DuplicateCveId(input.cve_id));
        }
        if !input.annotations.is_empty() {
            return Err(ChaincodeError::InvalidArgument("new records cannot carry annotations".into()));
        }
        let horizon = ctx.now.saturating_add(EMBARGO_HORIZON_SECS);
        let embargoed = match input.embargo_until {
            Some(until) if until > horizon => {
                return Err(ChaincodeError::ClockViolation { embargo_until: until, horizon })
            }
            Some(until) => until > ctx.now,
            None => false,
        };

        let mut record = input.clone();
        record.status = if embargoed { CveStatus::Draft } else { CveStatus::Published };
        record.submitter_cna = caller.clone();
        record.created_at = ctx.now;
        record.updated_at = ctx.now;

        // Validate the plaintext, whether or not it arrived sealed.
        let mut plain = record.clone();
        match &input.seal {
            Some(seal) if seal.envelope.is_some() => {
                let (content, salt) = self.open(seal)?;
                content.apply_to(&mut plain);
                plain.seal = Some(ContentSeal { commitment: seal.commitment.clone(), envelope: None, salt: Some(salt) });
            }
            Some(_) => return Err(ChaincodeError::InvalidArgument("seal without envelope".into())),
            None if embargoed => {
                return Err(ChaincodeError::InvalidArgument("embargoed content must be sealed".into()))
            }
            None => {}
        }
        let violations = validate_schema(&plain);
        if !violations.is_empty() {
            return Err(ChaincodeError::SchemaViolation(violations));
        }

        let stored = if embargoed { record } else { plain };
        let id = stored.cve_id;
        let status = stored.status;
        state.cve_registry.insert(id, stored);
        let counter = state.id_counters.entry(id.year).or_insert(0);
        *counter = (*counter).max(id.sequence);
        Ok(state.emit(
            EventKind::CveSubmitted,
            id,
            json!({ "status": status, "submitter": caller }),
            ctx,
        ))
    }

    pub fn update_cve_status(
        &self,
        state: &mut WorldState,
        cve_id: &CveId,
        new_status: CveStatus,
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Event, ChaincodeError> {
        let record = state.existing(cve_id)?;
        if !state.may_correct(record, caller) {
            return Err(ChaincodeError::NotSubmitter { cve_id: *cve_id, caller: caller.clone() });
        }
        let old = record.status;
        if !status_transition_valid(old, new_status) {
            return Err(ChaincodeError::IllegalTransition { from: old, to: new_status });
        }
        if matches!(new_status, CveStatus::Rejected | CveStatus::Disputed) {
            return Err(ChaincodeError::CorrectionRequired(new_status));
        }
        let mut updated = record.clone();
        if old == CveStatus::Draft {
            self.unseal(&mut updated)?;
        }
        if old == CveStatus::Disputed {
            updated.description = strip_dispute_prefix(&updated.description);
        }
        updated.status = new_status;
        updated.updated_at = ctx.now;
        state.cve_registry.insert(*cve_id, updated);
        Ok(state.emit(EventKind::CveStatusChanged, cve_id, json!({ "from": old, "to": new_status }), ctx))
    }

    fn unseal(&self, record: &mut CveRecord) -> Result<(), ChaincodeError> {
        if let Some(seal) = record.seal.clone().filter(|s| s.envelope.is_some()) {
            let (content, salt) = self.open(&seal)?;
            content.apply_to(record);
            record.seal = Some(ContentSeal { commitment: seal.commitment, envelope: None, salt: Some(salt) });
        }
        Ok(())
    }

    /// Publish every draft whose embargo has passed (`embargoUntil <= now`),
    /// in ascending id order, one event each.
    pub fn check_embargo_releases(&self, state: &mut WorldState, ctx: &TxContext) -> Vec<Event> {
        let due: Vec<CveId> = state
            .cve_registry
            .values()
            .filter(|r| r.status == CveStatus::Draft && r.embargo_until.is_some_and(|t| t <= ctx.now))
            .map(|r| r.cve_id)
            .collect();
        let mut events = Vec::with_capacity(due.len());
        for id in due {
            let mut record = state.cve_registry[&id].clone();
            if let Err(e) = self.unseal(&mut record) {
                log::warn!("cannot release {id}: {e}");
                continue;
            }
            record.status = CveStatus::Published;
            record.updated_at = ctx.now;
            state.cve_registry.insert(id, record);
            events.push(state.emit(EventKind::EmbargoReleased, id, json!({ "releasedAt": ctx.now }), ctx));
        }
        events
    }

    pub fn onboard_cna(
        &self,
        state: &mut WorldState,
        cna_id: &ParticipantId,
        cert_hash: &str,
        certificate: &Certificate,
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Event, ChaincodeError> {
        if !state.is_governance(caller) {
            return Err(ChaincodeError::NotGovernance(caller.clone()));
        }
        if &certificate.subject != cna_id {
            return Err(ChaincodeError::BadCertificate(format!(
                "certificate subject {} does not match {cna_id}",
                certificate.subject
            )));
        }
        if certificate.role != Role::Cna {
            return Err(ChaincodeError::BadCertificate(format!("role {} is not CNA", certificate.role.as_str())));
        }
        if certificate.cert_hash() != cert_hash {
            return Err(ChaincodeError::BadCertificate("certHash does not match certificate".into()));
        }
        verify_certificate(certificate, &state.crl, &state.ca_public_key)
            .map_err(|e| ChaincodeError::BadCertificate(e.to_string()))?;
        if state.is_authorized_cna(cna_id) {
            return Err(ChaincodeError::AlreadyAuthorized(cna_id.clone()));
        }
        state
            .authorized_cnas
            .insert(cna_id.clone(), CnaEntry { cert_hash: cert_hash.to_string(), serial: certificate.serial });
        Ok(state.emit(
            EventKind::CnaOnboarded,
            cna_id,
            json!({ "certHash": cert_hash, "serial": certificate.serial }),
            ctx,
        ))
    }

    /// Remove a CNA and revoke its certificate serial on-ledger. Records it
    /// already submitted stay as they are.
    pub fn revoke_cna(
        &self,
        state: &mut WorldState,
        cna_id: &ParticipantId,
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Event, ChaincodeError> {
        if !state.is_governance(caller) {
            return Err(ChaincodeError::NotGovernance(caller.clone()));
        }
        let entry = state
            .authorized_cnas
            .remove(cna_id)
            .ok_or_else(|| ChaincodeError::NotAuthorizedCna(cna_id.clone()))?;
        state.crl.revoke_in_place(entry.serial);
        Ok(state.emit(EventKind::CnaRevoked, cna_id, json!({ "serial": entry.serial }), ctx))
    }
}
