// SPDX-License-Identifier: Apache-2.0

//! Record corrections: reject, merge, split, dispute and partial-duplicate
//! resolution.
//!
//! None of these delete a record. Merged and rejected entries stay in the
//! registry with annotations explaining what happened to them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chaincode::{Chaincode, ChaincodeError, Event, EventKind, TxContext, WorldState};
use crate::cve::{
    add_dispute_prefix, ranges_equal, ranges_overlap, validate_schema, version_ranges_subtract, Annotation,
    AnnotationKind, CveId, CveRecord, CveStatus, Severity,
};
use crate::identity::ParticipantId;

/// Source authority of an identifier; `Vendor` ranks highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Authority {
    Researcher,
    Coordinator,
    Vendor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MergeCandidate {
    #[serde(rename = "cveID")]
    pub cve_id: CveId,
    pub reference_count: u64,
    pub authority: Authority,
    pub publicized_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SplitCandidate {
    pub descriptor: String,
    pub association_frequency: u64,
    pub severity: Severity,
    pub version_breadth: u64,
    pub mention_order: u32,
}

/// Keep only the items that maximize `key`.
fn retain_best<T, K: Ord>(items: &mut Vec<T>, key: impl Fn(&T) -> K) {
    if let Some(best) = items.iter().map(&key).max() {
        items.retain(|item| key(item) == best);
    }
}

/// Choose the identifier that survives a merge. Criteria, each applied only
/// to the candidates still tied after the previous one:
/// most references, highest authority, earliest publication, smallest
/// numeric portion (then smallest year).
pub fn select_canonical(candidates: &[MergeCandidate]) -> Result<CveId, ChaincodeError> {
    if candidates.len() < 2 {
        return Err(ChaincodeError::TooFewCandidates);
    }
    let distinct: BTreeSet<CveId> = candidates.iter().map(|c| c.cve_id).collect();
    if distinct.len() != candidates.len() {
        return Err(ChaincodeError::DuplicateCandidates);
    }
    let mut pool: Vec<&MergeCandidate> = candidates.iter().collect();
    retain_best(&mut pool, |c| c.reference_count);
    retain_best(&mut pool, |c| c.authority);
    retain_best(&mut pool, |c| std::cmp::Reverse(c.publicized_at));
    retain_best(&mut pool, |c| std::cmp::Reverse(c.cve_id.numeric_portion()));
    retain_best(&mut pool, |c| std::cmp::Reverse(c.cve_id.year));
    debug_assert_eq!(pool.len(), 1);
    Ok(pool[0].cve_id)
}

/// Choose the vulnerability that keeps the original id in a split:
/// highest association frequency, then CVSS score, then version breadth,
/// then earliest mention.
pub fn select_prominent(candidates: &[SplitCandidate]) -> Result<&SplitCandidate, ChaincodeError> {
    if candidates.len() < 2 {
        return Err(ChaincodeError::TooFewCandidates);
    }
    let orders: BTreeSet<u32> = candidates.iter().map(|c| c.mention_order).collect();
    if orders.len() != candidates.len() {
        return Err(ChaincodeError::DuplicateCandidates);
    }
    if candidates.iter().any(|c| c.mention_order == 0) {
        return Err(ChaincodeError::InvalidArgument("mentionOrder is 1-based".into()));
    }
    let mut pool = Vec::with_capacity(candidates.len());
    for c in candidates {
        let score = c
            .severity
            .score_tenths()
            .ok_or_else(|| ChaincodeError::InvalidArgument(format!("candidate {:?} lacks a valid cvssScore", c.descriptor)))?;
        pool.push((c, score));
    }
    retain_best(&mut pool, |(c, _)| c.association_frequency);
    retain_best(&mut pool, |(_, score)| *score);
    retain_best(&mut pool, |(c, _)| c.version_breadth);
    retain_best(&mut pool, |(c, _)| std::cmp::Reverse(c.mention_order));
    debug_assert_eq!(pool.len(), 1);
    Ok(pool[0].0)
}

fn annotation(kind: AnnotationKind, note: String, target: Option<CveId>, ctx: &TxContext) -> Annotation {
    Annotation { kind, note, target, external_ref: None, at: ctx.now }
}

fn require_status(record: &CveRecord, allowed: &[CveStatus]) -> Result<(), ChaincodeError> {
    if allowed.contains(&record.status) {
        Ok(())
    } else {
        Err(ChaincodeError::IneligibleStatus { id: record.cve_id, status: record.status })
    }
}

fn require_corrector(state: &WorldState, record: &CveRecord, caller: &ParticipantId) -> Result<(), ChaincodeError> {
    if state.may_correct(record, caller) {
        Ok(())
    } else {
        Err(ChaincodeError::NotSubmitter { cve_id: record.cve_id, caller: caller.clone() })
    }
}

impl Chaincode {
    pub fn reject_cve(
        &self,
        state: &mut WorldState,
        cve_id: &CveId,
        reason: &str,
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Event, ChaincodeError> {
        let record = state.existing(cve_id)?;
        if reason.trim().is_empty() {
            return Err(ChaincodeError::InvalidArgument("rejection reason is empty".into()));
        }
        require_corrector(state, record, caller)?;
        if !matches!(record.status, CveStatus::Draft | CveStatus::Published | CveStatus::Disputed) {
            return Err(ChaincodeError::IllegalTransition { from: record.status, to: CveStatus::Rejected });
        }
        let from = record.status;
        let mut updated = record.clone();
        updated.status = CveStatus::Rejected;
        updated.updated_at = ctx.now;
        updated.annotations.push(annotation(AnnotationKind::RejectionReason, reason.to_string(), None, ctx));
        state.cve_registry.insert(*cve_id, updated);
        Ok(state.emit(EventKind::CveRejected, cve_id, json!({ "from": from, "reason": reason }), ctx))
    }

    pub fn merge_cves(
        &self,
        state: &mut WorldState,
        candidates: &[MergeCandidate],
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Vec<Event>, ChaincodeError> {
        let canonical = select_canonical(candidates)?;
        for c in candidates {
            let record = state.existing(&c.cve_id)?;
            require_status(record, &[CveStatus::Published, CveStatus::Disputed])?;
            require_corrector(state, record, caller)?;
        }
        let merged: Vec<CveId> = {
            let mut ids: Vec<CveId> = candidates.iter().map(|c| c.cve_id).filter(|id| *id != canonical).collect();
            ids.sort();
            ids
        };
        for id in &merged {
            let record = state.cve_registry.get_mut(id).expect("checked above");
            record.status = CveStatus::Rejected;
            record.updated_at = ctx.now;
            record.add_reference(canonical);
            record.annotations.push(annotation(
                AnnotationKind::MergePointer,
                format!("merged into {canonical}"),
                Some(canonical),
                ctx,
            ));
        }
        let survivor = state.cve_registry.get_mut(&canonical).expect("checked above");
        for id in &merged {
            survivor.add_reference(*id);
        }
        survivor.updated_at = ctx.now;
        Ok(vec![state.emit(EventKind::CveMerged, canonical, json!({ "merged": merged }), ctx)])
    }

    pub fn split_cve(
        &self,
        state: &mut WorldState,
        original_id: &CveId,
        candidates: &[SplitCandidate],
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Vec<Event>, ChaincodeError> {
        let original = state.existing(original_id)?;
        require_corrector(state, original, caller)?;
        require_status(original, &[CveStatus::Published])?;
        let prominent = select_prominent(candidates)?;
        let mut rest: Vec<&SplitCandidate> =
            candidates.iter().filter(|c| c.mention_order != prominent.mention_order).collect();
        rest.sort_by_key(|c| c.mention_order);

        // Allocate ids on a scratch counter so nothing changes until every
        // resulting record has validated.
        let year = original_id.year;
        let first = state.peek_next_id(year)?.sequence;
        let new_ids: Vec<CveId> = (0..rest.len() as u64).map(|i| CveId { year, sequence: first + i }).collect();
        let mut group: Vec<CveId> = new_ids.clone();
        group.push(*original_id);

        let mut updated_original = original.clone();
        updated_original.description = prominent.descriptor.clone();
        updated_original.severity = prominent.severity;
        updated_original.updated_at = ctx.now;
        for id in &new_ids {
            updated_original.add_reference(*id);
        }
        updated_original.annotations.push(annotation(
            AnnotationKind::SplitOrigin,
            format!("split into {}", new_ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")),
            None,
            ctx,
        ));

        let mut created = Vec::with_capacity(rest.len());
        for (candidate, id) in rest.iter().zip(&new_ids) {
            let mut record = CveRecord {
                cve_id: *id,
                description: candidate.descriptor.clone(),
                product: original.product.clone(),
                version: original.version.clone(),
                severity: candidate.severity,
                status: CveStatus::Published,
                embargo_until: None,
                submitter_cna: original.submitter_cna.clone(),
                references: Vec::new(),
                annotations: vec![annotation(
                    AnnotationKind::SplitOrigin,
                    format!("split from {original_id}"),
                    Some(*original_id),
                    ctx,
                )],
                created_at: ctx.now,
                updated_at: ctx.now,
                seal: None,
            };
            for other in &group {
                record.add_reference(*other);
            }
            created.push(record);
        }
        let violations: Vec<_> =
            std::iter::once(&updated_original).chain(&created).flat_map(validate_schema).collect();
        if !violations.is_empty() {
            return Err(ChaincodeError::SchemaViolation(violations));
        }

        for id in &new_ids {
            let allocated = state.allocate_cve_id(year)?;
            debug_assert_eq!(allocated, *id);
        }
        state.cve_registry.insert(*original_id, updated_original);
        for record in created {
            state.cve_registry.insert(record.cve_id, record);
        }
        Ok(vec![state.emit(
            EventKind::CveSplit,
            original_id,
            json!({ "newIds": new_ids, "prominentMention": prominent.mention_order }),
            ctx,
        )])
    }

    /// Mark a published record as contested. Anyone with write access may
    /// raise a dispute, not only the submitter.
    pub fn dispute_cve(
        &self,
        state: &mut WorldState,
        cve_id: &CveId,
        note: &str,
        external_ref: Option<&str>,
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Event, ChaincodeError> {
        let record = state.existing(cve_id)?;
        if !state.is_authorized_cna(caller) && !state.is_governance(caller) {
            return Err(ChaincodeError::UnauthorizedCaller(caller.clone()));
        }
        if note.trim().is_empty() {
            return Err(ChaincodeError::InvalidArgument("dispute note is empty".into()));
        }
        if record.status != CveStatus::Published {
            return Err(ChaincodeError::IllegalTransition { from: record.status, to: CveStatus::Disputed });
        }
        let mut updated = record.clone();
        updated.status = CveStatus::Disputed;
        updated.description = add_dispute_prefix(&updated.description);
        updated.updated_at = ctx.now;
        updated.annotations.push(Annotation {
            kind: AnnotationKind::DisputeNote,
            note: note.to_string(),
            target: None,
            external_ref: external_ref.map(str::to_string),
            at: ctx.now,
        });
        state.cve_registry.insert(*cve_id, updated);
        Ok(state.emit(EventKind::CveDisputed, cve_id, json!({ "by": caller, "externalRef": external_ref }), ctx))
    }

    /// Trim `revise_id` down to the versions not already covered by
    /// `keep_id`. When nothing would remain, `revise_id` is merged into
    /// `keep_id` instead.
    pub fn resolve_partial_duplicate(
        &self,
        state: &mut WorldState,
        keep_id: &CveId,
        revise_id: &CveId,
        caller: &ParticipantId,
        ctx: &TxContext,
    ) -> Result<Event, ChaincodeError> {
        if keep_id == revise_id {
            return Err(ChaincodeError::InvalidArgument("keep and revise must differ".into()));
        }
        let keep = state.existing(keep_id)?;
        let revise = state.existing(revise_id)?;
        for record in [keep, revise] {
            require_status(record, &[CveStatus::Published, CveStatus::Disputed])?;
            require_corrector(state, record, caller)?;
        }
        if !ranges_overlap(&keep.version, &revise.version) {
            return Err(ChaincodeError::NoOverlap(*keep_id, *revise_id));
        }
        if ranges_equal(&keep.version, &revise.version) {
            return Err(ChaincodeError::IdenticalCoverage(*keep_id, *revise_id));
        }
        let remaining = version_ranges_subtract(&revise.version, &keep.version);
        let escalated = remaining.is_empty();

        let mut keep = keep.clone();
        let mut revise = revise.clone();
        keep.add_reference(*revise_id);
        revise.add_reference(*keep_id);
        keep.updated_at = ctx.now;
        revise.updated_at = ctx.now;
        keep.annotations.push(annotation(
            AnnotationKind::PartialDupNote,
            format!("overlapping versions shared with {revise_id}"),
            Some(*revise_id),
            ctx,
        ));
        if escalated {
            revise.status = CveStatus::Rejected;
            revise.annotations.push(annotation(
                AnnotationKind::MergePointer,
                format!("coverage fully contained in {keep_id}"),
                Some(*keep_id),
                ctx,
            ));
        } else {
            revise.version = remaining.clone();
            revise.annotations.push(annotation(
                AnnotationKind::PartialDupNote,
                format!("revised to versions not covered by {keep_id}"),
                Some(*keep_id),
                ctx,
            ));
        }
        state.cve_registry.insert(*keep_id, keep);
        state.cve_registry.insert(*revise_id, revise);
        Ok(state.emit(
            EventKind::PartialDupResolved,
            revise_id,
            json!({ "keep": keep_id, "escalated": escalated, "remaining": remaining }),
            ctx,
        ))
    }
}
