// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::chaincode::WorldState;
use crate::cve::{Annotation, CveId, CveRecord, CveStatus, Severity, VersionRange};
use crate::identity::ParticipantId;

/// Public projection of a record. Sealed drafts carry only their content
/// commitment; description, product and version are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordView {
    #[serde(rename = "cveID")]
    pub cve_id: CveId,
    pub status: CveStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<Vec<VersionRange>>,
    pub severity: Severity,
    pub embargo_until: Option<u64>,
    pub submitter_cna: ParticipantId,
    pub references: Vec<CveId>,
    pub annotations: Vec<Annotation>,
    pub created_at: u64,
    pub updated_at: u64,
    pub content_commitment: Option<String>,
    /// Revealed once the embargo is lifted, so the commitment can be checked.
    pub commitment_salt: Option<String>,
}

impl RecordView {
    pub fn of(record: &CveRecord) -> Self {
        let sealed = record.is_sealed();
        let reveal = |s: &str| (!sealed).then(|| s.to_string());
        Self {
            cve_id: record.cve_id,
            status: record.status,
            description: reveal(&record.description),
            product: reveal(&record.product),
            version: (!sealed).then(|| record.version.clone()),
            severity: record.severity,
            embargo_until: record.embargo_until,
            submitter_cna: record.submitter_cna.clone(),
            references: record.references.clone(),
            annotations: record.annotations.clone(),
            created_at: record.created_at,
            updated_at: record.updated_at,
            content_commitment: record.seal.as_ref().map(|s| s.commitment.clone()),
            commitment_salt: record.seal.as_ref().and_then(|s| s.salt.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryFilter {
    pub id: Option<CveId>,
    pub status: Option<CveStatus>,
    pub product: Option<String>,
    pub submitter: Option<ParticipantId>,
    pub year: Option<u32>,
}

impl QueryFilter {
    fn matches(&self, record: &CveRecord) -> bool {
        self.id.is_none_or(|id| id == record.cve_id)
            && self.status.is_none_or(|s| s == record.status)
            && self.year.is_none_or(|y| y == record.cve_id.year)
            && self.submitter.as_ref().is_none_or(|s| s == &record.submitter_cna)
            // a sealed product must not be probeable through the filter
            && self.product.as_ref().is_none_or(|p| !record.is_sealed() && p == &record.product)
    }
}

/// All records matching `filter`, in ascending id order.
pub fn query_public(state: &WorldState, filter: &QueryFilter) -> Vec<RecordView> {
    let matching = |r: &&CveRecord| filter.matches(r);
    match filter.id {
        Some(id) => state.cve_registry.get(&id).filter(matching).map(RecordView::of).into_iter().collect(),
        None => state.cve_registry.values().filter(matching).map(RecordView::of).collect(),
    }
}
