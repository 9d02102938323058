// SPDX-License-Identifier: Apache-2.0

//! Transaction payloads: `{op, args, caller, clockNow}` in canonical JSON.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::canonical;
use crate::corrections::{MergeCandidate, SplitCandidate};
use crate::cve::{CveId, CveRecord, CveStatus};
use crate::identity::{Certificate, ParticipantId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", deny_unknown_fields)]
pub enum Operation {
    #[serde(rename = "SubmitCVE")]
    SubmitCve { record: CveRecord },
    #[serde(rename = "UpdateCVEStatus", rename_all = "camelCase")]
    UpdateCveStatus {
        #[serde(rename = "cveID")]
        cve_id: CveId,
        new_status: CveStatus,
    },
    #[serde(rename = "CheckEmbargoReleases")]
    CheckEmbargoReleases {},
    #[serde(rename = "OnboardCNA", rename_all = "camelCase")]
    OnboardCna {
        #[serde(rename = "cnaID")]
        cna_id: ParticipantId,
        cert_hash: String,
        certificate: Certificate,
    },
    #[serde(rename = "RevokeCNA")]
    RevokeCna {
        #[serde(rename = "cnaID")]
        cna_id: ParticipantId,
    },
    #[serde(rename = "RejectCVE")]
    RejectCve {
        #[serde(rename = "cveID")]
        cve_id: CveId,
        reason: String,
    },
    #[serde(rename = "MergeCVEs")]
    MergeCves { candidates: Vec<MergeCandidate> },
    #[serde(rename = "SplitCVE")]
    SplitCve {
        #[serde(rename = "cveID")]
        cve_id: CveId,
        candidates: Vec<SplitCandidate>,
    },
    #[serde(rename = "DisputeCVE", rename_all = "camelCase")]
    DisputeCve {
        #[serde(rename = "cveID")]
        cve_id: CveId,
        note: String,
        external_ref: Option<String>,
    },
    #[serde(rename = "ResolvePartialDuplicate")]
    ResolvePartialDuplicate {
        #[serde(rename = "keepID")]
        keep_id: CveId,
        #[serde(rename = "reviseID")]
        revise_id: CveId,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::SubmitCve { .. } => "SubmitCVE",
            Operation::UpdateCveStatus { .. } => "UpdateCVEStatus",
            Operation::CheckEmbargoReleases {} => "CheckEmbargoReleases",
            Operation::OnboardCna { .. } => "OnboardCNA",
            Operation::RevokeCna { .. } => "RevokeCNA",
            Operation::RejectCve { .. } => "RejectCVE",
            Operation::MergeCves { .. } => "MergeCVEs",
            Operation::SplitCve { .. } => "SplitCVE",
            Operation::DisputeCve { .. } => "DisputeCVE",
            Operation::ResolvePartialDuplicate { .. } => "ResolvePartialDuplicate",
        }
    }
}

/// What a caller signs: the operation, who invokes it and the caller's
/// clock at proposal time. Chaincode uses the block clock, never this one.
#[derive(Debug, Clone, PartialEq)]
pub struct TxPayload {
    pub operation: Operation,
    pub caller: ParticipantId,
    pub clock_now: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PayloadRepr {
    op: String,
    args: Value,
    caller: ParticipantId,
    clock_now: u64,
}

impl TxPayload {
    pub fn new(operation: Operation, caller: ParticipantId, clock_now: u64) -> Self {
        Self { operation, caller, clock_now }
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        canonical::to_vec(self)
    }
}

impl Serialize for TxPayload {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut tagged = serde_json::to_value(&self.operation).map_err(serde::ser::Error::custom)?;
        let args = tagged.get_mut("args").map(Value::take).unwrap_or_else(|| Value::Object(Default::default()));
        PayloadRepr {
            op: self.operation.name().to_string(),
            args,
            caller: self.caller.clone(),
            clock_now: self.clock_now,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TxPayload {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PayloadRepr::deserialize(d)?;
        let tagged = serde_json::json!({ "op": repr.op, "args": repr.args });
        let operation = Operation::deserialize(tagged).map_err(serde::de::Error::custom)?;
        Ok(Self { operation, caller: repr.caller, clock_now: repr.clock_now })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_shape() {
        let payload = TxPayload::new(
            Operation::RevokeCna { cna_id: ParticipantId::new("cna.acme").unwrap() },
            ParticipantId::new("gov.board1").unwrap(),
            42,
        );
        let text = canonical::to_string(&payload);
        assert_eq!(text, r#"{"args":{"cnaID":"cna.acme"},"caller":"gov.board1","clockNow":42,"op":"RevokeCNA"}"#);
        let back: TxPayload = canonical::from_slice_strict(text.as_bytes()).unwrap();
        assert_eq!(back, payload);

        let sweep = TxPayload::new(Operation::CheckEmbargoReleases {}, payload.caller.clone(), 1);
        let text = canonical::to_string(&sweep);
        assert_eq!(text, r#"{"args":{},"caller":"gov.board1","clockNow":1,"op":"CheckEmbargoReleases"}"#);
        assert_eq!(serde_json::from_str::<TxPayload>(&text).unwrap(), sweep);
    }

    #[test]
    fn unknown_op_rejected() {
        let text = r#"{"args":{},"caller":"gov.board1","clockNow":1,"op":"DeleteCVE"}"#;
        assert!(serde_json::from_str::<TxPayload>(text).is_err());
    }
}
