// SPDX-License-Identifier: Apache-2.0

//! Embargo envelopes.
//!
//! An embargoed submission carries its content encrypted under the
//! consortium embargo key, plus a salted commitment to that content. Peers
//! holding the key can validate and later release it; everyone else sees
//! only the commitment.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use serde::{Deserialize, Serialize};

use crate::canonical::{self, decode_lower_hex};
use crate::cve::{ContentSeal, CveRecord, VersionRange};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("no embargo key available to open the envelope")]
    KeyUnavailable,
    #[error("malformed envelope: {0}")]
    Malformed(String),
    #[error("envelope does not decrypt under the embargo key")]
    DecryptFailed,
    #[error("envelope content does not match its commitment")]
    CommitmentMismatch,
}

/// Symmetric key shared by the consortium's committing peers.
#[derive(Clone, PartialEq, Eq)]
pub struct EmbargoKey([u8; 32]);

impl EmbargoKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn derive(master: &[u8], label: &str) -> Self {
        let mut material = b"cvechain-embargo-key\0".to_vec();
        material.extend_from_slice(master);
        material.push(0);
        material.extend_from_slice(label.as_bytes());
        Self(canonical::sha256(&material))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, SealError> {
        let bytes = decode_lower_hex(text.trim()).map_err(SealError::Malformed)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| SealError::Malformed("embargo key must be 32 bytes".into()))?;
        Ok(Self(arr))
    }

    fn cipher(&self) -> ChaCha20Poly1305 {
        ChaCha20Poly1305::new(&Key::from(self.0))
    }
}

impl std::fmt::Debug for EmbargoKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("EmbargoKey(..)")
    }
}

/// The fields withheld while a record is embargoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordContent {
    pub description: String,
    pub product: String,
    pub version: Vec<VersionRange>,
}

impl RecordContent {
    pub fn of(record: &CveRecord) -> Self {
        Self {
            description: record.description.clone(),
            product: record.product.clone(),
            version: record.version.clone(),
        }
    }

    pub fn apply_to(self, record: &mut CveRecord) {
        record.description = self.description;
        record.product = self.product;
        record.version = self.version;
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopePlaintext {
    content: RecordContent,
    salt: String,
}

pub fn commitment(salt_hex: &str, content: &RecordContent) -> String {
    let mut bytes = salt_hex.as_bytes().to_vec();
    bytes.extend_from_slice(&canonical::to_vec(content));
    canonical::sha256_hex(&bytes)
}

fn nonce_for(commitment: &str) -> Nonce {
    let mut material = b"cvechain-envelope-nonce\0".to_vec();
    material.extend_from_slice(commitment.as_bytes());
    let digest = canonical::sha256(&material);
    let mut nonce = [0u8; 12];
    nonce.copy_from_slice(&digest[..12]);
    Nonce::from(nonce)
}

/// Replace the content fields of `record` with a sealed envelope.
///
/// The salt is derived from the key and the content, so sealing is
/// deterministic yet the commitment cannot be brute-forced without the key.
pub fn seal_record(record: &CveRecord, key: &EmbargoKey) -> CveRecord {
    let content = RecordContent::of(record);
    let mut salt_material = key.0.to_vec();
    salt_material.extend_from_slice(record.cve_id.to_string().as_bytes());
    salt_material.extend_from_slice(&canonical::to_vec(&content));
    let salt = hex::encode(&canonical::sha256(&salt_material)[..16]);
    let commitment = commitment(&salt, &content);
    let plaintext = canonical::to_vec(&EnvelopePlaintext { content, salt });
    let ciphertext = key
        .cipher()
        .encrypt(&nonce_for(&commitment), plaintext.as_slice())
        .expect("in-memory encryption cannot fail");

    let mut sealed = record.clone();
    sealed.description = String::new();
    sealed.product = String::new();
    sealed.version = Vec::new();
    sealed.seal = Some(ContentSeal { commitment, envelope: Some(hex::encode(ciphertext)), salt: None });
    sealed
}

/// Decrypt an envelope and check it against its commitment. Returns the
/// content and the salt that opens the commitment.
pub fn open_seal(seal: &ContentSeal, key: Option<&EmbargoKey>) -> Result<(RecordContent, String), SealError> {
    let envelope = seal.envelope.as_deref().ok_or_else(|| SealError::Malformed("seal has no envelope".into()))?;
    let key = key.ok_or(SealError::KeyUnavailable)?;
    let ciphertext = decode_lower_hex(envelope).map_err(SealError::Malformed)?;
    let plaintext = key
        .cipher()
        .decrypt(&nonce_for(&seal.commitment), ciphertext.as_slice())
        .map_err(|_| SealError::DecryptFailed)?;
    let opened: EnvelopePlaintext =
        serde_json::from_slice(&plaintext).map_err(|e| SealError::Malformed(e.to_string()))?;
    if commitment(&opened.salt, &opened.content) != seal.commitment {
        return Err(SealError::CommitmentMismatch);
    }
    Ok((opened.content, opened.salt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cve::*;
    use crate::identity::ParticipantId;

    fn record() -> CveRecord {
        CveRecord {
            cve_id: "CVE-2025-0007".parse().unwrap(),
            description: "secret bug".into(),
            product: "widget".into(),
            version: vec![VersionRange::inclusive(Version::new(1, 0, 0), Version::new(1, 2, 0))],
            severity: Severity::new(SeverityLevel::Low, Some(2.0)),
            status: CveStatus::Draft,
            embargo_until: Some(500),
            submitter_cna: ParticipantId::new("cna.acme").unwrap(),
            references: vec![],
            annotations: vec![],
            created_at: 0,
            updated_at: 0,
            seal: None,
        }
    }

    #[test]
    fn seal_round_trip() {
        let key = EmbargoKey::derive(b"k", "net");
        let sealed = seal_record(&record(), &key);
        assert!(sealed.is_sealed());
        assert!(sealed.description.is_empty());
        let text = crate::canonical::to_string(&sealed);
        assert!(!text.contains("secret bug") && !text.contains("widget"));
        let (content, salt) = open_seal(sealed.seal.as_ref().unwrap(), Some(&key)).unwrap();
        assert_eq!(content, RecordContent::of(&record()));
        assert_eq!(commitment(&salt, &content), sealed.seal.unwrap().commitment);
        // deterministic
        assert_eq!(seal_record(&record(), &key), seal_record(&record(), &key));
    }

    #[test]
    fn wrong_key_or_tampering_fails() {
        let key = EmbargoKey::derive(b"k", "net");
        let sealed = seal_record(&record(), &key);
        let seal = sealed.seal.unwrap();
        assert_eq!(open_seal(&seal, None), Err(SealError::KeyUnavailable));
        assert_eq!(open_seal(&seal, Some(&EmbargoKey::derive(b"k", "other"))), Err(SealError::DecryptFailed));
        let mut forged = seal.clone();
        forged.commitment = "00".repeat(32);
        assert!(open_seal(&forged, Some(&key)).is_err());
    }
}
