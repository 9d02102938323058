// SPDX-License-Identifier: Apache-2.0

//! Participant identities: deterministic Ed25519 keys, CA-signed certificates
//! and the certificate revocation list.
//!
//! Certificates use a fixed, length-prefixed binary encoding for the signed
//! portion instead of X.509. They still bind a participant ID to a key and a
//! role, and a certificate can still be revoked by serial number.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use ed25519_dalek::Signer;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical::{self, decode_lower_hex};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("invalid participant id {0:?}")]
    InvalidParticipantId(String),
    #[error("unknown role {0:?}")]
    UnknownRole(String),
    #[error("subject {0} already holds a live certificate")]
    DuplicateSubject(ParticipantId),
    #[error("malformed key: {0}")]
    MalformedKey(String),
    #[error("malformed signature: {0}")]
    MalformedSignature(String),
}

// ---------------------------------------------------------------------------
// Participant ids and roles
// ---------------------------------------------------------------------------

/// Network-unique participant name such as `cna.redhat` or `gov.board1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParticipantId(String);

fn participant_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"^[a-z0-9]+(\.[a-z0-9-]+)+$").expect("static pattern"))
}

impl ParticipantId {
    pub fn new(name: impl Into<String>) -> Result<Self, IdentityError> {
        let name = name.into();
        if participant_pattern().is_match(&name) {
            Ok(Self(name))
        } else {
            Err(IdentityError::InvalidParticipantId(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ParticipantId {
    type Err = IdentityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for ParticipantId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ParticipantId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::new(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    /// CVE Numbering Authority: submits and maintains records.
    Cna,
    /// Consortium governance member: onboards and revokes CNAs.
    Governance,
    /// Read-only auditor. Cannot sign transactions.
    Reader,
    /// Endorsing/committing node operated by an organization.
    Peer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Cna => "CNA",
            Role::Governance => "GOVERNANCE",
            Role::Reader => "READER",
            Role::Peer => "PEER",
        }
    }

    /// Whether a holder of this role may author ledger transactions.
    pub fn can_transact(self) -> bool {
        matches!(self, Role::Cna | Role::Governance)
    }
}

impl FromStr for Role {
    type Err = IdentityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CNA" => Ok(Role::Cna),
            "GOVERNANCE" => Ok(Role::Governance),
            "READER" => Ok(Role::Reader),
            "PEER" => Ok(Role::Peer),
            _ => Err(IdentityError::UnknownRole(s.to_string())),
        }
    }
}

// ---------------------------------------------------------------------------
// Keys and signatures
// ---------------------------------------------------------------------------

/// Ed25519 signing key. Signatures are deterministic (RFC 8032), so replaying
/// a ledger reproduces the same bytes.
#[derive(Clone)]
pub struct SigningKey(ed25519_dalek::SigningKey);

impl SigningKey {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self(ed25519_dalek::SigningKey::from_bytes(&seed))
    }

    /// Derive a key from a master seed and a label. Used by the simulator and
    /// tests so every run produces the same identities.
    pub fn derive(master: &[u8], label: &str) -> Self {
        let mut material = Vec::with_capacity(master.len() + label.len() + 1);
        material.extend_from_slice(master);
        material.push(0);
        material.extend_from_slice(label.as_bytes());
        Self::from_seed(canonical::sha256(&material))
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.verifying_key())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self, IdentityError> {
        let bytes = decode_lower_hex(text.trim()).map_err(IdentityError::MalformedKey)?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| IdentityError::MalformedKey("signing key must be 32 bytes".into()))?;
        Ok(Self::from_seed(seed))
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SigningKey({})", self.public_key())
    }
}

/// Ed25519 verification key, written as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(ed25519_dalek::VerifyingKey);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| IdentityError::MalformedKey(format!("expected 32 bytes, got {}", bytes.len())))?;
        ed25519_dalek::VerifyingKey::from_bytes(&arr)
            .map(Self)
            .map_err(|e| IdentityError::MalformedKey(e.to_string()))
    }

    pub fn from_hex(text: &str) -> Result<Self, IdentityError> {
        Self::from_bytes(&decode_lower_hex(text).map_err(IdentityError::MalformedKey)?)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        self.0.as_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.as_bytes())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature([u8; 64]);

impl Signature {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        bytes
            .try_into()
            .map(Self)
            .map_err(|_| IdentityError::MalformedSignature(format!("expected 64 bytes, got {}", bytes.len())))
    }

    pub fn to_bytes(&self) -> [u8; 64] {
        self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &self.to_hex()[..16])
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = decode_lower_hex(&s).map_err(serde::de::Error::custom)?;
        Self::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

pub fn sign_payload(key: &SigningKey, payload: &[u8]) -> Signature {
    Signature(key.0.sign(payload).to_bytes())
}

pub fn verify_payload(public_key: &PublicKey, payload: &[u8], sig: &Signature) -> bool {
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    public_key.0.verify_strict(payload, &sig).is_ok()
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Certificate {
    pub subject: ParticipantId,
    pub role: Role,
    pub public_key: PublicKey,
    pub serial: u64,
    pub issued_at: u64,
    pub ca_signature: Signature,
}

impl Certificate {
    /// The signed portion: length-prefixed fields in fixed order.
    pub fn signed_bytes(&self) -> Vec<u8> {
        encode_tbs(&self.subject, self.role, &self.public_key, self.serial, self.issued_at)
    }

    /// Lowercase hex SHA-256 of [`Certificate::signed_bytes`].
    pub fn cert_hash(&self) -> String {
        canonical::sha256_hex(&self.signed_bytes())
    }

    pub fn to_json_line(&self) -> String {
        canonical::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text.trim())
    }
}

fn encode_tbs(subject: &ParticipantId, role: Role, key: &PublicKey, serial: u64, issued_at: u64) -> Vec<u8> {
    fn field(out: &mut Vec<u8>, bytes: &[u8]) {
        out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(bytes);
    }
    let mut out = Vec::with_capacity(128);
    field(&mut out, subject.as_str().as_bytes());
    field(&mut out, role.as_str().as_bytes());
    field(&mut out, key.as_bytes());
    field(&mut out, &serial.to_be_bytes());
    field(&mut out, &issued_at.to_be_bytes());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertRejection {
    #[error("CA signature does not verify")]
    BadSignature,
    #[error("certificate serial is revoked")]
    Revoked,
}

/// Valid iff the CA signature verifies and the serial is not revoked.
pub fn verify_certificate(
    cert: &Certificate,
    crl: &RevocationList,
    ca_public_key: &PublicKey,
) -> Result<(), CertRejection> {
    if !verify_payload(ca_public_key, &cert.signed_bytes(), &cert.ca_signature) {
        return Err(CertRejection::BadSignature);
    }
    if crl.is_revoked(cert.serial) {
        return Err(CertRejection::Revoked);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Revocation list
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RevocationList {
    pub version: u64,
    pub revoked_serials: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Revocation {
    Revoked(RevocationList),
    /// The serial was already present; the list is unchanged.
    AlreadyRevoked,
}

impl RevocationList {
    pub fn is_revoked(&self, serial: u64) -> bool {
        self.revoked_serials.contains(&serial)
    }

    pub fn revoke(&self, serial: u64) -> Revocation {
        if self.is_revoked(serial) {
            return Revocation::AlreadyRevoked;
        }
        let mut next = self.clone();
        next.revoked_serials.insert(serial);
        next.version += 1;
        Revocation::Revoked(next)
    }

    /// In-place variant of [`RevocationList::revoke`]; returns whether the
    /// list changed.
    pub fn revoke_in_place(&mut self, serial: u64) -> bool {
        match self.revoke(serial) {
            Revocation::Revoked(next) => {
                *self = next;
                true
            }
            Revocation::AlreadyRevoked => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Certificate authority
// ---------------------------------------------------------------------------

/// Persistent issuance bookkeeping of a CA.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IssuerState {
    pub last_serial: u64,
    /// Most recent serial issued per subject.
    pub issued: BTreeMap<ParticipantId, u64>,
    pub crl: RevocationList,
}

/// The single network trust root. The serial counter is guarded by a mutex
/// so issuance is safe from several threads.
pub struct CertificateAuthority {
    key: SigningKey,
    state: Mutex<IssuerState>,
}

impl CertificateAuthority {
    pub fn new(key: SigningKey) -> Self {
        Self::restore(key, IssuerState::default())
    }

    pub fn restore(key: SigningKey, state: IssuerState) -> Self {
        Self { key, state: Mutex::new(state) }
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public_key()
    }

    pub fn signing_key(&self) -> &SigningKey {
        &self.key
    }

    pub fn snapshot(&self) -> IssuerState {
        self.state.lock().expect("CA state poisoned").clone()
    }

    pub fn crl(&self) -> RevocationList {
        self.snapshot().crl
    }

    pub fn issue_certificate(
        &self,
        subject: ParticipantId,
        role: Role,
        public_key: PublicKey,
        issued_at: u64,
    ) -> Result<Certificate, IdentityError> {
        let mut state = self.state.lock().expect("CA state poisoned");
        if let Some(serial) = state.issued.get(&subject) {
            if !state.crl.is_revoked(*serial) {
                return Err(IdentityError::DuplicateSubject(subject));
            }
        }
        let serial = state.last_serial + 1;
        let tbs = encode_tbs(&subject, role, &public_key, serial, issued_at);
        let cert = Certificate {
            subject: subject.clone(),
            role,
            public_key,
            serial,
            issued_at,
            ca_signature: sign_payload(&self.key, &tbs),
        };
        state.last_serial = serial;
        state.issued.insert(subject, serial);
        Ok(cert)
    }

    pub fn revoke_certificate(&self, serial: u64) -> Revocation {
        let mut state = self.state.lock().expect("CA state poisoned");
        let outcome = state.crl.revoke(serial);
        if let Revocation::Revoked(next) = &outcome {
            state.crl = next.clone();
        }
        outcome
    }

    /// Serial of the live certificate currently held by `subject`, if any.
    pub fn live_serial(&self, subject: &ParticipantId) -> Option<u64> {
        let state = self.state.lock().expect("CA state poisoned");
        state.issued.get(subject).copied().filter(|s| !state.crl.is_revoked(*s))
    }
}
