// SPDX-License-Identifier: Apache-2.0

//! Canonical JSON: lexicographically sorted object keys, no whitespace, UTF-8.
//!
//! Every hashed or signed byte string in the ledger goes through here, so two
//! peers serializing the same value always agree on the bytes.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Serialize `value` to canonical JSON bytes.
///
/// Routing through [`serde_json::Value`] sorts every object's keys, since the
/// map type backing `Value` is ordered when `preserve_order` is off.
pub fn to_vec<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("domain types always serialize to JSON");
    serde_json::to_vec(&value).expect("a JSON value always serializes")
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(to_vec(value)).expect("serde_json emits UTF-8")
}

/// Parse `bytes` and require that they are already in canonical form.
///
/// Accepting a non-canonical encoding would let two different byte strings
/// stand for the same logical value, which breaks tamper detection.
pub fn from_slice_strict<T: Serialize + DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonicalError> {
    let value: T = serde_json::from_slice(bytes).map_err(|e| CanonicalError::Parse(e.to_string()))?;
    if to_vec(&value) != bytes {
        return Err(CanonicalError::NotCanonical);
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("input is valid JSON but not in canonical form")]
    NotCanonical,
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(sha256(bytes))
}

/// Lowercase hex SHA-256 of the canonical serialization of `value`.
pub fn hash_hex<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(&to_vec(value))
}

/// Serde adapter for byte vectors written as lowercase hex.
///
/// Decoding rejects uppercase digits so that every byte string has exactly
/// one textual form.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        super::decode_lower_hex(&text).map_err(serde::de::Error::custom)
    }
}

pub fn decode_lower_hex(text: &str) -> Result<Vec<u8>, String> {
    if text.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(format!("hex string must be lowercase: {text}"));
    }
    hex::decode(text).map_err(|e| e.to_string())
}
