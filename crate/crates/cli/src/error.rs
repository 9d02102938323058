// SPDX-License-Identifier: Apache-2.0

use serde_json::{Map, Value};

use cvechain_core::canonical;
use cvechain_core::ledger::store::OpenError;
use cvechain_core::ledger::LedgerError;
use cvechain_core::network::{NetworkError, Refusal, SubmitError};

/// Exit status for a rejected operation or an invalid ledger.
pub const EXIT_DOMAIN: i32 = 1;
/// Exit status for bad arguments or unreadable input files.
pub const EXIT_USAGE: i32 = 2;

/// A failed command, reported as one JSON line on stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub exit_code: i32,
    pub code: String,
    pub detail: String,
    pub extra: Map<String, Value>,
}

impl CliError {
    pub fn domain(code: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { exit_code: EXIT_DOMAIN, code: code.into(), detail: detail.into(), extra: Map::new() }
    }

    pub fn usage(code: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { exit_code: EXIT_USAGE, code: code.into(), detail: detail.into(), extra: Map::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json_line(&self) -> String {
        let mut obj = self.extra.clone();
        obj.insert("error".into(), self.code.clone().into());
        obj.insert("detail".into(), self.detail.clone().into());
        canonical::to_string(&Value::Object(obj))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::WouldBlock {
            return CliError::domain("Locked", e.to_string());
        }
        CliError::domain("IoError", e.to_string())
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        let code = match e {
            LedgerError::ClockRegression { .. } => "ClockRegression",
            LedgerError::Malformed { .. } => "MalformedLedger",
            _ => "LedgerError",
        };
        CliError::domain(code, e.to_string())
    }
}

impl From<OpenError> for CliError {
    fn from(e: OpenError) -> Self {
        match e {
            OpenError::Io(e) => e.into(),
            OpenError::Ledger(e) => e.into(),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Ledger(e) => e.into(),
            other => CliError::domain("NetworkError", other.to_string()),
        }
    }
}

impl From<Refusal> for CliError {
    fn from(r: Refusal) -> Self {
        let err = CliError::domain(r.code, r.detail);
        match r.peer_id {
            Some(peer) => err.with("peerId", peer.as_str()),
            None => err,
        }
    }
}

impl From<SubmitError> for CliError {
    fn from(e: SubmitError) -> Self {
        match e {
            SubmitError::Refused(r) => r.into(),
            SubmitError::Ledger(e) => e.into(),
        }
    }
}
