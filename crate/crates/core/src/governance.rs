// SPDX-License-Identifier: Apache-2.0

//! Architecture advisor: the "do you need a blockchain?" flowchart of
//! Wüst and Gervais as a pure function.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Answers to the six flowchart questions, in the order they are asked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DecisionInputs {
    pub need_store: bool,
    pub multiple_writers: bool,
    #[serde(rename = "onlineTTPAvailable")]
    pub online_ttp_available: bool,
    pub writers_known: bool,
    pub writers_trusted: bool,
    pub public_verifiability: bool,
}

impl DecisionInputs {
    /// The answers given for the CVE system: store data, many writers, no
    /// trusted third party, known but untrusted writers, public audit.
    pub const CVE_SYSTEM: Self = Self {
        need_store: true,
        multiple_writers: true,
        online_ttp_available: false,
        writers_known: true,
        writers_trusted: false,
        public_verifiability: true,
    };

    /// Decode six answer bits, `needStore` being the most significant.
    pub fn from_bits(bits: u8) -> Self {
        let bit = |i: u8| bits & (1 << (5 - i)) != 0;
        Self {
            need_store: bit(0),
            multiple_writers: bit(1),
            online_ttp_available: bit(2),
            writers_known: bit(3),
            writers_trusted: bit(4),
            public_verifiability: bit(5),
        }
    }

    pub fn to_bits(self) -> u8 {
        [
            self.need_store,
            self.multiple_writers,
            self.online_ttp_available,
            self.writers_known,
            self.writers_trusted,
            self.public_verifiability,
        ]
        .iter()
        .fold(0, |acc, &b| (acc << 1) | u8::from(b))
    }

    /// All 64 answer combinations.
    pub fn all() -> impl Iterator<Item = Self> {
        (0..64).map(Self::from_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArchitectureVerdict {
    NoBlockchain,
    Permissionless,
    PublicPermissioned,
    PrivatePermissioned,
}

impl ArchitectureVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchitectureVerdict::NoBlockchain => "NO_BLOCKCHAIN",
            ArchitectureVerdict::Permissionless => "PERMISSIONLESS",
            ArchitectureVerdict::PublicPermissioned => "PUBLIC_PERMISSIONED",
            ArchitectureVerdict::PrivatePermissioned => "PRIVATE_PERMISSIONED",
        }
    }
}

impl fmt::Display for ArchitectureVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The question whose answer settled the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Question {
    NeedStore,
    MultipleWriters,
    #[serde(rename = "onlineTTPAvailable")]
    OnlineTtpAvailable,
    WritersKnown,
    WritersTrusted,
    PublicVerifiability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decision {
    pub verdict: ArchitectureVerdict,
    pub decided_by: Question,
}

/// Walk the flowchart, stopping at the first terminal answer.
pub fn decide(inputs: &DecisionInputs) -> Decision {
    use ArchitectureVerdict::*;
    let (verdict, decided_by) = if !inputs.need_store {
        (NoBlockchain, Question::NeedStore)
    } else if !inputs.multiple_writers {
        (NoBlockchain, Question::MultipleWriters)
    } else if inputs.online_ttp_available {
        (NoBlockchain, Question::OnlineTtpAvailable)
    } else if !inputs.writers_known {
        (Permissionless, Question::WritersKnown)
    } else if inputs.writers_trusted {
        (NoBlockchain, Question::WritersTrusted)
    } else if inputs.public_verifiability {
        (PublicPermissioned, Question::PublicVerifiability)
    } else {
        (PrivatePermissioned, Question::PublicVerifiability)
    };
    Decision { verdict, decided_by }
}

pub fn decide_architecture(inputs: &DecisionInputs) -> ArchitectureVerdict {
    decide(inputs).verdict
}
