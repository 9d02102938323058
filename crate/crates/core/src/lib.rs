// SPDX-License-Identifier: Apache-2.0

//! Permissioned, hash-chained ledger for publishing CVE records.
//!
//! Certificate-authenticated CVE Numbering Authorities submit records as
//! signed transactions. Peers endorse them, an orderer batches them into
//! blocks, and every peer replays the blocks through the same deterministic
//! chaincode to derive its world state.

pub mod canonical;
pub mod chaincode;
pub mod corrections;
pub mod cve;
pub mod governance;
pub mod identity;
pub mod ledger;
pub mod network;
