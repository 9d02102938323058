// SPDX-License-Identifier: Apache-2.0

//! `cvechain` operator tool: data-directory storage, the command surface,
//! the read-only query service and the benchmark harness.

pub mod bench;
pub mod commands;
pub mod error;
pub mod node;
pub mod server;

pub use commands::cli_main;
pub use error::CliError;
pub use node::{Node, NodeConfig};
