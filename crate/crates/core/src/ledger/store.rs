// SPDX-License-Identifier: Apache-2.0

//! Block-lines ledger file: one canonical-JSON block per line, append-only.
//!
//! The file is the only durable store. A crash in the middle of an append can
//! leave one partial trailing line; [`LedgerFile::open`] drops it (with a
//! warning) before anything else reads the file.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{Block, LedgerError};
use crate::canonical;

fn parse_line(line: &[u8], index: usize) -> Result<Block, LedgerError> {
    let block: Block = canonical::from_slice_strict(line)
        .map_err(|e| LedgerError::Malformed { line: index as u64, detail: e.to_string() })?;
    if block.height != index as u64 {
        return Err(LedgerError::Malformed {
            line: index as u64,
            detail: format!("line {index} holds height {}", block.height),
        });
    }
    Ok(block)
}

/// Parse every line. Each line, including the last, must end in `\n`.
pub fn parse_strict(bytes: &[u8]) -> Result<Vec<Block>, LedgerError> {
    let mut blocks = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        let index = blocks.len();
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(LedgerError::Malformed { line: index as u64, detail: "unterminated final line".into() });
        };
        blocks.push(parse_line(&rest[..end], index)?);
        rest = &rest[end + 1..];
    }
    Ok(blocks)
}

/// Parse the first `count` lines, stopping early at the first bad one.
pub fn parse_prefix(bytes: &[u8], count: usize) -> Vec<Block> {
    bytes
        .split(|&b| b == b'\n')
        .take(count)
        .enumerate()
        .map_while(|(i, line)| parse_line(line, i).ok())
        .collect()
}

pub fn encode(blocks: &[Block]) -> Vec<u8> {
    blocks.iter().flat_map(|b| b.to_line().into_bytes()).collect()
}

/// What [`LedgerFile::open`] had to repair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Recovery {
    /// Bytes of the partial trailing line that were discarded.
    pub dropped_bytes: u64,
}

/// Exclusive writer handle on a ledger file.
pub struct LedgerFile {
    path: PathBuf,
    file: File,
    blocks: Vec<Block>,
}

impl LedgerFile {
    /// Create a new ledger holding only `genesis`. Fails if the file exists.
    pub fn create(path: &Path, genesis: &Block) -> std::io::Result<Self> {
        let mut file = OpenOptions::new().read(true).write(true).create_new(true).open(path)?;
        lock(&file)?;
        file.write_all(genesis.to_line().as_bytes())?;
        file.sync_all()?;
        Ok(Self { path: path.to_path_buf(), file, blocks: vec![genesis.clone()] })
    }

    /// Open an existing ledger, truncating a partial trailing line left by an
    /// interrupted append. Complete lines are parsed strictly.
    pub fn open(path: &Path) -> Result<(Self, Recovery), OpenError> {
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        lock(&file)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let recovery = Recovery { dropped_bytes: (bytes.len() - complete) as u64 };
        if recovery.dropped_bytes > 0 {
            log::warn!(
                "{}: discarding {} bytes of a truncated trailing line",
                path.display(),
                recovery.dropped_bytes
            );
            file.set_len(complete as u64)?;
            file.sync_all()?;
            bytes.truncate(complete);
        }
        let blocks = parse_strict(&bytes)?;
        file.seek(SeekFrom::End(0))?;
        Ok((Self { path: path.to_path_buf(), file, blocks }, recovery))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn append(&mut self, block: &Block) -> std::io::Result<()> {
        self.file.write_all(block.to_line().as_bytes())?;
        self.file.sync_data()?;
        self.blocks.push(block.clone());
        Ok(())
    }
}

fn lock(file: &File) -> std::io::Result<()> {
    file.try_lock().map_err(|e| match e {
        std::fs::TryLockError::WouldBlock => {
            std::io::Error::new(std::io::ErrorKind::WouldBlock, "ledger is locked by another writer")
        }
        std::fs::TryLockError::Error(e) => e,
    })
}

/// Read a ledger without locking or repairing it (for readers and audits).
pub fn read_bytes(path: &Path) -> std::io::Result<Vec<u8>> {
    std::fs::read(path)
}

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}
