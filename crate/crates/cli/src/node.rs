// SPDX-License-Identifier: Apache-2.0

//! On-disk node: `config.json`, the CA file, an identity directory and the
//! ledger file. Everything else is rebuilt by replay when the node opens.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cvechain_core::chaincode::Operation;
use cvechain_core::identity::{Certificate, CertificateAuthority, IssuerState, ParticipantId, Role, SigningKey};
use cvechain_core::ledger::store::{self, LedgerFile, Recovery};
use cvechain_core::ledger::{state_hash, Block, TrustAnchors};
use cvechain_core::network::{EndorsementPolicy, Identity, Network, NetworkConfig, OrdererConfig};

use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.json";
pub const LEDGER_FILE: &str = "ledger.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NodeConfig {
    pub data_dir: PathBuf,
    /// Master secret all network keys derive from.
    pub seed: String,
    pub orgs: Vec<ParticipantId>,
    pub governance: Vec<ParticipantId>,
    pub endorsement_policy: EndorsementPolicy,
    pub orderer_config: OrdererConfig,
    pub genesis_time: u64,
    /// Relative paths are resolved against `dataDir`.
    pub ca_key_path: PathBuf,
    pub identity_key_path: PathBuf,
    pub listen_port: u16,
}

impl NodeConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        let net = NetworkConfig::default();
        Self {
            data_dir: data_dir.into(),
            seed: net.seed,
            orgs: net.orgs,
            governance: net.governance,
            endorsement_policy: net.policy,
            orderer_config: net.orderer,
            genesis_time: net.genesis_time,
            ca_key_path: "ca.json".into(),
            identity_key_path: "identities".into(),
            listen_port: 7051,
        }
    }

    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            seed: self.seed.clone(),
            orgs: self.orgs.clone(),
            governance: self.governance.clone(),
            policy: self.endorsement_policy.clone(),
            orderer: self.orderer_config.clone(),
            genesis_time: self.genesis_time,
        }
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.data_dir.join(path)
        }
    }

    pub fn ca_path(&self) -> PathBuf {
        self.resolve(&self.ca_key_path)
    }

    pub fn identity_dir(&self) -> PathBuf {
        self.resolve(&self.identity_key_path)
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.data_dir.join(LEDGER_FILE)
    }

    /// Read `<dir>/config.json`. `dataDir` is taken to be `dir`, so a data
    /// directory can be moved as a whole.
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&path).map_err(|e| {
            CliError::domain("NotInitialized", format!("{}: {e}", path.display()))
        })?;
        let mut config: NodeConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::domain("BadConfig", format!("{}: {e}", path.display())))?;
        config.data_dir = dir.to_path_buf();
        Ok(config)
    }

    pub fn save(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes") + "\n";
        write_atomic(&self.data_dir.join(CONFIG_FILE), text.as_bytes())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CaFile {
    secret_key: String,
    issuer: IssuerState,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct IdentityFile {
    certificate: Certificate,
    secret_key: String,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_ca(path: &Path) -> Result<CertificateAuthority, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::domain("NotInitialized", format!("{}: {e}", path.display())))?;
    let file: CaFile =
        serde_json::from_str(&text).map_err(|e| CliError::domain("BadConfig", format!("{}: {e}", path.display())))?;
    let key = SigningKey::from_hex(&file.secret_key).map_err(|e| CliError::domain("BadConfig", e.to_string()))?;
    Ok(CertificateAuthority::restore(key, file.issuer))
}

/// The CA public key from the CA file: the trust root for audits.
pub fn trust_anchors(config: &NodeConfig) -> Result<TrustAnchors, CliError> {
    Ok(TrustAnchors::ca(load_ca(&config.ca_path())?.public_key()))
}

/// Complete lines of the ledger file and the size of any partial tail,
/// read without locking or repairing.
pub fn read_complete(path: &Path) -> Result<(Vec<u8>, usize), CliError> {
    let mut bytes = store::read_bytes(path)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let dropped = bytes.len() - complete;
    bytes.truncate(complete);
    Ok((bytes, dropped))
}

pub struct Node {
    config: NodeConfig,
    network: Network,
    ledger: Option<LedgerFile>,
    recovery: Recovery,
}

impl Node {
    /// Create the CA, genesis block and governance identities in `config.dataDir`.
    pub fn init(config: NodeConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&config.data_dir)?;
        if config.data_dir.join(CONFIG_FILE).exists() || config.ledger_path().exists() {
            return Err(CliError::domain("AlreadyInitialized", config.data_dir.display().to_string()));
        }
        let network = Network::new(config.network())?;
        let ledger = LedgerFile::create(&config.ledger_path(), &network.chain().blocks()[0])?;
        fs::create_dir_all(config.identity_dir())?;
        let node = Self { config, network, ledger: Some(ledger), recovery: Recovery::default() };
        for member in &node.config.governance {
            let identity = node.network.identity(member).expect("genesis enrolls governance").clone();
            node.save_identity(&identity)?;
        }
        node.save_ca()?;
        node.config.save()?;
        Ok(node)
    }

    /// Open for writing: takes the ledger lock and drops a torn tail.
    pub fn open_writer(dir: &Path) -> Result<Self, CliError> {
        let config = NodeConfig::load(dir)?;
        let (ledger, recovery) = LedgerFile::open(&config.ledger_path())?;
        let blocks = ledger.blocks().to_vec();
        Self::assemble(config, blocks, Some(ledger), recovery)
    }

    /// Open read-only: no lock, complete lines only.
    pub fn open_reader(dir: &Path) -> Result<Self, CliError> {
        let config = NodeConfig::load(dir)?;
        let (bytes, dropped) = read_complete(&config.ledger_path())?;
        if dropped > 0 {
            log::warn!("ignoring {dropped} bytes of a truncated trailing line");
        }
        let blocks = store::parse_strict(&bytes)?;
        Self::assemble(config, blocks, None, Recovery { dropped_bytes: dropped as u64 })
    }

    fn assemble(
        config: NodeConfig,
        blocks: Vec<Block>,
        ledger: Option<LedgerFile>,
        recovery: Recovery,
    ) -> Result<Self, CliError> {
        let ca = load_ca(&config.ca_path())?;
        let mut network = Network::resume(config.network(), ca, blocks)?;
        let dir = config.identity_dir();
        if dir.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            for path in entries {
                let text = fs::read_to_string(&path)?;
                let file: IdentityFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::domain("BadIdentity", format!("{}: {e}", path.display())))?;
                let key = SigningKey::from_hex(&file.secret_key)
                    .map_err(|e| CliError::domain("BadIdentity", format!("{}: {e}", path.display())))?;
                network.add_identity(Identity { key, certificate: file.certificate });
            }
        }
        Ok(Self { config, network, ledger, recovery })
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn recovery(&self) -> &Recovery {
        &self.recovery
    }

    pub fn state_hash(&self) -> String {
        state_hash(self.network.state())
    }

    fn save_ca(&self) -> Result<(), CliError> {
        let ca = self.network.ca();
        let file = CaFile { secret_key: ca.signing_key().to_hex(), issuer: ca.snapshot() };
        write_atomic(&self.config.ca_path(), serde_json::to_string_pretty(&file).expect("serializes").as_bytes())
    }

    fn save_identity(&self, identity: &Identity) -> Result<(), CliError> {
        let file = IdentityFile { certificate: identity.certificate.clone(), secret_key: identity.key.to_hex() };
        let path = self.config.identity_dir().join(format!("{}.json", identity.certificate.subject));
        write_atomic(&path, serde_json::to_string_pretty(&file).expect("serializes").as_bytes())
    }

    fn writer(&mut self) -> Result<&mut LedgerFile, CliError> {
        self.ledger.as_mut().ok_or_else(|| CliError::domain("ReadOnly", "node was opened read-only"))
    }

    /// Have the CA issue a certificate for `subject` and store the key pair.
    pub fn issue(&mut self, subject: &ParticipantId, role: Role) -> Result<Certificate, CliError> {
        self.writer()?;
        let certificate =
            self.network.enroll(subject, role).map_err(|e| CliError::domain("IssueRefused", e.to_string()))?;
        let identity = self.network.identity(subject).expect("just enrolled").clone();
        self.save_identity(&identity)?;
        self.save_ca()?;
        Ok(certificate)
    }

    /// Move the block clock forward (never back).
    pub fn set_clock(&mut self, now: u64) -> Result<(), CliError> {
        Ok(self.network.set_clock(now)?)
    }

    /// Run one operation through endorsement, ordering and commit as a
    /// single-transaction block, and append that block to the ledger file.
    pub fn transact(&mut self, caller: &ParticipantId, operation: Operation) -> Result<Value, CliError> {
        self.writer()?;
        let tx_id = self.network.submit(caller, operation)?;
        let blocks = self.network.order_and_commit()?;
        let ledger = self.ledger.as_mut().expect("checked above");
        for block in &blocks {
            ledger.append(block)?;
        }
        self.save_ca()?;
        let peer = &self.network.peers()[0];
        let outcome = peer
            .replica()
            .outcomes
            .iter()
            .rev()
            .find(|o| o.tx_id == tx_id)
            .expect("committed transaction has an outcome")
            .clone();
        let block = blocks.last().expect("one block was cut");
        if let Some(code) = outcome.error {
            return Err(CliError::domain(code, outcome.detail.unwrap_or_default())
                .with("txId", tx_id)
                .with("height", block.height));
        }
        let events: Vec<Value> = peer
            .state()
            .event_log
            .iter()
            .filter(|e| e.block_height == block.height)
            .map(|e| serde_json::to_value(e).expect("events serialize"))
            .collect();
        Ok(json!({
            "txId": tx_id,
            "height": block.height,
            "blockHash": block.block_hash,
            "blockTime": block.block_time,
            "events": events,
            "stateHash": self.state_hash(),
        }))
    }
}
