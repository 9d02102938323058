// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use cvechain_core::canonical;
use cvechain_core::chaincode::seal::seal_record;
use cvechain_core::chaincode::Operation;
use cvechain_core::corrections::{MergeCandidate, SplitCandidate};
use cvechain_core::cve::{CveId, CveRecord, CveStatus, Severity, VersionRange};
use cvechain_core::governance::{decide, DecisionInputs};
use cvechain_core::identity::{Certificate, ParticipantId, Role};
use cvechain_core::ledger::{query_public, QueryFilter};
use cvechain_core::ledger::{audit_ledger_bytes, SignatureCache};
use cvechain_core::network::EndorsementPolicy;

use crate::bench::bench;
use crate::error::{CliError, EXIT_USAGE};
use crate::node::{trust_anchors, Node, NodeConfig};
use crate::server;

#[derive(Debug, Parser)]
#[command(name = "cvechain", version, about = "Permissioned ledger node for CVE records")]
struct Cli {
    /// Node data directory.
    #[arg(long, global = true, env = "CVECHAIN_DATA_DIR", default_value = "cvechain-data")]
    data_dir: PathBuf,
    /// Participant that signs the transaction (default: first governance member).
    #[arg(long = "as", global = true, value_name = "PARTICIPANT")]
    caller: Option<ParticipantId>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoleArg {
    Cna,
    Governance,
    Reader,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Cna => Role::Cna,
            RoleArg::Governance => Role::Governance,
            RoleArg::Reader => Role::Reader,
        }
    }
}

#[derive(Debug, Args)]
struct InitArgs {
    /// Number of peer organizations.
    #[arg(long, default_value_t = 3)]
    orgs: usize,
    /// Master secret all keys derive from.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, value_name = "UNIX")]
    genesis_time: Option<u64>,
    /// Endorsement policy as JSON, e.g. '{"rule":"ANY_N","n":2}'.
    #[arg(long)]
    policy: Option<String>,
    /// Transactions per block before the orderer cuts.
    #[arg(long)]
    max_block_txs: Option<usize>,
    /// Block clock step of `tick` without `--now`.
    #[arg(long)]
    tick_seconds: Option<u64>,
    /// Port for `serve`.
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create the CA, genesis block and governance identities.
    Init(InitArgs),
    /// Issue a certificate and key pair; prints the certificate.
    Issue {
        subject: ParticipantId,
        #[arg(long, value_enum, default_value = "cna")]
        role: RoleArg,
        /// Also write the certificate to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Authorize a CNA holding the certificate in CERTFILE.
    Onboard { cna: ParticipantId, certfile: PathBuf },
    /// Withdraw a CNA's authorization and revoke its certificate.
    Revoke { cna: ParticipantId },
    /// Submit the record in RECORD (JSON).
    Submit {
        record: PathBuf,
        /// Embargo the record until this time; its content is sealed.
        #[arg(long, value_name = "UNIX")]
        embargo: Option<u64>,
    },
    /// Change a record's status.
    Status { cve_id: CveId, new_status: CveStatus },
    /// Reject a record; the reason is kept as an annotation.
    Reject {
        cve_id: CveId,
        #[arg(long)]
        reason: String,
    },
    /// Mark a published record as disputed.
    Dispute {
        cve_id: CveId,
        #[arg(long)]
        reason: String,
        /// External reference backing the dispute.
        #[arg(long = "ref")]
        external_ref: Option<String>,
    },
    /// Merge duplicate records; META holds one candidate per id.
    Merge {
        #[arg(required = true, num_args = 2..)]
        ids: Vec<CveId>,
        /// JSON array of merge candidates.
        #[arg(long)]
        meta: PathBuf,
    },
    /// Split a record that covers several vulnerabilities.
    Split {
        cve_id: CveId,
        /// JSON array of split candidates.
        #[arg(long)]
        candidates: PathBuf,
    },
    /// Resolve two records whose affected versions partly overlap.
    Partialdup { keep: CveId, revise: CveId },
    /// Advance the block clock and release due embargoes.
    Tick {
        /// New block time (default: current plus tickSeconds).
        #[arg(long, value_name = "UNIX")]
        now: Option<u64>,
    },
    /// List public record views.
    Query {
        #[arg(long)]
        status: Option<CveStatus>,
        #[arg(long)]
        product: Option<String>,
        #[arg(long)]
        year: Option<u32>,
        #[arg(long)]
        id: Option<CveId>,
    },
    /// Verify the ledger file; exit 0 iff it is valid.
    Audit,
    /// Rebuild state from the ledger and print its hash.
    Replay,
    /// Run the blockchain decision flowchart.
    Decide {
        /// State must be stored.
        #[arg(long)]
        store: bool,
        /// There are multiple writers.
        #[arg(long)]
        writers: bool,
        /// An always-online trusted third party is available.
        #[arg(long)]
        ttp: bool,
        /// All writers are known.
        #[arg(long)]
        known: bool,
        /// All writers are trusted.
        #[arg(long)]
        trusted: bool,
        /// Public verifiability is required.
        #[arg(long)]
        public: bool,
    },
    /// Measure throughput and latency of a simulated network.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        txs: usize,
        #[arg(long, default_value_t = 3)]
        peers: usize,
    },
    /// Serve read-only query endpoints.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

/// A record as written by an operator. Without `cveID` the next free number
/// of `year` (default 2025) is assigned.
#[derive(Debug, Deserialize, Serialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RecordInput {
    #[serde(rename = "cveID", default)]
    pub cve_id: Option<CveId>,
    #[serde(default)]
    pub year: Option<u32>,
    pub description: String,
    pub product: String,
    pub version: Vec<VersionRange>,
    pub severity: Severity,
    #[serde(default)]
    pub embargo_until: Option<u64>,
    #[serde(default)]
    pub references: Vec<CveId>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage("BadInput", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage("BadInput", format!("{}: {e}", path.display())))
}

fn emit(value: &impl Serialize) {
    println!("{}", canonical::to_string(value));
}

/// Parse `argv`, run the command and return the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let detail = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", CliError::usage("UsageError", detail).to_json_line());
            return EXIT_USAGE;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code
        }
    }
}

fn caller_or_governor(node: &Node, caller: &Option<ParticipantId>) -> ParticipantId {
    caller.clone().unwrap_or_else(|| node.config().governance[0].clone())
}

/// Open the node, run one operation and print its receipt.
fn transact(cli: &Cli, build: impl FnOnce(&Node) -> Result<Operation, CliError>) -> Result<(), CliError> {
    let mut node = Node::open_writer(&cli.data_dir)?;
    let operation = build(&node)?;
    let caller = caller_or_governor(&node, &cli.caller);
    emit(&node.transact(&caller, operation)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Init(args) => {
            let mut config = NodeConfig::new(&cli.data_dir);
            let defaults = cvechain_core::network::NetworkConfig::with_orgs(args.orgs);
            config.orgs = defaults.orgs;
            if let Some(seed) = &args.seed {
                config.seed = seed.clone();
            }
            if let Some(t) = args.genesis_time {
                config.genesis_time = t;
            }
            if let Some(text) = &args.policy {
                config.endorsement_policy = serde_json::from_str::<EndorsementPolicy>(text)
                    .map_err(|e| CliError::usage("BadPolicy", e.to_string()))?;
            }
            if let Some(n) = args.max_block_txs {
                config.orderer_config.max_block_txs = n;
            }
            if let Some(s) = args.tick_seconds {
                config.orderer_config.tick_seconds = s;
            }
            if let Some(port) = args.port {
                config.listen_port = port;
            }
            let node = Node::init(config)?;
            let genesis = &node.network().chain().blocks()[0];
            emit(&json!({
                "dataDir": node.config().data_dir,
                "genesisHash": genesis.block_hash,
                "governance": node.config().governance,
                "peers": node.network().peers().iter().map(|p| p.peer_id().as_str()).collect::<Vec<_>>(),
            }));
            Ok(())
        }
        Command::Issue { subject, role, out } => {
            let mut node = Node::open_writer(&cli.data_dir)?;
            let certificate = node.issue(subject, (*role).into())?;
            if let Some(path) = out {
                fs::write(path, certificate.to_json_line())?;
            }
            emit(&certificate);
            Ok(())
        }
        Command::Onboard { cna, certfile } => {
            let certificate: Certificate = read_json(certfile)?;
            if &certificate.subject != cna {
                return Err(CliError::usage(
                    "CertificateMismatch",
                    format!("certificate subject {} is not {cna}", certificate.subject),
                ));
            }
            transact(&cli, |_| {
                Ok(Operation::OnboardCna { cna_id: cna.clone(), cert_hash: certificate.cert_hash(), certificate })
            })
        }
        Command::Revoke { cna } => transact(&cli, |_| Ok(Operation::RevokeCna { cna_id: cna.clone() })),
        Command::Submit { record, embargo } => {
            let input: RecordInput = read_json(record)?;
            let submitter = cli
                .caller
                .clone()
                .ok_or_else(|| CliError::usage("UsageError", "submit needs --as <cna>"))?;
            transact(&cli, |node| {
                let cve_id = match input.cve_id {
                    Some(id) => id,
                    None => node
                        .network()
                        .state()
                        .peek_next_id(input.year.unwrap_or(2025))
                        .map_err(|e| CliError::domain(e.code(), e.to_string()))?,
                };
                let embargo_until = embargo.or(input.embargo_until);
                let mut record = CveRecord {
                    cve_id,
                    description: input.description,
                    product: input.product,
                    version: input.version,
                    severity: input.severity,
                    status: CveStatus::Draft,
                    embargo_until,
                    submitter_cna: submitter,
                    references: input.references,
                    annotations: Vec::new(),
                    created_at: 0,
                    updated_at: 0,
                    seal: None,
                };
                if embargo_until.is_some() {
                    record = seal_record(&record, &node.config().network().embargo_key());
                }
                Ok(Operation::SubmitCve { record })
            })
        }
        Command::Status { cve_id, new_status } => {
            transact(&cli, |_| Ok(Operation::UpdateCveStatus { cve_id: *cve_id, new_status: *new_status }))
        }
        Command::Reject { cve_id, reason } => {
            transact(&cli, |_| Ok(Operation::RejectCve { cve_id: *cve_id, reason: reason.clone() }))
        }
        Command::Dispute { cve_id, reason, external_ref } => transact(&cli, |_| {
            Ok(Operation::DisputeCve { cve_id: *cve_id, note: reason.clone(), external_ref: external_ref.clone() })
        }),
        Command::Merge { ids, meta } => {
            let candidates: Vec<MergeCandidate> = read_json(meta)?;
            let named: BTreeSet<CveId> = ids.iter().copied().collect();
            let described: BTreeSet<CveId> = candidates.iter().map(|c| c.cve_id).collect();
            if named != described || named.len() != ids.len() {
                return Err(CliError::usage("CandidateMismatch", "--meta must describe exactly the listed ids"));
            }
            transact(&cli, |_| Ok(Operation::MergeCves { candidates }))
        }
        Command::Split { cve_id, candidates } => {
            let candidates: Vec<SplitCandidate> = read_json(candidates)?;
            transact(&cli, |_| Ok(Operation::SplitCve { cve_id: *cve_id, candidates }))
        }
        Command::Partialdup { keep, revise } => {
            transact(&cli, |_| Ok(Operation::ResolvePartialDuplicate { keep_id: *keep, revise_id: *revise }))
        }
        Command::Tick { now } => {
            let mut node = Node::open_writer(&cli.data_dir)?;
            let target = match now {
                Some(t) => *t,
                None => node.network().now() + node.config().orderer_config.tick_seconds,
            };
            node.set_clock(target)?;
            let caller = caller_or_governor(&node, &cli.caller);
            emit(&node.transact(&caller, Operation::CheckEmbargoReleases {})?);
            Ok(())
        }
        Command::Query { status, product, year, id } => {
            let node = Node::open_reader(&cli.data_dir)?;
            let filter =
                QueryFilter { id: *id, status: *status, product: product.clone(), year: *year, submitter: None };
            emit(&query_public(node.network().state(), &filter));
            Ok(())
        }
        Command::Audit => {
            let config = NodeConfig::load(&cli.data_dir)?;
            let anchors = trust_anchors(&config)?;
            let bytes = fs::read(config.ledger_path())?;
            let report = audit_ledger_bytes(&bytes, &anchors, &mut SignatureCache::default());
            emit(&report);
            if report.valid {
                return Ok(());
            }
            let reason = serde_json::to_value(report.reason).expect("reason serializes");
            Err(CliError::domain("AuditFailed", report.detail.clone().unwrap_or_default())
                .with("reason", reason)
                .with("firstBadHeight", json!(report.first_bad_height)))
        }
        Command::Replay => {
            let node = Node::open_reader(&cli.data_dir)?;
            let chain = node.network().chain();
            emit(&json!({
                "height": chain.height(),
                "tipHash": chain.tip().block_hash,
                "stateHash": node.state_hash(),
                "droppedBytes": node.recovery().dropped_bytes,
            }));
            Ok(())
        }
        Command::Decide { store, writers, ttp, known, trusted, public } => {
            let inputs = DecisionInputs {
                need_store: *store,
                multiple_writers: *writers,
                online_ttp_available: *ttp,
                writers_known: *known,
                writers_trusted: *trusted,
                public_verifiability: *public,
            };
            let decision = decide(&inputs);
            emit(&json!({"inputs": inputs, "verdict": decision.verdict, "decidedBy": decision.decided_by}));
            Ok(())
        }
        Command::Bench { txs, peers } => {
            if *peers == 0 {
                return Err(CliError::usage("UsageError", "--peers must be at least 1"));
            }
            emit(&bench(*txs, *peers)?);
            Ok(())
        }
        Command::Serve { port } => {
            let config = NodeConfig::load(&cli.data_dir)?;
            let port = port.unwrap_or(config.listen_port);
            server::serve(&config, port)
        }
    }
}

