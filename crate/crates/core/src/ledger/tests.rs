// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use super::store::{self, LedgerFile};
use super::*;
use crate::chaincode::seal::seal_record;
use crate::chaincode::Operation;
use crate::cve::{CveId, CveRecord, CveStatus, Severity, SeverityLevel, Version, VersionRange};
use crate::network::{mixed_workload, run_scenario_on, Network, NetworkConfig};

fn pid(s: &str) -> ParticipantId {
    ParticipantId::new(s).unwrap()
}

fn record(seq: u64, product: &str) -> CveRecord {
    CveRecord {
        cve_id: CveId { year: 2025, sequence: seq },
        description: format!("use after free number {seq}"),
        product: product.into(),
        version: vec![VersionRange::inclusive(Version::new(3, 1, 0), Version::new(3, 1, 7))],
        severity: Severity::new(SeverityLevel::Medium, Some(5.3)),
        status: CveStatus::Draft,
        embargo_until: None,
        submitter_cna: pid("cna.acme"),
        references: vec![],
        annotations: vec![],
        created_at: 0,
        updated_at: 0,
        seal: None,
    }
}

fn network() -> Network {
    let mut net = Network::new(NetworkConfig::default()).unwrap();
    let cna = pid("cna.acme");
    let cert = net.enroll(&cna, Role::Cna).unwrap();
    let op = Operation::OnboardCna { cna_id: cna, cert_hash: cert.cert_hash(), certificate: cert };
    net.submit(&pid("gov.board1"), op).unwrap();
    net.advance_tick().unwrap();
    net
}

/// Genesis, an onboarding block, then one submission per block.
fn chain_of(blocks: usize) -> (Network, TrustAnchors) {
    let mut net = network();
    let mut seq = 1;
    while (net.chain().height() as usize) < blocks - 1 {
        net.submit(&pid("cna.acme"), Operation::SubmitCve { record: record(seq, "widget") }).unwrap();
        net.advance_tick().unwrap();
        seq += 1;
    }
    let anchors = TrustAnchors::ca(net.ca().public_key());
    (net, anchors)
}

fn signed(net: &Network, seq: u64) -> Transaction {
    net.propose(&pid("cna.acme"), Operation::SubmitCve { record: record(seq, "widget") }).unwrap()
}

#[test]
fn append_links_to_parent() {
    let mut net = network();
    let genesis_only = Chain::new(net.chain().blocks()[0].clone()).unwrap();
    let txs = vec![net.endorse(signed(&net, 1)).unwrap(), net.endorse(signed(&net, 2)).unwrap()];
    let mut chain = genesis_only;
    let block = chain.append_block(txs, net.now()).unwrap().clone();
    assert_eq!(block.height, 1);
    assert_eq!(block.prev_hash, chain.blocks()[0].block_hash);
    assert_eq!(block.block_hash, block.compute_hash());
    assert_eq!(chain.blocks().len(), 2);
}

#[test]
fn unendorsed_transaction_is_rejected() {
    let net = network();
    let err = net.chain().next_block(vec![signed(&net, 1)], net.now()).unwrap_err();
    assert!(matches!(err, LedgerError::PolicyUnsatisfied { .. }));
}

#[test]
fn clock_regression_is_rejected() {
    let mut net = network();
    let tx = net.endorse(signed(&net, 1)).unwrap();
    let err = net.chain().next_block(vec![tx], net.chain().tip().block_time - 1).unwrap_err();
    assert!(matches!(err, LedgerError::ClockRegression { .. }));
}

#[test]
fn missing_genesis() {
    assert_eq!(Chain::from_blocks(vec![]).unwrap_err(), LedgerError::MissingGenesis);
    let empty = verify_chain(&[], &TrustAnchors::ca(SigningKey::derive(b"x", "ca").public_key()));
    assert!(!empty.valid);
}

#[test]
fn hundred_block_chain_verifies() {
    let (net, anchors) = chain_of(100);
    let report = verify_chain(net.chain().blocks(), &anchors);
    assert!(report.valid, "{report:?}");
    assert_eq!(report.blocks, 100);
    assert_eq!(report.first_bad_height, None);
}

#[test]
fn wrong_trust_anchor() {
    let (net, _) = chain_of(3);
    let other = TrustAnchors::ca(SigningKey::derive(b"other", "ca").public_key());
    let report = verify_chain(net.chain().blocks(), &other);
    assert_eq!((report.first_bad_height, report.reason), (Some(0), Some(AuditReason::SignatureInvalid)));
    let pinned = TrustAnchors { genesis_hash: Some(ZERO_HASH.into()), ..TrustAnchors::ca(net.ca().public_key()) };
    assert_eq!(verify_chain(net.chain().blocks(), &pinned).first_bad_height, Some(0));
}

#[test]
fn payload_byte_flip_in_block_seven() {
    let (net, anchors) = chain_of(10);
    let mut bytes = store::encode(net.chain().blocks());
    let line_start: usize = net.chain().blocks()[..7].iter().map(|b| b.to_line().len()).sum();
    let needle = b"use after free number";
    let offset = bytes[line_start..].windows(needle.len()).position(|w| w == needle).unwrap();
    bytes[line_start + offset] ^= 0x01;
    let report = audit_ledger_bytes(&bytes, &anchors, &mut SignatureCache::default());
    assert_eq!(report.first_bad_height, Some(7));
    assert_eq!(report.reason, Some(AuditReason::HashMismatch));
}

/// Sampled single-bit flips on a 5-block ledger: each is detected, at the
/// height of the line that holds the flipped bit.
#[test]
fn sampled_bit_flips_are_detected() {
    let (net, anchors) = chain_of(5);
    let pristine = store::encode(net.chain().blocks());
    let mut line_of = Vec::with_capacity(pristine.len());
    for (i, b) in net.chain().blocks().iter().enumerate() {
        line_of.extend(std::iter::repeat_n(i as u64, b.to_line().len()));
    }
    let mut cache = SignatureCache::default();
    assert!(audit_ledger_bytes(&pristine, &anchors, &mut cache).valid);
    let mut bytes = pristine.clone();
    for bit in (0..pristine.len() * 8).step_by(97) {
        let (byte, mask) = (bit / 8, 1u8 << (bit % 8));
        bytes[byte] ^= mask;
        let report = audit_ledger_bytes(&bytes, &anchors, &mut cache);
        assert!(!report.valid, "undetected flip at bit {bit}");
        assert_eq!(report.first_bad_height, Some(line_of[byte]), "bit {bit}");
        bytes[byte] ^= mask;
    }
}

#[test]
fn stripped_endorsement_is_insufficient() {
    let (net, anchors) = chain_of(6);
    let mut blocks = net.chain().blocks().to_vec();
    blocks[4].txs[0].endorsements.clear();
    let report = verify_chain(&blocks, &anchors);
    assert_eq!(report.first_bad_height, Some(4));
    assert_eq!(report.reason, Some(AuditReason::EndorsementInsufficient));
}

#[test]
fn clock_regression_in_stored_chain() {
    let (net, anchors) = chain_of(4);
    let mut blocks = net.chain().blocks().to_vec();
    blocks[3].block_time = blocks[2].block_time - 1;
    blocks[3].block_hash = blocks[3].compute_hash();
    let report = verify_chain(&blocks, &anchors);
    assert_eq!((report.first_bad_height, report.reason), (Some(3), Some(AuditReason::ClockRegression)));
}

#[test]
fn forged_caller_signature() {
    let (net, anchors) = chain_of(4);
    let mut blocks = net.chain().blocks().to_vec();
    blocks[2].txs[0].caller_signature = blocks[3].txs[0].caller_signature;
    let report = verify_chain(&blocks, &anchors);
    assert_eq!((report.first_bad_height, report.reason), (Some(2), Some(AuditReason::SignatureInvalid)));
}

#[test]
fn replay_examples() {
    let net = network();
    let chaincode = net.chaincode().clone();
    let genesis = &net.chain().blocks()[..1];
    let bootstrap = replay(genesis, &chaincode).unwrap();
    assert!(bootstrap.state.cve_registry.is_empty());
    assert!(bootstrap.state.is_governance(&pid("gov.board1")));

    let (net, _) = chain_of(3);
    let replica = replay(net.chain().blocks(), &chaincode).unwrap();
    assert_eq!(replica.state.cve_registry.len(), 1);
    assert_eq!(state_hash(&replica.state), net.peers()[0].state_hash());
}

#[test]
fn failed_transactions_are_recorded_and_skipped() {
    let mut net = network();
    net.submit(&pid("cna.acme"), Operation::SubmitCve { record: record(1, "widget") }).unwrap();
    // endorsed against the same state, so the duplicate only fails at commit
    let mut second = record(1, "gadget");
    second.description = "another text".into();
    net.submit(&pid("cna.acme"), Operation::SubmitCve { record: second }).unwrap();
    net.advance_tick().unwrap();
    let replica = replay(net.chain().blocks(), net.chaincode()).unwrap();
    let errors: Vec<_> = replica.outcomes.iter().filter_map(|o| o.error.as_deref()).collect();
    assert_eq!(errors, vec!["DuplicateCveId"]);
    assert_eq!(replica.state.cve_registry.len(), 1);
    assert_eq!(replica.state.cve_registry.values().next().unwrap().product, "widget");
}

#[test]
fn duplicate_tx_id_fails_at_commit() {
    let mut net = network();
    let tx = net.endorse(signed(&net, 1)).unwrap();
    let block = net.chain().next_block(vec![tx.clone(), tx], net.now()).unwrap();
    let mut replica = replay(net.chain().blocks(), net.chaincode()).unwrap();
    let outcomes = replica.apply_block(&block, net.chaincode()).to_vec();
    assert!(outcomes[0].committed());
    assert_eq!(outcomes[1].error.as_deref(), Some("DuplicateTxId"));
}

fn workload_chain(seed: u64) -> Network {
    let config = NetworkConfig::default();
    let script = mixed_workload(80, seed, &config);
    let mut net = Network::new(config).unwrap();
    run_scenario_on(&mut net, &script).unwrap();
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn replay_idempotent_and_prefix_consistent(seed in 0u64..1_000) {
        let net = workload_chain(seed);
        let blocks = net.chain().blocks();
        let chaincode = net.chaincode();
        let full = state_hash(&replay(blocks, chaincode).unwrap().state);
        prop_assert_eq!(&full, &state_hash(&replay(blocks, chaincode).unwrap().state));
        prop_assert_eq!(&full, &net.peers()[0].state_hash());
        for k in 1..=blocks.len() {
            let mut replica = replay(&blocks[..k], chaincode).unwrap();
            for block in &blocks[k..] {
                replica.apply_block(block, chaincode);
            }
            prop_assert_eq!(&state_hash(&replica.state), &full);
        }
    }
}

#[test]
fn state_hash_distinguishes_states() {
    let (a, _) = chain_of(3);
    let (b, _) = chain_of(4);
    assert_ne!(a.peers()[0].state_hash(), b.peers()[0].state_hash());
    assert_eq!(state_hash(a.state()).len(), 64);
}

fn mixed_registry() -> Network {
    let mut net = network();
    let acme = pid("cna.acme");
    net.submit(&acme, Operation::SubmitCve { record: record(1, "widget") }).unwrap();
    let mut embargoed = record(2, "secret-product");
    embargoed.description = "embargoed plaintext".into();
    embargoed.embargo_until = Some(net.now() + 1_000);
    let sealed = seal_record(&embargoed, &net.config().embargo_key());
    net.submit(&acme, Operation::SubmitCve { record: sealed }).unwrap();
    net.submit(&acme, Operation::SubmitCve { record: record(3, "gadget") }).unwrap();
    net.advance_tick().unwrap();
    net.submit(&acme, Operation::UpdateCveStatus { cve_id: "CVE-2025-0003".parse().unwrap(), new_status: CveStatus::Archived })
        .unwrap();
    net.advance_tick().unwrap();
    net
}

#[test]
fn query_filters() {
    let net = mixed_registry();
    let published = query_public(net.state(), &QueryFilter { status: Some(CveStatus::Published), ..Default::default() });
    assert_eq!(published.iter().map(|v| v.cve_id.to_string()).collect::<Vec<_>>(), vec!["CVE-2025-0001"]);
    let unknown = QueryFilter { product: Some("no-such-product".into()), ..Default::default() };
    assert!(query_public(net.state(), &unknown).is_empty());
    let by_year = QueryFilter { year: Some(2025), ..Default::default() };
    assert_eq!(query_public(net.state(), &by_year).len(), 3);
    let by_submitter = QueryFilter { submitter: Some(pid("cna.other")), ..Default::default() };
    assert!(query_public(net.state(), &by_submitter).is_empty());
}

#[test]
fn draft_view_hides_content() {
    let net = mixed_registry();
    let id: CveId = "CVE-2025-0002".parse().unwrap();
    let views = query_public(net.state(), &QueryFilter { id: Some(id), ..Default::default() });
    assert_eq!(views.len(), 1);
    let view = &views[0];
    assert_eq!(view.status, CveStatus::Draft);
    assert!(view.description.is_none() && view.product.is_none() && view.version.is_none());
    assert!(view.content_commitment.is_some() && view.commitment_salt.is_none());
    let text = canonical::to_string(&views);
    assert!(!text.contains("embargoed plaintext") && !text.contains("secret-product"));
    // the sealed product cannot be probed through the filter
    let probe = QueryFilter { product: Some("secret-product".into()), ..Default::default() };
    assert!(query_public(net.state(), &probe).is_empty());
}

#[test]
fn store_round_trip_and_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let (net, anchors) = chain_of(4);
    let blocks = net.chain().blocks();
    {
        let mut file = LedgerFile::create(&path, &blocks[0]).unwrap();
        let mut previous = store::read_bytes(&path).unwrap();
        for block in &blocks[1..] {
            file.append(block).unwrap();
            let now = store::read_bytes(&path).unwrap();
            assert_eq!(&now[..previous.len()], &previous[..], "committed bytes changed");
            previous = now;
        }
    }
    let bytes = store::read_bytes(&path).unwrap();
    assert_eq!(bytes, store::encode(blocks));
    assert!(audit_ledger_bytes(&bytes, &anchors, &mut SignatureCache::default()).valid);
    let (reopened, recovery) = LedgerFile::open(&path).unwrap();
    assert_eq!(recovery.dropped_bytes, 0);
    assert_eq!(reopened.blocks(), blocks);
    assert!(LedgerFile::create(&path, &blocks[0]).is_err());
}

#[test]
fn single_writer_lock() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let (net, _) = chain_of(2);
    let _writer = LedgerFile::create(&path, &net.chain().blocks()[0]).unwrap();
    assert!(LedgerFile::open(&path).is_err());
}

#[test]
fn truncated_tail_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let (net, anchors) = chain_of(5);
    let full = store::encode(net.chain().blocks());
    let last_len = net.chain().tip().to_line().len();
    let cut = full.len() - last_len / 2;
    std::fs::write(&path, &full[..cut]).unwrap();

    // the strict audit refuses the torn file
    let torn = audit_ledger_bytes(&full[..cut], &anchors, &mut SignatureCache::default());
    assert_eq!(torn.first_bad_height, Some(4));

    let (file, recovery) = LedgerFile::open(&path).unwrap();
    assert_eq!(recovery.dropped_bytes as usize, last_len - last_len / 2);
    assert_eq!(file.blocks(), &net.chain().blocks()[..4]);
    drop(file);
    assert_eq!(std::fs::read(&path).unwrap(), &full[..full.len() - last_len]);
}

#[test]
fn strict_parse_rules() {
    let (net, _) = chain_of(2);
    let bytes = store::encode(net.chain().blocks());
    assert!(store::parse_strict(&bytes[..bytes.len() - 1]).is_err());
    let pretty = serde_json::to_string_pretty(&net.chain().blocks()[0]).unwrap() + "\n";
    assert!(matches!(store::parse_strict(pretty.as_bytes()), Err(LedgerError::Malformed { line: 0, .. })));
    // lines out of height order
    let lines: Vec<u8> = [net.chain().blocks()[1].to_line(), net.chain().blocks()[0].to_line()].concat().into_bytes();
    assert!(store::parse_strict(&lines).is_err());
}
