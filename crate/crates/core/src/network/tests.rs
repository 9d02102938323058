// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use super::scenario::{percentile, MemberArgs, SubmitArgs, TickArgs};
use super::*;
use crate::canonical;
use crate::cve::{CveId, CveRecord, CveStatus, Severity, SeverityLevel, Version, VersionRange};
use crate::ledger::{verify_chain, AuditReason, QueryFilter};

fn pid(s: &str) -> ParticipantId {
    ParticipantId::new(s).unwrap()
}

fn orgs(names: &[&str]) -> BTreeSet<ParticipantId> {
    names.iter().map(|n| pid(n)).collect()
}

fn record(seq: u64, submitter: &str) -> CveRecord {
    CveRecord {
        cve_id: CveId { year: 2025, sequence: seq },
        description: format!("heap overflow {seq}"),
        product: "widget".into(),
        version: vec![VersionRange::inclusive(Version::new(1, 0, 0), Version::new(1, 4, 2))],
        severity: Severity::new(SeverityLevel::High, Some(7.5)),
        status: CveStatus::Draft,
        embargo_until: None,
        submitter_cna: pid(submitter),
        references: vec![],
        annotations: vec![],
        created_at: 0,
        updated_at: 0,
        seal: None,
    }
}

/// A network with `cna.acme` onboarded and committed.
fn network_with_cna(config: NetworkConfig) -> Network {
    let mut net = Network::new(config).unwrap();
    let cna = pid("cna.acme");
    let cert = net.enroll(&cna, Role::Cna).unwrap();
    let op = Operation::OnboardCna { cna_id: cna, cert_hash: cert.cert_hash(), certificate: cert };
    net.submit(&pid("gov.board1"), op).unwrap();
    net.advance_tick().unwrap();
    net
}

fn submit_args(caller: &str, description: &str, embargo_until: Option<u64>) -> SubmitArgs {
    SubmitArgs {
        caller: pid(caller),
        cve_id: None,
        year: None,
        description: description.into(),
        product: "widget".into(),
        version: vec![VersionRange::inclusive(Version::new(2, 0, 0), Version::new(2, 3, 0))],
        severity: Severity::new(SeverityLevel::Critical, Some(9.8)),
        embargo_until,
        references: vec![],
    }
}

#[test]
fn policy_rules() {
    let any2 = EndorsementPolicy::AnyN { n: 2 };
    assert!(!any2.is_satisfied(1, &orgs(&["a.x"])));
    assert!(any2.is_satisfied(2, &orgs(&["a.x"])));

    let majority = EndorsementPolicy::MajorityOf { orgs: orgs(&["a.x", "b.x", "c.x"]) };
    assert!(!majority.is_satisfied(1, &orgs(&["a.x"])));
    assert!(majority.is_satisfied(2, &orgs(&["a.x", "c.x"])));
    // endorsements from outside the set do not count
    assert!(!majority.is_satisfied(3, &orgs(&["a.x", "d.x", "e.x"])));
    let even = EndorsementPolicy::MajorityOf { orgs: orgs(&["a.x", "b.x"]) };
    assert!(!even.is_satisfied(1, &orgs(&["a.x"])));

    let all = EndorsementPolicy::AllOf { orgs: orgs(&["a.x", "b.x"]) };
    assert!(!all.is_satisfied(1, &orgs(&["a.x"])));
    assert!(all.is_satisfied(2, &orgs(&["a.x", "b.x"])));
}

#[test]
fn policy_validation_and_serde() {
    let peers = vec![pid("a.x"), pid("b.x")];
    assert_eq!(EndorsementPolicy::AnyN { n: 0 }.validate(&peers), Err(PolicyError::ZeroQuorum));
    assert_eq!(
        EndorsementPolicy::AnyN { n: 3 }.validate(&peers),
        Err(PolicyError::Unsatisfiable { n: 3, peers: 2 })
    );
    assert_eq!(EndorsementPolicy::AllOf { orgs: BTreeSet::new() }.validate(&peers), Err(PolicyError::EmptyOrgSet));
    assert_eq!(
        EndorsementPolicy::MajorityOf { orgs: orgs(&["c.x"]) }.validate(&peers),
        Err(PolicyError::UnknownOrg(pid("c.x")))
    );
    assert_eq!(canonical::to_string(&EndorsementPolicy::default()), r#"{"n":1,"rule":"ANY_N"}"#);
    let parsed: EndorsementPolicy = serde_json::from_str(r#"{"rule":"MAJORITY_OF","orgs":["a.x","b.x"]}"#).unwrap();
    assert_eq!(parsed.to_string(), "MAJORITY_OF(a.x,b.x)");
}

#[test]
fn orderer_clock() {
    let cfg = OrdererConfig::default();
    assert_eq!(cfg.time_at(100, 0), 100);
    assert_eq!(cfg.time_at(100, 5), 105);
    let scripted = OrdererConfig { clock_source: vec![100, 160, 160], tick_seconds: 10, ..cfg };
    assert_eq!(scripted.time_at(0, 1), 160);
    assert_eq!(scripted.time_at(0, 2), 160);
    assert_eq!(scripted.time_at(0, 4), 180);
}

#[test]
fn config_validation() {
    assert!(NetworkConfig::default().validate().is_ok());
    let mut dup = NetworkConfig::default();
    dup.orgs.push(dup.orgs[0].clone());
    assert!(dup.validate().is_err());
    let mut clock = NetworkConfig::default();
    clock.orderer.clock_source = vec![clock.genesis_time + 5, clock.genesis_time + 1];
    assert!(clock.validate().is_err());
}

#[test]
fn genesis_topology() {
    let net = Network::new(NetworkConfig::default()).unwrap();
    assert_eq!(net.peers().len(), 3);
    assert_eq!(net.peers()[1].peer_id().as_str(), "peer0.cna.org2");
    assert_eq!(net.chain().height(), 0);
    let genesis = &net.chain().blocks()[0];
    assert!(verify_chain(net.chain().blocks(), &TrustAnchors::ca(net.ca().public_key())).valid);
    assert_eq!(genesis.genesis.as_ref().unwrap().config.governance, vec![pid("gov.board1")]);
}

#[test]
fn endorse_valid_submit() {
    let mut net = network_with_cna(NetworkConfig::default());
    let tx = net.propose(&pid("cna.acme"), Operation::SubmitCve { record: record(1, "cna.acme") }).unwrap();
    let endorsed = net.endorse(tx).unwrap();
    assert_eq!(endorsed.endorsements.len(), 1);
    assert_eq!(endorsed.endorsements[0].peer_id, pid("peer0.cna.org1"));
}

#[test]
fn endorse_refuses_revoked_and_malformed() {
    let mut net = network_with_cna(NetworkConfig::default());
    let mut bad = record(1, "cna.acme");
    bad.description.clear();
    let refusal = net.submit(&pid("cna.acme"), Operation::SubmitCve { record: bad }).unwrap_err();
    assert!(matches!(refusal, SubmitError::Refused(ref r) if r.code == "SchemaViolation"), "{refusal}");

    net.submit(&pid("gov.board1"), Operation::RevokeCna { cna_id: pid("cna.acme") }).unwrap();
    net.advance_tick().unwrap();
    let refusal = net.submit(&pid("cna.acme"), Operation::SubmitCve { record: record(2, "cna.acme") }).unwrap_err();
    assert!(matches!(refusal, SubmitError::Refused(ref r) if r.code == "UnauthorizedCaller"), "{refusal}");
    assert_eq!(net.pending_len(), 0);
}

#[test]
fn unknown_identity_is_refused() {
    let mut net = Network::new(NetworkConfig::default()).unwrap();
    let err = net.submit(&pid("cna.ghost"), Operation::CheckEmbargoReleases {}).unwrap_err();
    assert!(matches!(err, SubmitError::Refused(ref r) if r.code == "UnknownIdentity"));
}

#[test]
fn batching_250_into_three_blocks() {
    let mut net = network_with_cna(NetworkConfig::default());
    let before = net.chain().height();
    for seq in 1..=250 {
        net.submit(&pid("cna.acme"), Operation::SubmitCve { record: record(seq, "cna.acme") }).unwrap();
    }
    net.order_and_commit().unwrap();
    let sizes: Vec<usize> = net.chain().blocks()[before as usize + 1..].iter().map(|b| b.txs.len()).collect();
    assert_eq!(sizes, vec![100, 100, 50]);
    assert_eq!(net.state().cve_registry.len(), 250);
    let hashes: BTreeSet<String> = net.peers().iter().map(Peer::state_hash).collect();
    assert_eq!(hashes.len(), 1);
}

#[test]
fn fifo_with_txid_tiebreak() {
    let mut net = network_with_cna(NetworkConfig::default());
    let acme = pid("cna.acme");
    let txs: Vec<Transaction> = (1..=4)
        .map(|seq| net.propose(&acme, Operation::SubmitCve { record: record(seq, "cna.acme") }).unwrap())
        .collect();
    // two arrival slots, two transactions each
    for (i, tx) in txs.iter().enumerate() {
        net.submit_with_arrival(tx.clone(), 10 - (i as u64 / 2)).unwrap();
    }
    let block = net.order_and_commit().unwrap().remove(0);
    let order: Vec<&str> = block.txs.iter().map(|t| t.tx_id.as_str()).collect();
    let mut late = vec![txs[0].tx_id.as_str(), txs[1].tx_id.as_str()];
    let mut early = vec![txs[2].tx_id.as_str(), txs[3].tx_id.as_str()];
    early.sort();
    late.sort();
    assert_eq!(order, [early, late].concat());
}

#[test]
fn revocation_earlier_in_run_fails_submit_at_commit() {
    let mut net = network_with_cna(NetworkConfig::default());
    // Both endorsed against the same committed state; the revocation is
    // ordered first, so the submission fails when re-executed at commit.
    net.submit(&pid("gov.board1"), Operation::RevokeCna { cna_id: pid("cna.acme") }).unwrap();
    let tx_id = net.submit(&pid("cna.acme"), Operation::SubmitCve { record: record(1, "cna.acme") }).unwrap();
    let blocks = net.order_and_commit().unwrap();
    assert_eq!(blocks.len(), 1);
    assert!(blocks[0].txs.iter().any(|t| t.tx_id == tx_id));
    let outcome = net.peers()[0].replica().outcomes.iter().find(|o| o.tx_id == tx_id).unwrap();
    assert_eq!(outcome.error.as_deref(), Some("UnauthorizedCaller"));
    assert!(net.state().cve_registry.is_empty());
}

#[test]
fn endorsement_soundness_under_majority() {
    let mut config = NetworkConfig::default();
    config.policy = EndorsementPolicy::MajorityOf { orgs: config.orgs.iter().cloned().collect() };
    let mut net = network_with_cna(config);
    let tx = net.propose(&pid("cna.acme"), Operation::SubmitCve { record: record(1, "cna.acme") }).unwrap();
    let endorsed = net.endorse(tx).unwrap();
    assert_eq!(endorsed.endorsements.len(), 2);

    let mut short = endorsed.clone();
    short.endorsements.truncate(1);
    let err = net.chain().next_block(vec![short], net.now()).unwrap_err();
    assert!(matches!(err, LedgerError::PolicyUnsatisfied { .. }));

    let mut duplicated = endorsed;
    duplicated.endorsements[1] = duplicated.endorsements[0].clone();
    assert!(net.chain().next_block(vec![duplicated], net.now()).is_err());
}

#[test]
fn revoked_cna_can_be_onboarded_again() {
    let script = vec![
        ScenarioAction { at_tick: 0, step: Step::Onboard(MemberArgs { cna: pid("cna.acme"), caller: None }) },
        ScenarioAction { at_tick: 1, step: Step::Revoke(MemberArgs { cna: pid("cna.acme"), caller: None }) },
        ScenarioAction { at_tick: 2, step: Step::Onboard(MemberArgs { cna: pid("cna.acme"), caller: None }) },
        ScenarioAction { at_tick: 3, step: Step::Submit(submit_args("cna.acme", "after re-onboarding", None)) },
    ];
    let trace = run_scenario(NetworkConfig::default(), &script).unwrap();
    for outcome in &trace.actions {
        assert_eq!(outcome.status, OutcomeStatus::Committed, "{outcome:?}");
    }
}

#[test]
fn embargoed_submission_is_released_by_tick() {
    let config = NetworkConfig::default();
    let t0 = config.genesis_time;
    let script = vec![
        ScenarioAction { at_tick: 0, step: Step::Onboard(MemberArgs { cna: pid("cna.acme"), caller: None }) },
        ScenarioAction { at_tick: 1, step: Step::Submit(submit_args("cna.acme", "remote code execution", Some(t0 + 5))) },
        ScenarioAction { at_tick: 2, step: Step::Query(QueryFilter::default()) },
        ScenarioAction { at_tick: 5, step: Step::Tick(TickArgs::default()) },
        ScenarioAction { at_tick: 6, step: Step::Query(QueryFilter::default()) },
    ];
    let trace = run_scenario(config, &script).unwrap();
    let draft = &trace.actions[2].result.as_ref().unwrap()[0];
    assert_eq!(draft["status"], "DRAFT");
    assert!(draft.get("description").is_none());
    assert!(draft["contentCommitment"].is_string());
    assert!(!serde_json::to_string(&trace.actions[2]).unwrap().contains("remote code execution"));

    assert_eq!(trace.actions[3].status, OutcomeStatus::Committed);
    let published = &trace.actions[4].result.as_ref().unwrap()[0];
    assert_eq!(published["status"], "PUBLISHED");
    assert_eq!(published["description"], "remote code execution");
    assert!(trace.events.iter().any(|e| e.kind == EventKind::EmbargoReleased));
}

#[test]
fn empty_script_is_genesis_only() {
    let trace = run_scenario(NetworkConfig::default(), &[]).unwrap();
    assert_eq!(trace.blocks.len(), 1);
    assert_eq!(trace.blocks[0].height, 0);
    assert_eq!(trace.blocks[0].state_hashes.len(), 3);
    assert!(trace.replicas_agree());
    assert!(trace.actions.is_empty() && trace.events.is_empty());
    assert_eq!(trace.stats.committed_per_sim_second, None);
}

#[test]
fn traces_are_deterministic() {
    let config = NetworkConfig::default();
    let script = mixed_workload(150, 7, &config);
    let a = canonical::to_string(&run_scenario(config.clone(), &script).unwrap());
    let b = canonical::to_string(&run_scenario(config, &script).unwrap());
    assert_eq!(a, b);
}

#[test]
fn mixed_workload_replicates() {
    let config = NetworkConfig::default();
    let script = mixed_workload(300, 11, &config);
    let trace = run_scenario(config, &script).unwrap();
    assert!(trace.replicas_agree());
    assert!(trace.blocks.iter().all(|b| b.state_hashes.len() == 3));
    assert!(trace.stats.txs_committed >= 300, "{:?}", trace.stats);
    // the generator's model keeps nearly every action valid
    assert!(trace.stats.txs_refused * 20 <= trace.stats.txs_submitted, "{:?}", trace.stats);
    assert!(trace.stats.latency_max_ticks <= 2);
    for op in ["submit", "status", "reject", "dispute", "merge", "split", "partialdup", "onboard", "tick"] {
        assert!(
            trace.actions.iter().any(|a| a.action == op && a.status == OutcomeStatus::Committed),
            "no committed {op}"
        );
    }
}

#[test]
fn scenario_json_shape() {
    let text = r#"[{"atTick":0,"action":"onboard","args":{"cna":"cna.acme"}},
                   {"atTick":2,"action":"tick","args":{}},
                   {"atTick":3,"action":"query","args":{"status":"PUBLISHED"}}]"#;
    let script: Vec<ScenarioAction> = serde_json::from_str(text).unwrap();
    assert_eq!(script.len(), 3);
    assert!(matches!(script[1].step, Step::Tick(_)));
    let back: Vec<ScenarioAction> = serde_json::from_str(&serde_json::to_string(&script).unwrap()).unwrap();
    assert_eq!(back, script);
    assert!(serde_json::from_str::<Vec<ScenarioAction>>(r#"[{"atTick":0,"action":"explode","args":{}}]"#).is_err());
}

#[test]
fn audit_of_simulated_chain() {
    let config = NetworkConfig::default();
    let script = mixed_workload(120, 3, &config);
    let mut net = Network::new(config).unwrap();
    run_scenario_on(&mut net, &script).unwrap();
    let anchors = TrustAnchors::ca(net.ca().public_key());
    assert!(verify_chain(net.chain().blocks(), &anchors).valid);
    // stripping an endorsement is caught at that height
    let mut blocks = net.chain().blocks().to_vec();
    let h = blocks.iter().position(|b| !b.txs.is_empty()).unwrap();
    blocks[h].txs[0].endorsements.clear();
    let report = verify_chain(&blocks, &anchors);
    assert_eq!(report.first_bad_height, Some(h as u64));
    assert_eq!(report.reason, Some(AuditReason::EndorsementInsufficient));
}

#[test]
fn nearest_rank_percentile() {
    assert_eq!(percentile(&[], 95), 0);
    assert_eq!(percentile(&[5], 50), 5);
    let v: Vec<u64> = (1..=20).collect();
    assert_eq!(percentile(&v, 50), 10);
    assert_eq!(percentile(&v, 95), 19);
    assert_eq!(percentile(&v, 100), 20);
}
