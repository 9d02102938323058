// SPDX-License-Identifier: Apache-2.0

use cvechain_cli::bench::bench;

#[test]
fn zero_transactions() {
    let report = bench(0, 3).unwrap();
    assert_eq!((report.tps, report.committed, report.blocks), (0.0, 0, 0));
    assert_eq!(report.p95_latency_ms, 0.0);
}

#[test]
fn commits_everything_it_submits() {
    let report = bench(250, 2).unwrap();
    assert_eq!((report.committed, report.failed), (250, 0));
    // 100 per block
    assert_eq!(report.blocks, 3);
    assert!(report.replicas_agree);
    assert!(report.tps > 0.0);
    assert!(report.p50_latency_ms <= report.p95_latency_ms && report.p95_latency_ms <= report.max_latency_ms);
}

#[test]
fn content_is_deterministic() {
    let a = bench(120, 3).unwrap();
    let b = bench(120, 3).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
    assert_ne!(a.state_hash, bench(121, 3).unwrap().state_hash);
}
