use std::io::Write;

use edgefaas_bench::faas::{default_body, run_faas_bench, run_ramp, FaasBenchConfig, FaasHarness};
use edgefaas_bench::report::{parse_csv, parse_json, render_csv, render_json};
use edgefaas_bench::stats::summarize;
use edgefaas_bench::{emit_report, load_scenario, read_report, BenchReport, Error, ReportFormat, Scenario};
use edgefaas_gateway::WorkloadKind;
use edgefaas_orchestrator::SchedulerPolicy;
use proptest::prelude::*;

proptest! {
    #[test]
    fn summary_is_ordered_and_recomputable(samples in prop::collection::vec(0.0f64..1e6, 1..200)) {
        let s = summarize(&samples).unwrap();
        prop_assert!(s.min <= s.p25 && s.p25 <= s.p50 && s.p50 <= s.p75 && s.p75 <= s.max);
        prop_assert!(s.std >= 0.0);
        prop_assert!(s.min <= s.mean + 1e-9 && s.mean <= s.max + 1e-9);
        let mut shuffled = samples.clone();
        shuffled.reverse();
        let t = summarize(&shuffled).unwrap();
        prop_assert_eq!((s.min, s.max, s.p25, s.p50, s.p75), (t.min, t.max, t.p25, t.p50, t.p75));
        prop_assert!((s.mean - t.mean).abs() <= 1e-9 * s.mean.abs().max(1.0));
    }

    #[test]
    fn reports_round_trip(
        samples in prop::collection::vec(-1e9f64..1e9, 1..50),
        test in "[a-z-]{1,12}",
        param in "[a-z=0-9:, \"]{0,12}",
    ) {
        let r = BenchReport::new(test, "AS", param, samples).unwrap();
        let want = vec![r.without_samples()];
        prop_assert_eq!(parse_csv(&render_csv(std::slice::from_ref(&r)).unwrap()).unwrap(), want.clone());
        prop_assert_eq!(parse_json(&render_json(&[r]).unwrap()).unwrap(), want);
    }
}

#[test]
fn every_request_is_accounted_for() {
    for name in ["OP", "RS", "CD", "AS"] {
        let s = Scenario::builtin(name, 2).unwrap();
        let cfg = FaasBenchConfig::desk(WorkloadKind::HeavyClassify).threads(vec![1, 8]).requests(60);
        for p in run_faas_bench(&s, &cfg).unwrap() {
            assert_eq!(p.issued, 60);
            assert_eq!(p.issued, p.ok + p.timeouts + p.errors);
            assert_eq!(p.records.len(), p.ok + p.timeouts);
            assert_eq!(p.response_times().len(), p.ok);
        }
    }
}

#[test]
fn timeouts_are_counted_not_sampled() {
    let s = Scenario::builtin("RS", 1).unwrap();
    let mut cfg = FaasBenchConfig::desk(WorkloadKind::HeavyClassify).threads(vec![8]).requests(40);
    cfg.timeout_ms = 9_000.0;
    let p = &run_faas_bench(&s, &cfg).unwrap()[0];
    assert!(p.timeouts > 0);
    assert_eq!(p.issued, p.ok + p.timeouts + p.errors);
    assert!(p.response_times().iter().all(|&t| t <= 9_000.0));
}

#[test]
fn ramp_never_loses_replicas() {
    let s = Scenario::builtin("OP", 1).unwrap();
    let cfg = FaasBenchConfig::desk(WorkloadKind::Sentiment);
    let mut h = FaasHarness::deploy(&s, cfg.spec.clone(), cfg.policy, cfg.gateway.clone()).unwrap();
    let steps = [1, 2, 4, 8, 16, 32, 64];
    let points = run_ramp(&mut h, &steps, 1500, default_body(WorkloadKind::Sentiment)).unwrap();
    let trace: Vec<usize> = points.iter().flat_map(|p| p.replica_trace.iter().map(|(_, n)| *n)).collect();
    assert!(trace.windows(2).all(|w| w[0] <= w[1]), "{trace:?}");
    assert!(trace.last().copied().unwrap() > 1);
}

#[test]
fn sweeps_repeat_exactly() {
    let s = Scenario::builtin("AS", 9).unwrap();
    let cfg = FaasBenchConfig::desk(WorkloadKind::Sentiment).threads(vec![4, 16]).requests(300);
    let a = run_faas_bench(&s, &cfg).unwrap();
    let b = run_faas_bench(&s, &cfg).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.records, y.records);
        assert_eq!(x.replica_trace, y.replica_trace);
    }
}

#[test]
fn network_aware_keeps_heavy_work_off_the_pis() {
    let s = Scenario::builtin("AS", 1).unwrap();
    let cfg = FaasBenchConfig::desk(WorkloadKind::HeavyClassify)
        .threads(vec![16])
        .requests(120)
        .policy(SchedulerPolicy::NetworkAware);
    let p = &run_faas_bench(&s, &cfg).unwrap()[0];
    assert!(p.records.iter().all(|r| !r.node.starts_with("rpi-")));
}

#[test]
fn scenario_file_and_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lab.toml");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "name = \"lab\"\nbase = \"CD\"\nseed = 4\npreset = \"baremetal\"").unwrap();
    drop(f);
    let s = load_scenario(&path).unwrap();
    assert_eq!((s.name.as_str(), s.seed, s.workers().count()), ("lab", 4, 2));
    assert!(matches!(load_scenario(dir.path().join("nope.toml")), Err(Error::IoError { .. })));

    let r = edgefaas_bench::latency::run_latency_bench(
        &s,
        edgefaas_orchestrator::Site::Cd,
        edgefaas_orchestrator::Site::Tester,
        100,
    )
    .unwrap();
    assert_eq!(r.scenario, "lab");
    for format in [ReportFormat::Csv, ReportFormat::Json] {
        let out = dir.path().join(format!("r.{format}"));
        emit_report(std::slice::from_ref(&r), format, &out).unwrap();
        assert_eq!(read_report(format, &out).unwrap(), vec![r.without_samples()]);
    }
}
