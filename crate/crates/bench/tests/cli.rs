use std::process::Command;

fn edgefaas(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_edgefaas")).args(args).output().expect("binary runs")
}

#[test]
fn report_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = edgefaas(&[
            "--scenario",
            "OP",
            "--seed",
            seed,
            "report",
            "--format",
            "csv",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "7");
    assert_eq!(a, run("b.csv", "7"));
    assert_ne!(a, run("c.csv", "8"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("test,scenario,param,n,mean,min,max,std,p25,p50,p75\n"));
    assert_eq!(text.lines().count(), 19);
}

#[test]
fn status_and_deploy() {
    let o = edgefaas(&["cluster", "status"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("9 nodes, 8 schedulable, 24 free slots"));

    let o = edgefaas(&["deploy", "img-classifier-hub", "--policy", "network-aware", "--replicas", "4"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("order: worker-1 worker-1 worker-2 worker-2"), "{text}");
}

#[test]
fn bench_latency_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.json");
    let o = edgefaas(&[
        "bench",
        "latency",
        "--from",
        "RS",
        "--to",
        "test",
        "--reps",
        "100",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let reports = edgefaas_bench::read_report(edgefaas_bench::ReportFormat::Json, &out).unwrap();
    assert_eq!((reports[0].param.as_str(), reports[0].stats.n), ("RS-test", 100));
}

#[test]
fn bad_input_fails_cleanly() {
    let o = edgefaas(&["--scenario", "nowhere", "cluster", "status"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scenario"));
    let o = edgefaas(&["bench", "latency", "--from", "mars"]);
    assert!(!o.status.success());
}

#[test]
fn certificates_for_the_lighthouse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(edgefaas(&["cert", "ca", "--out", d]).status.success());
    let o = edgefaas(&["cert", "issue", "--name", "rpi-1", "--ip", "10.42.0.4", "--ca-dir", d, "--out", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ca = edgefaas_overlay::Certificate::read_from(dir.path().join("ca.crt")).unwrap();
    let node =
        edgefaas_overlay::NodeIdentity::load(dir.path().join("rpi-1.crt"), dir.path().join("rpi-1.key")).unwrap();
    assert_eq!(node.overlay_ip(), std::net::Ipv4Addr::new(10, 42, 0, 4));
    assert!(node.certificate.verify(&ca.public_key, edgefaas_overlay::cert::unix_seconds()));
}
