use std::collections::{BTreeSet, HashMap};

use edgefaas_overlay::latency::{derive_seed, nebula_profile};
use edgefaas_overlay::{DelayMode, LatencyProfile, LinkEmulator, Site};
use edgefaas_pubsub::{run_pubsub_bench, BenchConfig, BrokerCluster, BrokerConfig, Error, Message, ReplicaSpec};
use proptest::prelude::*;

fn site_replicas(site: Site, n: usize, cf: f64) -> Vec<ReplicaSpec> {
    (0..n).map(|i| ReplicaSpec::new(format!("{site}-{i}"), site, cf)).collect()
}

fn nebula(a: Site, b: Site) -> Option<LatencyProfile> {
    nebula_profile(a, b)
}

fn zero(_: Site, _: Site) -> Option<LatencyProfile> {
    Some(LatencyProfile::zero())
}

fn small(n_pubs: usize, m_subs: usize, total: u64) -> BenchConfig {
    BenchConfig { total_msgs: total, reps: 1, ..BenchConfig::matrix(n_pubs, m_subs) }
}

#[test]
fn one_to_one_on_a_single_replica() {
    let out =
        run_pubsub_bench(&site_replicas(Site::Op, 1, 1.0), &zero, &BenchConfig { reps: 1, ..BenchConfig::default() })
            .unwrap();
    let r = &out.runs[0];
    assert_eq!(r.delivered, 10_000);
    assert!(r.pub_throughput.is_finite() && r.pub_throughput > 0.0);
    assert!(r.sub_throughput.is_finite() && r.sub_throughput > 0.0);
}

#[test]
fn five_to_five_fans_out_to_everyone() {
    let out = run_pubsub_bench(
        &site_replicas(Site::Op, 2, 1.0),
        &nebula,
        &BenchConfig { reps: 1, ..BenchConfig::matrix(5, 5) },
    )
    .unwrap();
    assert_eq!(out.runs[0].delivered, 50_000);
}

#[test]
fn op_beats_cd() {
    let cfg = small(1, 1, 2000);
    let op = run_pubsub_bench(&site_replicas(Site::Op, 2, 1.0), &nebula, &cfg).unwrap();
    let cd = run_pubsub_bench(&site_replicas(Site::Cd, 2, 1.0), &nebula, &cfg).unwrap();
    assert!(op.pub_mean() > cd.pub_mean());
    assert!(op.sub_mean() > cd.sub_mean());
}

#[test]
fn missing_links_are_reported() {
    let only_op = |a: Site, b: Site| (a == Site::Op && b == Site::Op).then(LatencyProfile::zero);
    let err = run_pubsub_bench(&site_replicas(Site::Op, 1, 1.0), &only_op, &small(1, 1, 10)).unwrap_err();
    assert_eq!(err, Error::MissingLink(Site::Op, Site::Tester));
}

#[test]
fn reruns_are_identical() {
    let cfg = small(5, 5, 500);
    let a = run_pubsub_bench(&site_replicas(Site::Rs, 4, 0.25), &nebula, &cfg).unwrap();
    let b = run_pubsub_bench(&site_replicas(Site::Rs, 4, 0.25), &nebula, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn throughput_falls_as_links_slow_down() {
    let cfg = small(2, 2, 400);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for k in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let scaled = move |a: Site, b: Site| nebula_profile(a, b).map(|p| p.scaled(k));
        let out = run_pubsub_bench(&site_replicas(Site::Rs, 4, 0.25), &scaled, &cfg).unwrap();
        assert!(out.pub_mean() <= last.0 && out.sub_mean() <= last.1, "scale {k}");
        last = (out.pub_mean(), out.sub_mean());
    }
}

#[test]
fn two_subscriptions_each_see_everything() {
    let c = BrokerCluster::local(2).unwrap();
    let s1 = c.subscribe(0, "t", LinkEmulator::disabled()).unwrap();
    let s2 = c.subscribe(0, "t", LinkEmulator::disabled()).unwrap();
    let link = LinkEmulator::disabled();
    for seq in 1..=1000 {
        c.publish_at(1, Message::new("t", "m", 1, seq), &link, seq as f64).unwrap();
    }
    assert_eq!(s1.drain().len(), 1000);
    assert_eq!(s2.drain().len(), 1000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exactly_once_fifo_and_convergence(
        replicas in 1usize..=4,
        pubs in 1usize..=4,
        subs in 1usize..=4,
        per_pub in 1u64..30,
        seed in any::<u64>(),
    ) {
        let specs = site_replicas(Site::Rs, replicas, 0.25);
        let profile = nebula_profile(Site::Rs, Site::Rs).unwrap();
        let cluster = BrokerCluster::new(
            specs,
            |a, b| LinkEmulator::new(profile, derive_seed(seed, &format!("{a}{b}")), DelayMode::Virtual),
            BrokerConfig::default(),
        ).unwrap();
        let client = nebula_profile(Site::Rs, Site::Tester).unwrap();
        let handles: Vec<_> = (0..subs)
            .map(|j| {
                let link = LinkEmulator::new(client, derive_seed(seed, &format!("s{j}")), DelayMode::Virtual);
                cluster.subscribe(j % replicas, "x", link).unwrap()
            })
            .collect();
        let links: Vec<_> = (0..pubs)
            .map(|i| LinkEmulator::new(client, derive_seed(seed, &format!("p{i}")), DelayMode::Virtual))
            .collect();
        // Interleave publishers in rounds, each on its own replica.
        let mut now = vec![0.0; pubs];
        for seq in 1..=per_pub {
            for i in 0..pubs {
                let r = cluster.publish_at(i % replicas, Message::new("x", "p", i as u32, seq), &links[i], now[i]).unwrap();
                now[i] = r.acked_ms;
            }
        }
        let total = pubs as u64 * per_pub;
        for h in &handles {
            let got = h.drain();
            prop_assert_eq!(got.len() as u64, total);
            let mut last: HashMap<u32, u64> = HashMap::new();
            let mut last_at = f64::NEG_INFINITY;
            for d in &got {
                let prev = last.insert(d.message.publisher, d.message.publisher_seq).unwrap_or(0);
                prop_assert!(d.message.publisher_seq > prev);
                prop_assert!(d.at_ms >= last_at);
                last_at = d.at_ms;
            }
        }
        let reference: BTreeSet<_> = cluster.log_ids(0).into_iter().collect();
        prop_assert_eq!(reference.len() as u64, total);
        for r in 1..replicas {
            let ids: BTreeSet<_> = cluster.log_ids(r).into_iter().collect();
            prop_assert_eq!(&ids, &reference);
        }
    }
}
