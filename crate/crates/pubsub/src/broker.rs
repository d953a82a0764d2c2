use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};
use edgefaas_overlay::{LinkEmulator, Site};
use parking_lot::Mutex;

use crate::error::{Error, Result};

/// Publisher id and its sequence number.
pub type MessageId = (u32, u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub subject: String,
    pub payload: Vec<u8>,
    pub publisher: u32,
    pub publisher_seq: u64,
}

impl Message {
    pub fn new(subject: impl Into<String>, payload: impl Into<Vec<u8>>, publisher: u32, publisher_seq: u64) -> Self {
        Self { subject: subject.into(), payload: payload.into(), publisher, publisher_seq }
    }

    pub fn id(&self) -> MessageId {
        (self.publisher, self.publisher_seq)
    }
}

#[derive(Debug, Clone)]
pub struct Delivery {
    pub message: Arc<Message>,
    /// When the subscriber has the message in hand.
    pub at_ms: f64,
    pub replica: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSpec {
    pub node: String,
    pub site: Site,
    pub compute_factor: f64,
}

impl ReplicaSpec {
    pub fn new(node: impl Into<String>, site: Site, compute_factor: f64) -> Self {
        Self { node: node.into(), site, compute_factor }
    }
}

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    /// Work to accept and log one message.
    pub ingest_work: f64,
    /// Work to hand one message to one local subscriber.
    pub deliver_work: f64,
    pub retries: u32,
    pub retry_timeout_ms: f64,
    /// When set, every payload must have exactly this size.
    pub payload_size: Option<usize>,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self { ingest_work: 0.05, deliver_work: 0.01, retries: 3, retry_timeout_ms: 200.0, payload_size: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishReceipt {
    pub sent_ms: f64,
    /// Logged at the origin replica.
    pub committed_ms: f64,
    /// Every reachable peer has acknowledged to the origin.
    pub replicated_ms: f64,
    /// The acknowledgement is back at the publisher.
    pub acked_ms: f64,
}

pub struct Subscription {
    id: usize,
    replica: usize,
    rx: Receiver<Delivery>,
}

impl Subscription {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn replica(&self) -> usize {
        self.replica
    }

    pub fn try_recv(&self) -> Option<Delivery> {
        self.rx.try_recv().ok()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Delivery> {
        self.rx.recv_timeout(timeout).ok()
    }

    pub fn drain(&self) -> Vec<Delivery> {
        self.rx.try_iter().collect()
    }
}

struct Replica {
    spec: ReplicaSpec,
    log: Vec<Arc<Message>>,
    ids: HashSet<MessageId>,
    flagged: HashSet<MessageId>,
    subs: BTreeMap<String, Vec<usize>>,
    busy_until: f64,
    up: bool,
}

struct Sub {
    replica: usize,
    subject: String,
    tx: Sender<Delivery>,
    link: LinkEmulator,
    last_at: f64,
    active: bool,
}

struct Inner {
    replicas: Vec<Replica>,
    subs: Vec<Sub>,
    links: Vec<Vec<LinkEmulator>>,
    /// Last arrival per directed link, so that links stay FIFO.
    link_last: Vec<Vec<f64>>,
    last_seq: HashMap<u32, u64>,
}

impl Inner {
    /// Logs `msg` at replica `r` once it arrives at `arrival`, then hands it
    /// to the replica's subscribers. Returns when the replica is done.
    fn ingest(&mut self, cfg: &BrokerConfig, r: usize, msg: &Arc<Message>, arrival: f64) -> f64 {
        let Inner { replicas, subs, .. } = self;
        let rep = &mut replicas[r];
        let cf = rep.spec.compute_factor;
        let mut t = arrival.max(rep.busy_until) + cfg.ingest_work / cf;
        rep.log.push(Arc::clone(msg));
        rep.ids.insert(msg.id());
        let committed = t;
        if let Some(list) = rep.subs.get(&msg.subject) {
            for &sid in list {
                let sub = &mut subs[sid];
                t += cfg.deliver_work / cf;
                let at = (t + sub.link.sample_one_way()).max(sub.last_at);
                sub.last_at = at;
                // A dropped handle just stops receiving.
                let _ = sub.tx.send(Delivery { message: Arc::clone(msg), at_ms: at, replica: r });
            }
        }
        rep.busy_until = t;
        committed
    }

    fn traverse(&mut self, from: usize, to: usize, depart: f64) -> f64 {
        let at = (depart + self.links[from][to].sample_one_way()).max(self.link_last[from][to]);
        self.link_last[from][to] = at;
        at
    }
}

/// One broker replica per worker, fully meshed.
pub struct BrokerCluster {
    inner: Mutex<Inner>,
    config: BrokerConfig,
}

impl BrokerCluster {
    /// `peer_link(a, b)` supplies the emulated link used from replica `a` to `b`.
    pub fn new(
        replicas: Vec<ReplicaSpec>,
        mut peer_link: impl FnMut(usize, usize) -> LinkEmulator,
        config: BrokerConfig,
    ) -> Result<Self> {
        if replicas.is_empty() {
            return Err(Error::NoReplicas);
        }
        let n = replicas.len();
        let links = (0..n).map(|a| (0..n).map(|b| peer_link(a, b)).collect()).collect();
        let replicas = replicas
            .into_iter()
            .map(|spec| Replica {
                spec,
                log: Vec::new(),
                ids: HashSet::new(),
                flagged: HashSet::new(),
                subs: BTreeMap::new(),
                busy_until: 0.0,
                up: true,
            })
            .collect();
        Ok(Self {
            inner: Mutex::new(Inner {
                replicas,
                subs: Vec::new(),
                links,
                link_last: vec![vec![f64::NEG_INFINITY; n]; n],
                last_seq: HashMap::new(),
            }),
            config,
        })
    }

    /// `n` replicas on one site with no link delay.
    pub fn local(n: usize) -> Result<Self> {
        let specs = (0..n).map(|i| ReplicaSpec::new(format!("broker-{i}"), Site::Op, 1.0)).collect();
        Self::new(specs, |_, _| LinkEmulator::disabled(), BrokerConfig::default())
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.config
    }

    pub fn replica_count(&self) -> usize {
        self.inner.lock().replicas.len()
    }

    pub fn replica_spec(&self, r: usize) -> Option<ReplicaSpec> {
        self.inner.lock().replicas.get(r).map(|x| x.spec.clone())
    }

    /// Live subscription: only messages published after this call are seen.
    pub fn subscribe(&self, replica: usize, subject: &str, client_link: LinkEmulator) -> Result<Subscription> {
        let mut inner = self.inner.lock();
        if replica >= inner.replicas.len() {
            return Err(Error::UnknownReplica(replica));
        }
        let (tx, rx) = crossbeam_channel::unbounded();
        let id = inner.subs.len();
        inner.subs.push(Sub {
            replica,
            subject: subject.to_owned(),
            tx,
            link: client_link,
            last_at: f64::NEG_INFINITY,
            active: true,
        });
        inner.replicas[replica].subs.entry(subject.to_owned()).or_default().push(id);
        Ok(Subscription { id, replica, rx })
    }

    pub fn unsubscribe(&self, sub: &Subscription) {
        let mut inner = self.inner.lock();
        let s = &mut inner.subs[sub.id];
        if !s.active {
            return;
        }
        s.active = false;
        let (replica, subject) = (s.replica, s.subject.clone());
        if let Some(list) = inner.replicas[replica].subs.get_mut(&subject) {
            list.retain(|&x| x != sub.id);
        }
    }

    /// Publishes `msg` at replica `origin` on behalf of a client that sends
    /// at `now` over `client_link`.
    pub fn publish_at(
        &self,
        origin: usize,
        msg: Message,
        client_link: &LinkEmulator,
        now: f64,
    ) -> Result<PublishReceipt> {
        if let Some(want) = self.config.payload_size {
            if msg.payload.len() != want {
                return Err(Error::PayloadSize { got: msg.payload.len(), want });
            }
        }
        let cfg = &self.config;
        let mut inner = self.inner.lock();
        let n = inner.replicas.len();
        if origin >= n {
            return Err(Error::UnknownReplica(origin));
        }
        if let Some(&last) = inner.last_seq.get(&msg.publisher) {
            if msg.publisher_seq <= last {
                return Err(Error::OutOfOrder { publisher: msg.publisher, seq: msg.publisher_seq, last });
            }
        }
        inner.last_seq.insert(msg.publisher, msg.publisher_seq);
        let msg = Arc::new(msg);

        let arrival = now + client_link.sample_one_way();
        let committed = inner.ingest(cfg, origin, &msg, arrival);
        let mut replicated = committed;
        let mut unreachable = Vec::new();
        for peer in (0..n).filter(|&p| p != origin) {
            if !inner.replicas[peer].up {
                replicated = replicated.max(committed + f64::from(cfg.retries) * cfg.retry_timeout_ms);
                unreachable.push(inner.replicas[peer].spec.node.clone());
                continue;
            }
            let there = inner.traverse(origin, peer, committed);
            let done = inner.ingest(cfg, peer, &msg, there);
            let back = inner.traverse(peer, origin, done);
            replicated = replicated.max(back);
        }
        let receipt = PublishReceipt {
            sent_ms: now,
            committed_ms: committed,
            replicated_ms: replicated,
            acked_ms: replicated + client_link.sample_one_way(),
        };
        if unreachable.is_empty() {
            Ok(receipt)
        } else {
            inner.replicas[origin].flagged.insert(msg.id());
            Err(Error::ReplicaUnreachable { peers: unreachable, receipt })
        }
    }

    /// Takes a replica down or brings it back. A returning replica first
    /// catches up on every message it missed, in the order its peers hold them.
    pub fn set_replica_up(&self, r: usize, up: bool, now: f64) -> Result<()> {
        let cfg = &self.config;
        let mut inner = self.inner.lock();
        if r >= inner.replicas.len() {
            return Err(Error::UnknownReplica(r));
        }
        let was_up = inner.replicas[r].up;
        inner.replicas[r].up = up;
        if !up || was_up {
            return Ok(());
        }
        let mut missing = Vec::new();
        let mut seen = HashSet::new();
        for (i, rep) in inner.replicas.iter().enumerate() {
            if i == r || !rep.up {
                continue;
            }
            for m in &rep.log {
                if !inner.replicas[r].ids.contains(&m.id()) && seen.insert(m.id()) {
                    missing.push(Arc::clone(m));
                }
            }
        }
        for m in &missing {
            inner.ingest(cfg, r, m, now);
        }
        for rep in &mut inner.replicas {
            rep.flagged.retain(|id| !missing.iter().any(|m| m.id() == *id));
        }
        Ok(())
    }

    pub fn log_ids(&self, r: usize) -> Vec<MessageId> {
        self.inner.lock().replicas[r].log.iter().map(|m| m.id()).collect()
    }

    pub fn flagged(&self, r: usize) -> Vec<MessageId> {
        let mut v: Vec<_> = self.inner.lock().replicas[r].flagged.iter().copied().collect();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use edgefaas_overlay::{DelayMode, LatencyProfile};

    use super::*;

    fn none() -> LinkEmulator {
        LinkEmulator::disabled()
    }

    #[test]
    fn single_replica_delivers_once() {
        let c = BrokerCluster::local(1).unwrap();
        let sub = c.subscribe(0, "greet", none()).unwrap();
        c.publish_at(0, Message::new("greet", "a", 1, 1), &none(), 0.0).unwrap();
        let got = sub.drain();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].message.payload, b"a");
    }

    #[test]
    fn subscribe_then_three_in_order() {
        let c = BrokerCluster::local(2).unwrap();
        let sub = c.subscribe(1, "s", none()).unwrap();
        for seq in 1..=3 {
            c.publish_at(0, Message::new("s", vec![seq as u8], 7, seq), &none(), seq as f64).unwrap();
        }
        let seqs: Vec<u64> = sub.drain().iter().map(|d| d.message.publisher_seq).collect();
        assert_eq!(seqs, [1, 2, 3]);
    }

    #[test]
    fn no_replay_of_earlier_messages() {
        let c = BrokerCluster::local(1).unwrap();
        c.publish_at(0, Message::new("s", "early", 1, 1), &none(), 0.0).unwrap();
        let sub = c.subscribe(0, "s", none()).unwrap();
        assert!(sub.drain().is_empty());
    }

    #[test]
    fn other_subjects_are_not_delivered() {
        let c = BrokerCluster::local(1).unwrap();
        let sub = c.subscribe(0, "a", none()).unwrap();
        c.publish_at(0, Message::new("b", "x", 1, 1), &none(), 0.0).unwrap();
        assert!(sub.drain().is_empty());
    }

    #[test]
    fn remote_delivery_waits_for_the_link() {
        let delay = LatencyProfile::fixed(40.0);
        let specs = vec![ReplicaSpec::new("a", Site::Rs, 1.0), ReplicaSpec::new("b", Site::Cd, 1.0)];
        let c = BrokerCluster::new(
            specs,
            |a, b| if a == b { none() } else { LinkEmulator::new(delay, 3, DelayMode::Virtual) },
            BrokerConfig::default(),
        )
        .unwrap();
        let sub = c.subscribe(1, "s", none()).unwrap();
        let r = c.publish_at(0, Message::new("s", "x", 1, 1), &none(), 100.0).unwrap();
        let d = sub.drain().pop().unwrap();
        assert!(d.at_ms >= 100.0 + 20.0);
        assert!(r.acked_ms >= 100.0 + 40.0);
        assert!(r.committed_ms < d.at_ms);
    }

    #[test]
    fn peer_down_flags_and_heals() {
        let c = BrokerCluster::local(3).unwrap();
        let local = c.subscribe(0, "s", none()).unwrap();
        let remote = c.subscribe(2, "s", none()).unwrap();
        c.set_replica_up(2, false, 0.0).unwrap();
        let err = c.publish_at(0, Message::new("s", "x", 1, 1), &none(), 0.0).unwrap_err();
        let Error::ReplicaUnreachable { peers, receipt } = err else { panic!("{err:?}") };
        assert_eq!(peers, ["broker-2"]);
        assert!(receipt.acked_ms >= 600.0);
        assert_eq!(local.drain().len(), 1);
        assert!(remote.drain().is_empty());
        assert_eq!(c.flagged(0), [(1, 1)]);

        c.set_replica_up(2, true, 10.0).unwrap();
        assert_eq!(remote.drain().len(), 1);
        assert!(c.flagged(0).is_empty());
        assert_eq!(c.log_ids(2), [(1, 1)]);
    }

    #[test]
    fn sequence_and_size_checks() {
        let c = BrokerCluster::new(
            vec![ReplicaSpec::new("a", Site::Op, 1.0)],
            |_, _| none(),
            BrokerConfig { payload_size: Some(4), ..BrokerConfig::default() },
        )
        .unwrap();
        assert!(matches!(
            c.publish_at(0, Message::new("s", "abc", 1, 1), &none(), 0.0),
            Err(Error::PayloadSize { got: 3, want: 4 })
        ));
        c.publish_at(0, Message::new("s", "abcd", 1, 5), &none(), 0.0).unwrap();
        assert!(matches!(
            c.publish_at(0, Message::new("s", "abcd", 1, 5), &none(), 0.0),
            Err(Error::OutOfOrder { .. })
        ));
        assert!(matches!(
            c.publish_at(3, Message::new("s", "abcd", 2, 1), &none(), 0.0),
            Err(Error::UnknownReplica(3))
        ));
    }

    #[test]
    fn unsubscribe_stops_delivery() {
        let c = BrokerCluster::local(1).unwrap();
        let sub = c.subscribe(0, "s", none()).unwrap();
        c.unsubscribe(&sub);
        c.publish_at(0, Message::new("s", "x", 1, 1), &none(), 0.0).unwrap();
        assert!(sub.drain().is_empty());
    }
}
