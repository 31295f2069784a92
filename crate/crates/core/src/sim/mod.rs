//! Seeded discrete-event simulation of a consortium of nodes.
//!
//! Events run in `(time, insertion sequence)` order on one thread, and every
//! random draw comes from seeded ChaCha streams, so a config always yields
//! the same trace bytes.

mod workload;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use workload::{user_role, WorkloadGen};

use crate::codec::to_canonical;
use crate::consensus::{ConsensusError, ConsensusParams};
use crate::content::ContentStore;
use crate::crypto::{Hash, Keypair};
use crate::genesis::GenesisFile;
use crate::node::{NetMessage, Node, NodeEvent, Outbound, PeerId};
use crate::state::BootstrapAccount;

pub const SIM_CHAIN_ID: &str = "blockcampus-sim";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Latency {
    pub min_ms: u64,
    pub max_ms: u64,
}

/// Links between `side` and the remaining nodes are cut during `[start_ms, end_ms)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub start_ms: u64,
    pub end_ms: u64,
    pub side: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crash {
    pub node: usize,
    pub at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recover_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Workload {
    pub users: usize,
    pub start_ms: u64,
    /// Gap between submissions; 0 disables the workload.
    pub interval_ms: u64,
    pub destructive: bool,
}

impl Default for Workload {
    fn default() -> Self {
        Workload { users: 8, start_ms: 1_000, interval_ms: 1_000, destructive: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub nodes: usize,
    /// Indices of the nodes holding validator keys.
    pub validators: Vec<usize>,
    pub latency: Latency,
    /// Per-message loss probability in thousandths.
    pub drop_permille: u32,
    pub partitions: Vec<Partition>,
    pub crashes: Vec<Crash>,
    pub duration_ms: u64,
    pub consensus: ConsensusParams,
    pub workload: Workload,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            nodes: 4,
            validators: vec![0, 1, 2, 3],
            latency: Latency { min_ms: 20, max_ms: 200 },
            drop_permille: 0,
            partitions: vec![],
            crashes: vec![],
            duration_ms: 60_000,
            consensus: ConsensusParams::default(),
            workload: Workload::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimConfigError {
    #[error("simulation needs at least one node")]
    NoNodes,
    #[error("validator index {0} is out of range or repeated")]
    BadValidator(usize),
    #[error("latency range is empty")]
    BadLatency,
    #[error("drop_permille must be at most 1000")]
    BadDropRate,
    #[error("partition {0} is malformed")]
    BadPartition(usize),
    #[error("crash {0} is malformed")]
    BadCrash(usize),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimConfigError> {
        if self.nodes == 0 {
            return Err(SimConfigError::NoNodes);
        }
        if self.validators.is_empty() {
            return Err(ConsensusError::EmptyValidatorSet.into());
        }
        for (i, &v) in self.validators.iter().enumerate() {
            if v >= self.nodes || self.validators[..i].contains(&v) {
                return Err(SimConfigError::BadValidator(v));
            }
        }
        if self.latency.min_ms > self.latency.max_ms {
            return Err(SimConfigError::BadLatency);
        }
        if self.drop_permille > 1000 {
            return Err(SimConfigError::BadDropRate);
        }
        for (i, p) in self.partitions.iter().enumerate() {
            if p.start_ms >= p.end_ms || p.side.is_empty() || p.side.iter().any(|&n| n >= self.nodes) {
                return Err(SimConfigError::BadPartition(i));
            }
        }
        for (i, c) in self.crashes.iter().enumerate() {
            if c.node >= self.nodes || c.recover_ms.is_some_and(|r| r <= c.at_ms) {
                return Err(SimConfigError::BadCrash(i));
            }
        }
        self.consensus.validate()?;
        Ok(())
    }
}

/// Every key a simulation uses, derived from the seed alone.
pub struct SimKeys {
    pub nodes: Vec<Keypair>,
    pub owner: Keypair,
    pub admin: Keypair,
    pub users: Vec<Keypair>,
}

impl SimKeys {
    pub fn derive(cfg: &SimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let nodes = (0..cfg.nodes).map(|_| Keypair::generate(&mut rng)).collect();
        let owner = Keypair::generate(&mut rng);
        let admin = Keypair::generate(&mut rng);
        let users = (0..cfg.workload.users).map(|_| Keypair::generate(&mut rng)).collect();
        SimKeys { nodes, owner, admin, users }
    }

    pub fn genesis(&self, cfg: &SimConfig) -> GenesisFile {
        let validators: Vec<Keypair> = cfg.validators.iter().map(|&i| self.nodes[i].clone()).collect();
        let mut g = GenesisFile::with_defaults(SIM_CHAIN_ID, &validators, &self.owner, &self.admin);
        g.consensus = cfg.consensus;
        g.bootstrap_accounts.extend(self.users.iter().enumerate().map(|(i, k)| BootstrapAccount {
            address: k.address(),
            pubkey: k.public(),
            username: format!("user{i}"),
            role: user_role(i),
        }));
        g
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event")]
pub enum SimEvent {
    SimStarted { seed: u64, genesis: Hash },
    TxSubmitted { tx_hash: Hash, kind: String, head_height: u64, result: String },
    MessageDropped { from: usize, to: usize, kind: String, reason: String },
    PartitionStarted { side: Vec<usize> },
    PartitionHealed { side: Vec<usize> },
    NodeCrashed,
    NodeRecovered,
    Final { height: u64, head: Hash, score: u64, state_root: Hash },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum TraceEvent {
    Node(NodeEvent),
    Sim(SimEvent),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceLine {
    pub t: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeFinal {
    pub node: usize,
    pub height: u64,
    pub head: Hash,
    pub score: u64,
    pub state_root: Hash,
}

pub struct SimResult {
    pub genesis: GenesisFile,
    pub trace: Vec<TraceLine>,
    pub nodes: Vec<Node>,
}

impl SimResult {
    /// The trace as JSON lines, one canonical object per line.
    pub fn trace_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for line in &self.trace {
            out.extend(to_canonical(line).expect("trace lines are encodable"));
            out.push(b'\n');
        }
        out
    }

    pub fn finals(&self) -> Vec<NodeFinal> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let tip = n.head_tip();
                NodeFinal {
                    node: i,
                    height: tip.height,
                    head: tip.hash,
                    score: tip.score,
                    state_root: n.head_state().state_root(),
                }
            })
            .collect()
    }

    pub fn converged(&self) -> bool {
        let finals = self.finals();
        finals.windows(2).all(|w| w[0].head == w[1].head && w[0].state_root == w[1].state_root)
    }
}

enum Ev {
    Deliver { from: PeerId, to: PeerId, msg: NetMessage },
    Wake { node: usize, at: u64 },
    Submit,
    Crash(usize),
    Recover(usize),
    PartitionStart(usize),
    PartitionEnd(usize),
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    now: u64,
    seq: u64,
    queue: BTreeMap<(u64, u64), Ev>,
    nodes: Vec<Node>,
    alive: Vec<bool>,
    timers: Vec<Option<u64>>,
    net_rng: ChaCha8Rng,
    workload: WorkloadGen,
    trace: Vec<TraceLine>,
    draining: bool,
}

impl Sim<'_> {
    fn schedule(&mut self, at: u64, ev: Ev) {
        self.queue.insert((at, self.seq), ev);
        self.seq += 1;
    }

    fn log(&mut self, node: Option<usize>, event: TraceEvent) {
        self.trace.push(TraceLine { t: self.now, node, event });
    }

    fn partitioned(&self, a: usize, b: usize) -> bool {
        self.cfg.partitions.iter().any(|p| {
            p.start_ms <= self.now && self.now < p.end_ms && (p.side.contains(&a) != p.side.contains(&b))
        })
    }

    fn send(&mut self, from: usize, to: usize, msg: NetMessage) {
        let reason = if self.partitioned(from, to) {
            Some("partition")
        } else if self.net_rng.gen_range(0..1000) < self.cfg.drop_permille {
            Some("loss")
        } else {
            None
        };
        if let Some(reason) = reason {
            let event = SimEvent::MessageDropped { from, to, kind: msg.kind().into(), reason: reason.into() };
            self.log(None, TraceEvent::Sim(event));
            return;
        }
        let latency = self.net_rng.gen_range(self.cfg.latency.min_ms..=self.cfg.latency.max_ms);
        self.schedule(self.now + latency, Ev::Deliver { from, to, msg });
    }

    /// Routes a node's outbox, records its events and re-arms its timer.
    fn flush(&mut self, i: usize) {
        for ev in self.nodes[i].drain_events() {
            self.log(Some(i), TraceEvent::Node(ev));
        }
        for out in self.nodes[i].drain_outbound() {
            match out {
                Outbound::Send { to, msg } => self.send(i, to, msg),
                Outbound::Broadcast { except, msg } => {
                    for to in 0..self.nodes.len() {
                        if to != i && Some(to) != except {
                            self.send(i, to, msg.clone());
                        }
                    }
                }
            }
        }
        if self.draining || !self.alive[i] {
            return;
        }
        let wake = self.nodes[i].next_wakeup();
        if wake != self.timers[i] {
            self.timers[i] = wake;
            if let Some(at) = wake {
                self.schedule(at.max(self.now), Ev::Wake { node: i, at });
            }
        }
    }

    fn submit(&mut self) {
        let alive: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.alive[i]).collect();
        if alive.is_empty() {
            return;
        }
        let i = alive[self.workload.rng().gen_range(0..alive.len())];
        let Some(tx) = self.workload.next(self.nodes[i].head_state()) else { return };
        let tx_hash = tx.hash();
        let kind = tx.payload.kind().to_owned();
        let head_height = self.nodes[i].head().height();
        let result = match self.nodes[i].submit_tx(tx, None) {
            Ok(_) => "accepted".to_owned(),
            Err(e) => e.code().to_owned(),
        };
        self.log(Some(i), TraceEvent::Sim(SimEvent::TxSubmitted { tx_hash, kind, head_height, result }));
        self.flush(i);
    }

    fn step(&mut self, ev: Ev) {
        match ev {
            Ev::Deliver { from, to, msg } => {
                if self.alive[to] {
                    self.nodes[to].handle_message(from, msg, self.now);
                    self.flush(to);
                }
            }
            Ev::Wake { node, at } => {
                if self.alive[node] && self.timers[node] == Some(at) {
                    self.timers[node] = None;
                    self.nodes[node].tick(self.now);
                    self.flush(node);
                }
            }
            Ev::Submit => {
                self.submit();
                let next = self.now + self.cfg.workload.interval_ms;
                if next < self.cfg.duration_ms {
                    self.schedule(next, Ev::Submit);
                }
            }
            Ev::Crash(i) => {
                self.alive[i] = false;
                self.timers[i] = None;
                self.log(Some(i), TraceEvent::Sim(SimEvent::NodeCrashed));
            }
            Ev::Recover(i) => {
                self.alive[i] = true;
                self.log(Some(i), TraceEvent::Sim(SimEvent::NodeRecovered));
                self.flush(i);
            }
            Ev::PartitionStart(p) => {
                let side = self.cfg.partitions[p].side.clone();
                self.log(None, TraceEvent::Sim(SimEvent::PartitionStarted { side }));
            }
            Ev::PartitionEnd(p) => {
                let side = self.cfg.partitions[p].side.clone();
                self.log(None, TraceEvent::Sim(SimEvent::PartitionHealed { side }));
            }
        }
    }
}

/// Runs `cfg` for `cfg.duration_ms`, then lets in-flight messages land with
/// block production stopped so final heads reflect everything that was sent.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult, SimConfigError> {
    cfg.validate()?;
    let keys = SimKeys::derive(cfg);
    let genesis = keys.genesis(cfg);
    let nodes = (0..cfg.nodes)
        .map(|i| {
            let key = cfg.validators.contains(&i).then(|| keys.nodes[i].clone());
            Node::new(genesis.clone(), key, ContentStore::in_memory()).expect("simulated genesis is valid")
        })
        .collect::<Vec<_>>();
    let mut net_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    net_rng.set_stream(2);
    let mut wl_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    wl_rng.set_stream(3);
    let mut workload = WorkloadGen::new(SIM_CHAIN_ID, keys.users, wl_rng);
    workload.destructive = cfg.workload.destructive;

    let mut sim = Sim {
        cfg,
        now: genesis.genesis_time * 1000,
        seq: 0,
        queue: BTreeMap::new(),
        alive: vec![true; cfg.nodes],
        timers: vec![None; cfg.nodes],
        nodes,
        net_rng,
        workload,
        trace: Vec::new(),
        draining: false,
    };
    let genesis_hash = genesis.block().expect("valid").hash();
    sim.log(None, TraceEvent::Sim(SimEvent::SimStarted { seed: cfg.seed, genesis: genesis_hash }));

    for (i, p) in cfg.partitions.iter().enumerate() {
        sim.schedule(p.start_ms, Ev::PartitionStart(i));
        sim.schedule(p.end_ms, Ev::PartitionEnd(i));
    }
    for c in &cfg.crashes {
        sim.schedule(c.at_ms, Ev::Crash(c.node));
        if let Some(r) = c.recover_ms {
            sim.schedule(r, Ev::Recover(c.node));
        }
    }
    if cfg.workload.interval_ms > 0 && cfg.workload.users > 0 && cfg.workload.start_ms < cfg.duration_ms {
        sim.schedule(cfg.workload.start_ms, Ev::Submit);
    }
    for i in 0..cfg.nodes {
        sim.flush(i);
    }

    while let Some(entry) = sim.queue.first_entry() {
        let (at, _) = *entry.key();
        if at > cfg.duration_ms && !sim.draining {
            sim.draining = true;
        }
        let ev = entry.remove();
        if sim.draining && !matches!(ev, Ev::Deliver { .. }) {
            continue;
        }
        sim.now = at;
        sim.step(ev);
    }

    let mut result = SimResult { genesis, trace: std::mem::take(&mut sim.trace), nodes: sim.nodes };
    let end = sim.now;
    for f in result.finals() {
        let event = SimEvent::Final { height: f.height, head: f.head, score: f.score, state_root: f.state_root };
        result.trace.push(TraceLine { t: end, node: Some(f.node), event: TraceEvent::Sim(event) });
    }
    Ok(result)
}
