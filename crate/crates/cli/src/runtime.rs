//! Real-time driver for a [`Node`]: one task owns the node and processes
//! queued commands, timers and peer messages one at a time.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use blockcampus_core::{Cid, Hash, NetMessage, Node, NodeView, Outbound, PeerId, SignedTransaction, SubmitError};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::sleep;

/// Longest the loop sleeps without a timer due.
const IDLE_WAKE: Duration = Duration::from_millis(500);

pub fn wall_clock_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).expect("clock after 1970").as_millis() as u64
}

/// Body of `POST /v1/p2p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeerEnvelope {
    /// Base URL the sender listens on.
    pub from: String,
    pub msg: NetMessage,
}

pub enum Command {
    Submit(SignedTransaction, oneshot::Sender<Result<Hash, SubmitError>>),
    PutContent(Vec<u8>, oneshot::Sender<Result<Cid, String>>),
    GetContent(Cid, oneshot::Sender<Option<Vec<u8>>>),
    Peer(PeerEnvelope),
}

/// Cheap, cloneable access to a running node.
#[derive(Clone)]
pub struct NodeHandle {
    commands: mpsc::Sender<Command>,
    view: watch::Receiver<NodeView>,
}

impl NodeHandle {
    /// Latest committed head.
    pub fn view(&self) -> NodeView {
        self.view.borrow().clone()
    }

    pub async fn submit(&self, tx: SignedTransaction) -> Result<Hash, SubmitError> {
        let (reply, rx) = oneshot::channel();
        self.send(Command::Submit(tx, reply)).await;
        rx.await.expect("node loop alive")
    }

    pub async fn put_content(&self, bytes: Vec<u8>) -> Result<Cid, String> {
        let (reply, rx) = oneshot::channel();
        self.send(Command::PutContent(bytes, reply)).await;
        rx.await.expect("node loop alive")
    }

    pub async fn get_content(&self, cid: Cid) -> Option<Vec<u8>> {
        let (reply, rx) = oneshot::channel();
        self.send(Command::GetContent(cid, reply)).await;
        rx.await.expect("node loop alive")
    }

    pub async fn deliver(&self, envelope: PeerEnvelope) {
        self.send(Command::Peer(envelope)).await;
    }

    async fn send(&self, cmd: Command) {
        self.commands.send(cmd).await.expect("node loop alive");
    }
}

struct Runtime {
    node: Node,
    /// Index is the local [`PeerId`].
    peers: Vec<String>,
    self_url: String,
    http: reqwest::Client,
    view: watch::Sender<NodeView>,
    clock: fn() -> u64,
}

/// Starts the event loop on the current tokio runtime.
pub fn spawn(node: Node, peers: Vec<String>, self_url: String) -> (NodeHandle, JoinHandle<()>) {
    spawn_with_clock(node, peers, self_url, wall_clock_ms)
}

pub fn spawn_with_clock(
    node: Node,
    peers: Vec<String>,
    self_url: String,
    clock: fn() -> u64,
) -> (NodeHandle, JoinHandle<()>) {
    let (commands, rx) = mpsc::channel(1024);
    let (view, view_rx) = watch::channel(node.view());
    let peers = peers.into_iter().map(|p| p.trim_end_matches('/').to_owned()).collect();
    let rt = Runtime { node, peers, self_url, http: reqwest::Client::new(), view, clock };
    let task = tokio::spawn(rt.run(rx));
    (NodeHandle { commands, view: view_rx }, task)
}

impl Runtime {
    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        loop {
            let now = (self.clock)();
            let wait = self.node.next_wakeup().map_or(IDLE_WAKE, |t| Duration::from_millis(t.saturating_sub(now)));
            tokio::select! {
                cmd = rx.recv() => match cmd {
                    Some(cmd) => self.handle(cmd),
                    None => return,
                },
                _ = sleep(wait.min(IDLE_WAKE)) => {}
            }
            self.node.tick((self.clock)());
            self.flush();
        }
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Submit(tx, reply) => {
                let _ = reply.send(self.node.submit_tx(tx, None));
            }
            Command::PutContent(bytes, reply) => {
                let _ = reply.send(self.node.content().put(&bytes).map_err(|e| e.to_string()));
            }
            Command::GetContent(cid, reply) => {
                let _ = reply.send(self.node.content().get(&cid));
            }
            Command::Peer(PeerEnvelope { from, msg }) => {
                let from = self.peer_id(&from);
                self.node.handle_message(from, msg, (self.clock)());
            }
        }
    }

    fn peer_id(&mut self, url: &str) -> PeerId {
        let url = url.trim_end_matches('/');
        match self.peers.iter().position(|p| p == url) {
            Some(i) => i,
            None => {
                self.peers.push(url.to_owned());
                self.peers.len() - 1
            }
        }
    }

    fn flush(&mut self) {
        let events = self.node.drain_events();
        for event in &events {
            match serde_json::to_string(event) {
                Ok(line) => tracing::info!(target: "blockcampus::node", "{line}"),
                Err(e) => tracing::warn!("unencodable event: {e}"),
            }
        }
        if !events.is_empty() {
            self.view.send_replace(self.node.view());
        }
        for out in self.node.drain_outbound() {
            let (targets, msg): (Vec<PeerId>, _) = match out {
                Outbound::Broadcast { except, msg } => ((0..self.peers.len()).filter(|p| Some(*p) != except).collect(), msg),
                Outbound::Send { to, msg } => (vec![to], msg),
            };
            let envelope = PeerEnvelope { from: self.self_url.clone(), msg };
            for to in targets {
                let url = format!("{}/v1/p2p", self.peers[to]);
                let request = self.http.post(url).json(&envelope);
                tokio::spawn(async move {
                    if let Err(e) = request.send().await {
                        tracing::debug!("peer unreachable: {e}");
                    }
                });
            }
        }
    }
}
