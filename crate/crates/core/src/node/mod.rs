//! Full node: mempool, block production, gossip, sync and reorgs.
//!
//! A [`Node`] is a sans-IO state machine. Drivers (the simulator or the real
//! process runtime) feed it messages, submissions and clock ticks, then drain
//! the messages it wants sent and the events it emitted. One call runs at a
//! time, which is the node's event loop.

mod mempool;
mod message;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use mempool::{Mempool, DEFAULT_PER_SENDER_BLOCK_CAP, DEFAULT_POOL_CAP};
pub use message::{NetMessage, MAX_BLOCKS_PER_RESPONSE};

use crate::block::{compute_tx_root, validate_block_structure, Block, BlockHeader};
use crate::consensus::{block_weight, min_timestamp, proposer_offset, verify_block_consensus, ChainTip};
use crate::content::{Cid, ContentStore};
use crate::crypto::{Address, Hash, Keypair, Signature};
use crate::genesis::{GenesisError, GenesisFile};
use crate::state::{apply_block, TxError, WorldState};
use crate::tx::{verify_tx_signature, SignedTransaction};

pub type PeerId = usize;

/// Heights at which a state snapshot is kept for every branch.
pub const SNAPSHOT_INTERVAL: u64 = 64;
/// How far ahead of the local clock a block timestamp may be.
pub const MAX_FUTURE_DRIFT_MS: u64 = 2_000;
const RECENT_STATES: usize = 32;
const MAX_ORPHANS: usize = 1_024;
const SEEN_CAP: usize = 100_000;
const CONTENT_TIMEOUT_MS: u64 = 2_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    Broadcast { except: Option<PeerId>, msg: NetMessage },
    Send { to: PeerId, msg: NetMessage },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event")]
pub enum NodeEvent {
    BlockProduced { height: u64, hash: Hash, proposer: Address, timestamp: u64, offset: u64, txs: Vec<Hash> },
    HeadChanged { height: u64, hash: Hash, score: u64, state_root: Hash, reorg_depth: u64 },
    BlockRejected { hash: Hash, reason: String },
    TxAccepted { tx_hash: Hash },
    TxEvicted { tx_hash: Hash, reason: String },
    ContentStored { cid: Cid },
    ContentDiscarded { cid: Cid, peer: PeerId },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubmitError {
    #[error(transparent)]
    Rejected(#[from] TxError),
    #[error("PoolFull")]
    PoolFull,
    #[error("DuplicateTx")]
    DuplicateTx,
}

impl SubmitError {
    pub fn code(&self) -> &'static str {
        match self {
            SubmitError::Rejected(e) => e.code(),
            SubmitError::PoolFull => "PoolFull",
            SubmitError::DuplicateTx => "DuplicateTx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Import {
    Accepted,
    Known,
    Orphan,
    Deferred,
    Rejected,
}

struct StoredBlock {
    block: Arc<Block>,
    score: u64,
}

struct Fetch {
    remaining: VecDeque<PeerId>,
    asked: Option<PeerId>,
    deadline_ms: u64,
}

/// Read-only view of the committed head, cheap to clone and share.
#[derive(Clone)]
pub struct NodeView {
    pub genesis: Arc<GenesisFile>,
    pub head: Arc<Block>,
    pub head_score: u64,
    pub state: Arc<WorldState>,
    pub chain: Arc<Vec<Arc<Block>>>,
    pub mempool: Arc<Vec<SignedTransaction>>,
}

impl NodeView {
    pub fn block_at(&self, height: u64) -> Option<&Arc<Block>> {
        self.chain.get(height as usize)
    }

    pub fn block_by_hash(&self, hash: &Hash) -> Option<&Arc<Block>> {
        self.chain.iter().find(|b| &b.hash() == hash)
    }
}

pub struct Node {
    genesis: Arc<GenesisFile>,
    key: Option<Keypair>,
    blocks: BTreeMap<Hash, StoredBlock>,
    canonical: Vec<Hash>,
    head_state: Arc<WorldState>,
    snapshots: BTreeMap<Hash, Arc<WorldState>>,
    recent: VecDeque<(Hash, Arc<WorldState>)>,
    orphans: BTreeMap<Hash, Block>,
    rejected: BTreeSet<Hash>,
    seen: BTreeSet<Hash>,
    seen_order: VecDeque<Hash>,
    mempool: Mempool,
    content: ContentStore,
    fetches: BTreeMap<Cid, Fetch>,
    outbox: Vec<Outbound>,
    events: Vec<NodeEvent>,
}

impl Node {
    pub fn new(genesis: GenesisFile, key: Option<Keypair>, content: ContentStore) -> Result<Self, GenesisError> {
        let state = Arc::new(genesis.state()?);
        let block = genesis.block()?;
        let hash = block.hash();
        let mut blocks = BTreeMap::new();
        blocks.insert(hash, StoredBlock { block: Arc::new(block), score: 0 });
        let mut snapshots = BTreeMap::new();
        snapshots.insert(hash, state.clone());
        Ok(Node {
            genesis: Arc::new(genesis),
            key,
            blocks,
            canonical: vec![hash],
            head_state: state,
            snapshots,
            recent: VecDeque::new(),
            orphans: BTreeMap::new(),
            rejected: BTreeSet::new(),
            seen: BTreeSet::new(),
            seen_order: VecDeque::new(),
            mempool: Mempool::default(),
            content,
            fetches: BTreeMap::new(),
            outbox: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn genesis(&self) -> &GenesisFile {
        &self.genesis
    }

    pub fn address(&self) -> Option<Address> {
        self.key.as_ref().map(Keypair::address)
    }

    pub fn is_validator(&self) -> bool {
        self.address().is_some_and(|a| self.genesis.validators.contains(&a))
    }

    pub fn head(&self) -> &Arc<Block> {
        &self.blocks[self.canonical.last().expect("genesis")].block
    }

    pub fn head_tip(&self) -> ChainTip {
        let head = self.head();
        ChainTip { hash: head.hash(), height: head.height(), score: self.blocks[&head.hash()].score }
    }

    pub fn head_state(&self) -> &Arc<WorldState> {
        &self.head_state
    }

    /// Canonical chain from genesis to head.
    pub fn chain(&self) -> impl Iterator<Item = &Arc<Block>> + '_ {
        self.canonical.iter().map(|h| &self.blocks[h].block)
    }

    pub fn block(&self, hash: &Hash) -> Option<&Arc<Block>> {
        self.blocks.get(hash).map(|s| &s.block)
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn mempool_mut(&mut self) -> &mut Mempool {
        &mut self.mempool
    }

    pub fn content(&self) -> &ContentStore {
        &self.content
    }

    pub fn view(&self) -> NodeView {
        NodeView {
            genesis: self.genesis.clone(),
            head: self.head().clone(),
            head_score: self.head_tip().score,
            state: self.head_state.clone(),
            chain: Arc::new(self.chain().cloned().collect()),
            mempool: Arc::new(self.mempool.iter().cloned().collect()),
        }
    }

    pub fn drain_outbound(&mut self) -> Vec<Outbound> {
        std::mem::take(&mut self.outbox)
    }

    pub fn drain_events(&mut self) -> Vec<NodeEvent> {
        std::mem::take(&mut self.events)
    }

    /// Earliest time (ms) at which [`Node::tick`] has something to do.
    pub fn next_wakeup(&self) -> Option<u64> {
        let fetch = self.fetches.values().map(|f| f.deadline_ms).min();
        match (self.production_due(), fetch) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn tick(&mut self, now_ms: u64) {
        self.expire_fetches(now_ms);
        if self.production_due().is_some_and(|due| now_ms >= due) {
            self.produce_block(now_ms);
        }
    }

    /// Admits a transaction from a local client (`from = None`) or a peer.
    pub fn submit_tx(&mut self, tx: SignedTransaction, from: Option<PeerId>) -> Result<Hash, SubmitError> {
        let tx_hash = tx.hash();
        if self.mempool.contains(&tx_hash) {
            return Err(SubmitError::DuplicateTx);
        }
        if tx.chain_id != self.genesis.chain_id {
            return Err(TxError::WrongChain(tx.chain_id.clone()).into());
        }
        if !verify_tx_signature(&tx) {
            return Err(TxError::BadSignature.into());
        }
        let sender = tx.sender();
        let expected = self.head_state.account(&sender).map_or(0, |a| a.nonce);
        if tx.nonce < expected {
            return Err(TxError::BadNonce { expected, got: tx.nonce }.into());
        }
        if self.mempool.has_nonce(&sender, tx.nonce) {
            return Err(SubmitError::DuplicateTx);
        }
        if tx.nonce == expected {
            let mut scratch = (*self.head_state).clone();
            scratch.apply_transaction(&tx, self.head().height() + 1)?;
        }
        if self.mempool.is_full() {
            return Err(SubmitError::PoolFull);
        }
        self.mempool.insert(tx_hash, tx.clone());
        self.events.push(NodeEvent::TxAccepted { tx_hash });
        let msg = NetMessage::TxGossip(tx);
        self.mark_seen(msg.hash());
        self.outbox.push(Outbound::Broadcast { except: from, msg });
        Ok(tx_hash)
    }

    pub fn handle_message(&mut self, from: PeerId, msg: NetMessage, now_ms: u64) {
        match msg {
            NetMessage::TxGossip(tx) => {
                if self.mark_seen(NetMessage::TxGossip(tx.clone()).hash()) {
                    let _ = self.submit_tx(tx, Some(from));
                }
            }
            NetMessage::BlockGossip(block) => {
                if self.mark_seen(NetMessage::BlockGossip(block.clone()).hash()) {
                    self.import_block(block, Some(from), now_ms, true);
                }
            }
            NetMessage::GetBlocks { from_height, to_height } => {
                let head = self.head().height();
                let lo = from_height.max(1);
                let hi = to_height.min(head).min(lo.saturating_add(MAX_BLOCKS_PER_RESPONSE as u64 - 1));
                if lo <= hi {
                    let blocks: Vec<Block> =
                        (lo..=hi).map(|h| (*self.blocks[&self.canonical[h as usize]].block).clone()).collect();
                    self.outbox.push(Outbound::Send { to: from, msg: NetMessage::Blocks(blocks) });
                }
            }
            NetMessage::Blocks(blocks) => {
                for (i, block) in blocks.into_iter().take(MAX_BLOCKS_PER_RESPONSE).enumerate() {
                    let height = block.height();
                    if self.import_block(block, Some(from), now_ms, false) == Import::Orphan && i == 0 && height > 1 {
                        let to = height - 1;
                        let from_height = to.saturating_sub(MAX_BLOCKS_PER_RESPONSE as u64 - 1).max(1);
                        self.outbox.push(Outbound::Send {
                            to: from,
                            msg: NetMessage::GetBlocks { from_height, to_height: to },
                        });
                    }
                }
            }
            NetMessage::ContentRequest(cid) => {
                let (found, bytes) = match self.content.get(&cid) {
                    Some(b) => (true, b),
                    None => (false, vec![]),
                };
                self.outbox.push(Outbound::Send { to: from, msg: NetMessage::ContentResponse { cid, found, bytes } });
            }
            NetMessage::ContentResponse { cid, found, bytes } => {
                let Some(fetch) = self.fetches.get(&cid) else { return };
                if fetch.asked != Some(from) {
                    return;
                }
                if found && cid.verify(&bytes) && self.content.put(&bytes).is_ok() {
                    self.fetches.remove(&cid);
                    self.events.push(NodeEvent::ContentStored { cid });
                } else {
                    if found {
                        self.events.push(NodeEvent::ContentDiscarded { cid, peer: from });
                    }
                    self.ask_next(cid, now_ms);
                }
            }
        }
    }

    /// Starts fetching `cid` from `peers`, one at a time in order.
    pub fn fetch_content(&mut self, cid: Cid, peers: Vec<PeerId>, now_ms: u64) {
        if self.content.contains(&cid) || self.fetches.contains_key(&cid) {
            return;
        }
        self.fetches.insert(cid, Fetch { remaining: peers.into(), asked: None, deadline_ms: now_ms });
        self.ask_next(cid, now_ms);
    }

    fn ask_next(&mut self, cid: Cid, now_ms: u64) {
        let Some(fetch) = self.fetches.get_mut(&cid) else { return };
        match fetch.remaining.pop_front() {
            Some(peer) => {
                fetch.asked = Some(peer);
                fetch.deadline_ms = now_ms + CONTENT_TIMEOUT_MS;
                self.outbox.push(Outbound::Send { to: peer, msg: NetMessage::ContentRequest(cid) });
            }
            None => {
                self.fetches.remove(&cid);
            }
        }
    }

    fn expire_fetches(&mut self, now_ms: u64) {
        let expired: Vec<Cid> =
            self.fetches.iter().filter(|(_, f)| f.deadline_ms <= now_ms && f.asked.is_some()).map(|(c, _)| *c).collect();
        for cid in expired {
            self.ask_next(cid, now_ms);
        }
    }

    fn production_due(&self) -> Option<u64> {
        let key = self.key.as_ref()?;
        let head = self.head();
        let offset = proposer_offset(head.height() + 1, &key.address(), &self.genesis.validators).ok()?;
        Some(min_timestamp(head.header.timestamp, offset, &self.genesis.consensus) * 1000)
    }

    /// Seals a block on the current head if this node's slot has opened.
    pub fn produce_block(&mut self, now_ms: u64) -> Option<Arc<Block>> {
        let due = self.production_due()?;
        if now_ms < due {
            return None;
        }
        let key = self.key.clone()?;
        let parent = self.head().clone();
        let height = parent.height() + 1;
        let mut state = (*self.head_state).clone();
        let (txs, evicted) = self.mempool.select(&mut state, height);
        for (tx_hash, err) in evicted {
            self.events.push(NodeEvent::TxEvicted { tx_hash, reason: err.code().to_owned() });
        }
        state.height_applied = height;
        let mut header = BlockHeader {
            chain_id: self.genesis.chain_id.clone(),
            height,
            parent_hash: parent.hash(),
            timestamp: now_ms / 1000,
            tx_root: compute_tx_root(&txs),
            state_root: state.state_root(),
            proposer: key.address(),
            signature: Signature::ZERO,
        };
        header.sign(&key);
        let block = Block { header, transactions: txs };
        let offset = proposer_offset(height, &key.address(), &self.genesis.validators).expect("validator");
        self.events.push(NodeEvent::BlockProduced {
            height,
            hash: block.hash(),
            proposer: key.address(),
            timestamp: block.header.timestamp,
            offset,
            txs: block.transactions.iter().map(SignedTransaction::hash).collect(),
        });
        let hash = block.hash();
        self.accept(block, &parent, Arc::new(state), None);
        self.blocks.get(&hash).map(|s| s.block.clone())
    }

    /// Validates and stores `block`, switching head if it wins fork choice.
    pub fn import_block(&mut self, block: Block, from: Option<PeerId>, now_ms: u64, request_missing: bool) -> Import {
        let hash = block.hash();
        if self.blocks.contains_key(&hash) {
            return Import::Known;
        }
        if self.rejected.contains(&hash) || block.height() == 0 {
            return Import::Rejected;
        }
        if block.header.timestamp.saturating_mul(1000) > now_ms + MAX_FUTURE_DRIFT_MS {
            return Import::Deferred;
        }
        let Some(parent) = self.blocks.get(&block.header.parent_hash).map(|s| s.block.clone()) else {
            let height = block.height();
            if self.orphans.len() < MAX_ORPHANS {
                self.orphans.insert(hash, block);
            }
            if let (true, Some(peer)) = (request_missing, from) {
                let to = height - 1;
                let from_height = (self.head().height() + 1).min(to).max(1);
                self.outbox.push(Outbound::Send { to: peer, msg: NetMessage::GetBlocks { from_height, to_height: to } });
            }
            return Import::Orphan;
        };

        if let Err(reason) = self.validate(&block, &parent) {
            self.rejected.insert(hash);
            self.events.push(NodeEvent::BlockRejected { hash, reason });
            return Import::Rejected;
        }
        let parent_state = self.state_at(&parent.hash());
        let state = match apply_block(&parent_state, &block) {
            Ok((state, _)) => Arc::new(state),
            Err(e) => {
                self.rejected.insert(hash);
                self.events.push(NodeEvent::BlockRejected { hash, reason: e.to_string() });
                return Import::Rejected;
            }
        };
        self.accept(block, &parent, state, from);

        // Any orphans waiting on this block can now connect.
        let mut ready: Vec<Hash> = vec![hash];
        while let Some(parent_hash) = ready.pop() {
            let children: Vec<Hash> =
                self.orphans.iter().filter(|(_, b)| b.header.parent_hash == parent_hash).map(|(h, _)| *h).collect();
            for child in children {
                let block = self.orphans.remove(&child).expect("listed");
                if self.import_block(block, None, now_ms, false) == Import::Accepted {
                    ready.push(child);
                }
            }
        }
        Import::Accepted
    }

    fn validate(&self, block: &Block, parent: &Block) -> Result<(), String> {
        validate_block_structure(block, parent, &self.genesis.validators).map_err(|e| e.to_string())?;
        verify_block_consensus(block, parent, &self.genesis.validators, &self.genesis.consensus)
            .map_err(|e| e.to_string())
    }

    fn accept(&mut self, block: Block, parent: &Block, state: Arc<WorldState>, from: Option<PeerId>) {
        let hash = block.hash();
        let score = self.blocks[&parent.hash()].score
            + block_weight(&block, &self.genesis.validators, &self.genesis.consensus);
        let block = Arc::new(block);
        self.blocks.insert(hash, StoredBlock { block: block.clone(), score });
        self.cache_state(hash, block.height(), state.clone());

        let msg = NetMessage::BlockGossip((*block).clone());
        self.mark_seen(msg.hash());
        self.outbox.push(Outbound::Broadcast { except: from, msg });

        let tip = ChainTip { hash, height: block.height(), score };
        if tip.preference(&self.head_tip()) == std::cmp::Ordering::Greater {
            self.set_head(tip, state);
        }
    }

    fn set_head(&mut self, tip: ChainTip, state: Arc<WorldState>) {
        let old_height = self.head().height();
        // Walk back from the new head until we meet the current canonical chain.
        let mut branch = Vec::new();
        let mut cursor = tip.hash;
        loop {
            let height = self.blocks[&cursor].block.height() as usize;
            if self.canonical.get(height) == Some(&cursor) {
                break;
            }
            branch.push(cursor);
            cursor = self.blocks[&cursor].block.header.parent_hash;
        }
        let ancestor = self.blocks[&cursor].block.height();
        let abandoned: Vec<Hash> = self.canonical.drain(ancestor as usize + 1..).collect();
        self.canonical.extend(branch.into_iter().rev());
        self.head_state = state;

        for h in &abandoned {
            let block = self.blocks[h].block.clone();
            for tx in &block.transactions {
                let tx_hash = tx.hash();
                let next = self.head_state.account(&tx.sender()).map_or(0, |a| a.nonce);
                if tx.nonce >= next
                    && !self.mempool.contains(&tx_hash)
                    && !self.mempool.has_nonce(&tx.sender(), tx.nonce)
                    && !self.mempool.is_full()
                {
                    self.mempool.insert(tx_hash, tx.clone());
                }
            }
        }
        self.mempool.prune(&self.head_state);
        self.events.push(NodeEvent::HeadChanged {
            height: tip.height,
            hash: tip.hash,
            score: tip.score,
            state_root: self.head_state.state_root(),
            reorg_depth: old_height - ancestor,
        });
    }

    fn cache_state(&mut self, hash: Hash, height: u64, state: Arc<WorldState>) {
        if height.is_multiple_of(SNAPSHOT_INTERVAL) {
            self.snapshots.insert(hash, state);
            return;
        }
        self.recent.push_back((hash, state));
        if self.recent.len() > RECENT_STATES {
            self.recent.pop_front();
        }
    }

    /// State after applying the stored block `hash`, replayed from the
    /// nearest cached ancestor if needed.
    pub fn state_at(&mut self, hash: &Hash) -> Arc<WorldState> {
        if self.canonical.last() == Some(hash) {
            return self.head_state.clone();
        }
        let mut path = Vec::new();
        let mut cursor = *hash;
        let base = loop {
            if let Some(s) = self.snapshots.get(&cursor) {
                break s.clone();
            }
            if let Some((_, s)) = self.recent.iter().find(|(h, _)| *h == cursor) {
                break s.clone();
            }
            path.push(cursor);
            cursor = self.blocks[&cursor].block.header.parent_hash;
        };
        let mut state = base;
        for h in path.into_iter().rev() {
            let block = self.blocks[&h].block.clone();
            let (next, _) = apply_block(&state, &block).expect("stored blocks were validated");
            state = Arc::new(next);
            self.cache_state(h, block.height(), state.clone());
        }
        state
    }

    fn mark_seen(&mut self, msg_hash: Hash) -> bool {
        if !self.seen.insert(msg_hash) {
            return false;
        }
        self.seen_order.push_back(msg_hash);
        if self.seen_order.len() > SEEN_CAP {
            if let Some(old) = self.seen_order.pop_front() {
                self.seen.remove(&old);
            }
        }
        true
    }
}
