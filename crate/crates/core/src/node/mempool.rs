use std::collections::BTreeMap;

use crate::crypto::{Address, Hash};
use crate::state::{TxError, WorldState};
use crate::tx::SignedTransaction;

pub const DEFAULT_POOL_CAP: usize = 10_000;
pub const DEFAULT_PER_SENDER_BLOCK_CAP: usize = 16;

/// Verified, not-yet-included transactions, queued per sender by nonce.
#[derive(Debug, Clone)]
pub struct Mempool {
    queues: BTreeMap<Address, BTreeMap<u64, (Hash, SignedTransaction)>>,
    by_hash: BTreeMap<Hash, (Address, u64)>,
    pub cap: usize,
    pub per_sender_block_cap: usize,
}

impl Default for Mempool {
    fn default() -> Self {
        Mempool {
            queues: BTreeMap::new(),
            by_hash: BTreeMap::new(),
            cap: DEFAULT_POOL_CAP,
            per_sender_block_cap: DEFAULT_PER_SENDER_BLOCK_CAP,
        }
    }
}

impl Mempool {
    pub fn len(&self) -> usize {
        self.by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hash.is_empty()
    }

    pub fn contains(&self, tx_hash: &Hash) -> bool {
        self.by_hash.contains_key(tx_hash)
    }

    pub fn has_nonce(&self, sender: &Address, nonce: u64) -> bool {
        self.queues.get(sender).is_some_and(|q| q.contains_key(&nonce))
    }

    pub fn is_full(&self) -> bool {
        self.by_hash.len() >= self.cap
    }

    /// Inserts without any checks; callers validate first.
    pub fn insert(&mut self, tx_hash: Hash, tx: SignedTransaction) {
        let sender = tx.sender();
        let nonce = tx.nonce;
        self.by_hash.insert(tx_hash, (sender, nonce));
        self.queues.entry(sender).or_default().insert(nonce, (tx_hash, tx));
    }

    pub fn remove(&mut self, tx_hash: &Hash) -> Option<SignedTransaction> {
        let (sender, nonce) = self.by_hash.remove(tx_hash)?;
        let queue = self.queues.get_mut(&sender)?;
        let (_, tx) = queue.remove(&nonce)?;
        if queue.is_empty() {
            self.queues.remove(&sender);
        }
        Some(tx)
    }

    /// Drops everything the given state has already consumed.
    pub fn prune(&mut self, state: &WorldState) {
        let stale: Vec<Hash> = self
            .queues
            .iter()
            .flat_map(|(sender, q)| {
                let next = state.account(sender).map_or(0, |a| a.nonce);
                q.range(..next).map(|(_, (h, _))| *h)
            })
            .collect();
        for h in stale {
            self.remove(&h);
        }
    }

    /// Picks transactions for a block at `height`, applying each to `state`
    /// in sender-address then nonce order. Failing transactions are evicted;
    /// a nonce gap ends that sender's run without eviction.
    pub fn select(&mut self, state: &mut WorldState, height: u64) -> (Vec<SignedTransaction>, Vec<(Hash, TxError)>) {
        let mut chosen = Vec::new();
        let mut evicted = Vec::new();
        let senders: Vec<Address> = self.queues.keys().copied().collect();
        for sender in senders {
            let mut taken = 0;
            let queued: Vec<(u64, Hash, SignedTransaction)> =
                self.queues[&sender].iter().map(|(n, (h, tx))| (*n, *h, tx.clone())).collect();
            for (nonce, tx_hash, tx) in queued {
                if taken == self.per_sender_block_cap {
                    break;
                }
                let expected = state.account(&sender).map_or(0, |a| a.nonce);
                if nonce > expected {
                    break;
                }
                match state.apply_transaction(&tx, height) {
                    Ok(_) => {
                        chosen.push(tx);
                        taken += 1;
                    }
                    Err(e) => {
                        self.remove(&tx_hash);
                        evicted.push((tx_hash, e));
                        if nonce >= expected {
                            break;
                        }
                    }
                }
            }
        }
        (chosen, evicted)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SignedTransaction> {
        self.queues.values().flat_map(|q| q.values().map(|(_, tx)| tx))
    }
}
