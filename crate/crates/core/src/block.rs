//! Blocks, headers and structural chain validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::to_canonical;
use crate::consensus::ValidatorSet;
use crate::crypto::{hash, Address, Hash, Keypair, Signature};
use crate::tx::{verify_tx_signature, SignedTransaction};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub chain_id: String,
    pub height: u64,
    pub parent_hash: Hash,
    pub timestamp: u64,
    pub tx_root: Hash,
    pub state_root: Hash,
    pub proposer: Address,
    pub signature: Signature,
}

#[derive(Serialize)]
struct HeaderBody<'a> {
    chain_id: &'a str,
    height: u64,
    parent_hash: &'a Hash,
    timestamp: u64,
    tx_root: &'a Hash,
    state_root: &'a Hash,
    proposer: &'a Address,
}

impl BlockHeader {
    /// Digest signed by the proposer; covers every field except the signature.
    pub fn digest(&self) -> Hash {
        let body = HeaderBody {
            chain_id: &self.chain_id,
            height: self.height,
            parent_hash: &self.parent_hash,
            timestamp: self.timestamp,
            tx_root: &self.tx_root,
            state_root: &self.state_root,
            proposer: &self.proposer,
        };
        hash(&to_canonical(&body).expect("header is encodable"))
    }

    pub fn hash(&self) -> Hash {
        hash(&to_canonical(self).expect("header is encodable"))
    }

    pub fn sign(&mut self, key: &Keypair) {
        self.signature = key.sign(&self.digest().0);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<SignedTransaction>,
}

impl Block {
    pub fn hash(&self) -> Hash {
        self.header.hash()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }
}

pub fn compute_tx_root(txs: &[SignedTransaction]) -> Hash {
    let hashes: Vec<Hash> = txs.iter().map(SignedTransaction::hash).collect();
    hash(&to_canonical(&hashes).expect("hash list is encodable"))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockError {
    #[error("height {got}, expected {expected}")]
    BadHeight { expected: u64, got: u64 },
    #[error("parent hash does not match parent block")]
    BadParent,
    #[error("chain id {0:?} does not match")]
    BadChainId(String),
    #[error("tx root does not match transactions")]
    BadTxRoot,
    #[error("transaction {index} has an invalid signature")]
    BadTxSig { index: usize },
    #[error("proposer signature invalid or proposer key unknown")]
    BadProposerSig,
}

/// Checks everything about `block` that follows from its bytes and its parent
/// alone: linkage, commitments and signatures.
pub fn validate_block_structure(block: &Block, parent: &Block, validators: &ValidatorSet) -> Result<(), BlockError> {
    let h = &block.header;
    if h.height != parent.header.height + 1 {
        return Err(BlockError::BadHeight { expected: parent.header.height + 1, got: h.height });
    }
    if h.parent_hash != parent.hash() {
        return Err(BlockError::BadParent);
    }
    if h.chain_id != parent.header.chain_id {
        return Err(BlockError::BadChainId(h.chain_id.clone()));
    }
    if h.tx_root != compute_tx_root(&block.transactions) {
        return Err(BlockError::BadTxRoot);
    }
    if let Some(index) = block.transactions.iter().position(|tx| !verify_tx_signature(tx)) {
        return Err(BlockError::BadTxSig { index });
    }
    let key = validators.key_of(&h.proposer).ok_or(BlockError::BadProposerSig)?;
    if !key.verify(&h.digest().0, &h.signature) {
        return Err(BlockError::BadProposerSig);
    }
    Ok(())
}
