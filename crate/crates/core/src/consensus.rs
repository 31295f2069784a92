//! Proof-of-authority scheduling and fork choice.
//!
//! Validators take turns in genesis order. The validator scheduled for a
//! height is "in turn" (offset 0); any other validator may still seal the
//! height, but only after waiting `wait_step` seconds per position it sits
//! behind the scheduled one. In-turn blocks weigh more than out-of-turn ones,
//! and the heaviest chain wins.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::Block;
use crate::crypto::{Address, Hash, PublicKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validator {
    pub address: Address,
    pub pubkey: PublicKey,
}

impl Validator {
    pub fn from_key(pubkey: PublicKey) -> Self {
        Validator { address: pubkey.address(), pubkey }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("{0} is not a validator")]
    NotAValidator(Address),
    #[error("timestamp {got} earlier than allowed {min}")]
    TooEarly { min: u64, got: u64 },
    #[error("validator set is empty")]
    EmptyValidatorSet,
    #[error("duplicate validator {0}")]
    DuplicateValidator(Address),
    #[error("validator address {0} does not match its key")]
    AddressMismatch(Address),
    #[error("invalid consensus params: {0}")]
    BadParams(&'static str),
    #[error("no candidate heads")]
    NoCandidates,
}

/// Consortium membership, fixed at genesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Validator>", into = "Vec<Validator>")]
pub struct ValidatorSet {
    validators: Vec<Validator>,
}

impl ValidatorSet {
    pub fn new(validators: Vec<Validator>) -> Result<Self, ConsensusError> {
        if validators.is_empty() {
            return Err(ConsensusError::EmptyValidatorSet);
        }
        for (i, v) in validators.iter().enumerate() {
            if v.pubkey.address() != v.address {
                return Err(ConsensusError::AddressMismatch(v.address));
            }
            if validators[..i].iter().any(|w| w.address == v.address) {
                return Err(ConsensusError::DuplicateValidator(v.address));
            }
        }
        Ok(ValidatorSet { validators })
    }

    pub fn len(&self) -> usize {
        self.validators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.validators.is_empty()
    }

    pub fn index_of(&self, addr: &Address) -> Option<usize> {
        self.validators.iter().position(|v| &v.address == addr)
    }

    pub fn key_of(&self, addr: &Address) -> Option<PublicKey> {
        self.validators.iter().find(|v| &v.address == addr).map(|v| v.pubkey)
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.index_of(addr).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Validator> {
        self.validators.iter()
    }

    /// The validator scheduled (offset 0) for `height`.
    pub fn in_turn(&self, height: u64) -> &Validator {
        &self.validators[(height % self.len() as u64) as usize]
    }
}

impl TryFrom<Vec<Validator>> for ValidatorSet {
    type Error = ConsensusError;

    fn try_from(v: Vec<Validator>) -> Result<Self, Self::Error> {
        ValidatorSet::new(v)
    }
}

impl From<ValidatorSet> for Vec<Validator> {
    fn from(v: ValidatorSet) -> Self {
        v.validators
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusParams {
    /// Seconds between a parent and an in-turn child.
    pub block_interval: u64,
    /// Extra seconds an out-of-turn validator waits per position.
    pub wait_step: u64,
    pub in_turn_weight: u64,
    pub out_turn_weight: u64,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams { block_interval: 5, wait_step: 2, in_turn_weight: 2, out_turn_weight: 1 }
    }
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.block_interval == 0 {
            return Err(ConsensusError::BadParams("block_interval must be positive"));
        }
        if self.wait_step == 0 {
            return Err(ConsensusError::BadParams("wait_step must be positive"));
        }
        if !(self.in_turn_weight > self.out_turn_weight && self.out_turn_weight > 0) {
            return Err(ConsensusError::BadParams("need in_turn_weight > out_turn_weight > 0"));
        }
        Ok(())
    }
}

/// How many positions `proposer` sits behind the scheduled validator at `height`.
pub fn proposer_offset(height: u64, proposer: &Address, vset: &ValidatorSet) -> Result<u64, ConsensusError> {
    let index = vset.index_of(proposer).ok_or(ConsensusError::NotAValidator(*proposer))? as i128;
    let n = vset.len() as i128;
    Ok((index - height as i128).rem_euclid(n) as u64)
}

pub fn min_timestamp(parent_ts: u64, offset: u64, params: &ConsensusParams) -> u64 {
    parent_ts + params.block_interval + offset * params.wait_step
}

/// Fork-choice weight of one block; genesis weighs nothing.
pub fn block_weight(block: &Block, vset: &ValidatorSet, params: &ConsensusParams) -> u64 {
    if block.height() == 0 {
        return 0;
    }
    match proposer_offset(block.height(), &block.header.proposer, vset) {
        Ok(0) => params.in_turn_weight,
        Ok(_) => params.out_turn_weight,
        Err(_) => 0,
    }
}

pub fn chain_score(chain: &[Block], vset: &ValidatorSet, params: &ConsensusParams) -> u64 {
    chain.iter().map(|b| block_weight(b, vset, params)).sum()
}

pub fn verify_block_consensus(
    block: &Block,
    parent: &Block,
    vset: &ValidatorSet,
    params: &ConsensusParams,
) -> Result<(), ConsensusError> {
    let offset = proposer_offset(block.height(), &block.header.proposer, vset)?;
    let min = min_timestamp(parent.header.timestamp, offset, params).max(parent.header.timestamp + 1);
    if block.header.timestamp < min {
        return Err(ConsensusError::TooEarly { min, got: block.header.timestamp });
    }
    Ok(())
}

/// A candidate head as seen by fork choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainTip {
    pub hash: Hash,
    pub height: u64,
    pub score: u64,
}

impl ChainTip {
    /// Preference order: higher score, then greater height, then the smaller
    /// head hash. `Greater` means preferred.
    pub fn preference(&self, other: &ChainTip) -> Ordering {
        self.score
            .cmp(&other.score)
            .then(self.height.cmp(&other.height))
            .then(other.hash.cmp(&self.hash))
    }
}

pub fn fork_choice(heads: &[ChainTip]) -> Result<ChainTip, ConsensusError> {
    heads.iter().copied().max_by(|a, b| a.preference(b)).ok_or(ConsensusError::NoCandidates)
}
