//! Full validation of a block sequence from genesis.

use thiserror::Error;

use crate::block::{validate_block_structure, Block};
use crate::consensus::verify_block_consensus;
use crate::genesis::{GenesisError, GenesisFile};
use crate::state::{apply_block, WorldState};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Genesis(#[from] GenesisError),
    #[error("block at position {position} (height {height}): {reason}")]
    Invalid { position: usize, height: u64, reason: String },
}

/// Checks linkage, signatures, consensus timing and state transitions of
/// `blocks`, which must start at height 1. Returns the final state.
pub fn verify_chain(genesis: &GenesisFile, blocks: &[Block]) -> Result<WorldState, ChainError> {
    let mut parent = genesis.block()?;
    let mut state = genesis.state()?;
    for (position, block) in blocks.iter().enumerate() {
        let fail = |reason: String| ChainError::Invalid { position, height: block.height(), reason };
        validate_block_structure(block, &parent, &genesis.validators).map_err(|e| fail(e.to_string()))?;
        verify_block_consensus(block, &parent, &genesis.validators, &genesis.consensus)
            .map_err(|e| fail(e.to_string()))?;
        state = apply_block(&state, block).map_err(|e| fail(e.to_string()))?.0;
        parent = block.clone();
    }
    Ok(state)
}
