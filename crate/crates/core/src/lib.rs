//! Core of a permissioned campus Q&A chain: canonical encoding, blocks,
//! proof-of-authority consensus, the reputation/token state machine, a
//! content-addressed blob store, full nodes and a deterministic network
//! simulator.

pub mod block;
pub mod chain;
pub mod codec;
pub mod consensus;
pub mod content;
pub mod crypto;
pub mod genesis;
pub mod node;
pub mod sim;
pub mod state;
pub mod tx;

pub use block::{compute_tx_root, validate_block_structure, Block, BlockError, BlockHeader};
pub use chain::{verify_chain, ChainError};
pub use codec::{canonical_encode, decode_canonical, to_canonical, CodecError};
pub use consensus::{
    block_weight, chain_score, fork_choice, min_timestamp, proposer_offset, verify_block_consensus, ChainTip,
    ConsensusError, ConsensusParams, Validator, ValidatorSet,
};
pub use content::{Cid, ContentStore};
pub use crypto::{derive_address, hash, Address, Hash, KeyFile, Keypair, PublicKey, Signature};
pub use genesis::{GenesisError, GenesisFile};
pub use node::{Import, NetMessage, Node, NodeEvent, NodeView, Outbound, PeerId, SubmitError};
pub use sim::{run_simulation, SimConfig, SimResult};
pub use state::{apply_block, rank_score, EconParams, Event, EventRecord, TxError, WorldState};
pub use tx::{sign_tx, verify_tx_signature, Direction, Role, SignedTransaction, TxPayload, UnsignedTransaction};
