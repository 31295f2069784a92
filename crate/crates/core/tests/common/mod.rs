#![allow(dead_code)]

use blockcampus_core::block::{compute_tx_root, Block, BlockHeader};
use blockcampus_core::sim::user_role;
use blockcampus_core::state::BootstrapAccount;
use blockcampus_core::{GenesisFile, Keypair, Signature, SignedTransaction, TxPayload, WorldState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CHAIN: &str = "blockcampus-test";

pub struct Fixture {
    pub genesis: GenesisFile,
    pub validators: Vec<Keypair>,
    pub owner: Keypair,
    pub admin: Keypair,
    pub users: Vec<Keypair>,
}

/// Genesis with `n_validators` validators and `n_users` bootstrapped users
/// whose roles follow `user_role`.
pub fn fixture(seed: u64, n_validators: usize, n_users: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let validators: Vec<Keypair> = (0..n_validators).map(|_| Keypair::generate(&mut rng)).collect();
    let owner = Keypair::generate(&mut rng);
    let admin = Keypair::generate(&mut rng);
    let users: Vec<Keypair> = (0..n_users).map(|_| Keypair::generate(&mut rng)).collect();
    let mut genesis = GenesisFile::with_defaults(CHAIN, &validators, &owner, &admin);
    genesis.bootstrap_accounts.extend(users.iter().enumerate().map(|(i, k)| BootstrapAccount {
        address: k.address(),
        pubkey: k.public(),
        username: format!("user{i}"),
        role: user_role(i),
    }));
    Fixture { genesis, validators, owner, admin, users }
}

impl Fixture {
    pub fn state(&self) -> WorldState {
        self.genesis.state().unwrap()
    }

    pub fn block0(&self) -> Block {
        self.genesis.block().unwrap()
    }

    pub fn rng(&self, seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }
}

/// Signs `payload` for `key` with its current nonce in `state`.
pub fn tx(state: &WorldState, key: &Keypair, payload: TxPayload) -> SignedTransaction {
    let nonce = state.account(&key.address()).map_or(0, |a| a.nonce);
    SignedTransaction::new(&state.chain_id, nonce, payload, key)
}

/// Executes `txs` on top of `parent_state` and seals the result.
pub fn seal(
    parent: &Block,
    parent_state: &WorldState,
    txs: Vec<SignedTransaction>,
    proposer: &Keypair,
    timestamp: u64,
) -> (Block, WorldState) {
    let height = parent.height() + 1;
    let mut state = parent_state.clone();
    for t in &txs {
        state.apply_transaction(t, height).expect("sealed transactions are valid");
    }
    state.height_applied = height;
    let mut header = BlockHeader {
        chain_id: parent.header.chain_id.clone(),
        height,
        parent_hash: parent.hash(),
        timestamp,
        tx_root: compute_tx_root(&txs),
        state_root: state.state_root(),
        proposer: proposer.address(),
        signature: Signature::ZERO,
    };
    header.sign(proposer);
    (Block { header, transactions: txs }, state)
}
