//! Inputs shared by the benchmarks.

use blockcampus_core::sim::{user_role, WorkloadGen};
use blockcampus_core::state::BootstrapAccount;
use blockcampus_core::{
    compute_tx_root, Block, BlockHeader, GenesisFile, Hash, Keypair, Signature, SignedTransaction, WorldState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CHAIN: &str = "blockcampus-bench";

/// A state with `users` bootstrap accounts and `warmup` applied transactions,
/// plus a signed block carrying the next `block_txs` transactions.
pub struct Workload {
    pub genesis: GenesisFile,
    pub state: WorldState,
    pub block: Block,
}

pub fn workload(users: usize, warmup: usize, block_txs: usize) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let validator = Keypair::generate(&mut rng);
    let owner = Keypair::generate(&mut rng);
    let admin = Keypair::generate(&mut rng);
    let keys: Vec<Keypair> = (0..users).map(|_| Keypair::generate(&mut rng)).collect();
    let mut genesis = GenesisFile::with_defaults(CHAIN, std::slice::from_ref(&validator), &owner, &admin);
    genesis.bootstrap_accounts.extend(keys.iter().enumerate().map(|(i, k)| BootstrapAccount {
        address: k.address(),
        pubkey: k.public(),
        username: format!("user{i}"),
        role: user_role(i),
    }));
    let mut state = genesis.state().expect("valid genesis");
    let mut gen = WorkloadGen::new(CHAIN, keys, rng);
    let mut height = 1;
    let mut applied = 0;
    while applied < warmup {
        if let Some(tx) = gen.next(&state) {
            if state.apply_transaction(&tx, height).is_ok() {
                applied += 1;
            }
        }
        height += 1;
    }
    state.height_applied = height;
    let mut scratch = state.clone();
    let mut txs: Vec<SignedTransaction> = Vec::new();
    while txs.len() < block_txs {
        if let Some(tx) = gen.next(&scratch) {
            if scratch.apply_transaction(&tx, height + 1).is_ok() {
                txs.push(tx);
            }
        }
    }
    scratch.height_applied = height + 1;
    let mut header = BlockHeader {
        chain_id: CHAIN.into(),
        height: height + 1,
        parent_hash: Hash::ZERO,
        timestamp: 5 * (height + 1),
        tx_root: compute_tx_root(&txs),
        state_root: scratch.state_root(),
        proposer: validator.address(),
        signature: Signature::ZERO,
    };
    header.sign(&validator);
    Workload { genesis, state, block: Block { header, transactions: txs } }
}
