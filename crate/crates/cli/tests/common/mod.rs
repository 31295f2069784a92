#![allow(dead_code)]

use std::time::Duration;

use blockcampus_cli::{runtime, Client};
use blockcampus_core::state::BootstrapAccount;
use blockcampus_core::{
    ConsensusParams, ContentStore, EconParams, GenesisFile, Hash, Keypair, Node, Role, SignedTransaction, TxPayload,
    Validator, ValidatorSet,
};

pub const CHAIN: &str = "blockcampus-gw";
pub const WAIT: Duration = Duration::from_secs(20);

pub struct Keys {
    pub validator: Keypair,
    pub owner: Keypair,
    pub admin: Keypair,
    pub prof: Keypair,
    pub ta: Keypair,
    pub students: Vec<Keypair>,
}

pub fn keys() -> Keys {
    let k = |i: u8| Keypair::from_secret([i; 32]);
    Keys {
        validator: k(1),
        owner: k(2),
        admin: k(3),
        prof: k(4),
        ta: k(5),
        students: (10..16).map(k).collect(),
    }
}

pub fn genesis(keys: &Keys) -> GenesisFile {
    let boot = |k: &Keypair, name: &str, role| BootstrapAccount {
        address: k.address(),
        pubkey: k.public(),
        username: name.into(),
        role,
    };
    let mut accounts = vec![
        boot(&keys.owner, "owner", Role::Owner),
        boot(&keys.admin, "admin", Role::Admin),
        boot(&keys.prof, "prof", Role::Professor),
        boot(&keys.ta, "ta", Role::TA),
    ];
    accounts.extend(keys.students.iter().enumerate().map(|(i, k)| boot(k, &format!("student{i}"), Role::Student)));
    GenesisFile {
        chain_id: CHAIN.into(),
        genesis_time: runtime::wall_clock_ms() / 1000,
        validators: ValidatorSet::new(vec![Validator::from_key(keys.validator.public())]).unwrap(),
        consensus: ConsensusParams { block_interval: 1, wait_step: 1, ..ConsensusParams::default() },
        econ: EconParams::default(),
        bootstrap_accounts: accounts,
        services: vec![],
    }
}

/// A node with its gateway on an ephemeral port, driven by its own runtime.
pub struct Gateway {
    pub url: String,
    pub client: Client,
    _rt: tokio::runtime::Runtime,
}

pub fn start(genesis: GenesisFile, key: Option<Keypair>) -> Gateway {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let url = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let node = Node::new(genesis, key, ContentStore::in_memory()).unwrap();
        let (handle, _) = runtime::spawn(node, vec![], url.clone());
        tokio::spawn(blockcampus_cli::api::serve(handle, listener));
        url
    });
    Gateway { client: Client::new(&url), url, _rt: rt }
}

impl Gateway {
    /// Signs with the next free nonce and submits; returns (tx hash, nonce).
    pub fn send(&self, key: &Keypair, payload: TxPayload) -> (Hash, u64) {
        let nonce = self.client.next_nonce(&key.address()).unwrap();
        let tx = SignedTransaction::new(CHAIN, nonce, payload, key);
        (self.client.submit(&tx).unwrap(), nonce)
    }

    pub fn send_and_wait(&self, key: &Keypair, payload: TxPayload) -> Hash {
        let (h, nonce) = self.send(key, payload);
        self.client.wait_applied(&key.address(), nonce, WAIT).unwrap();
        h
    }
}
