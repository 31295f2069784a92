//! The campus application state and its transition rules.

mod apply;
pub mod econ;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::codec::canonical_encode;
use crate::content::Cid;
use crate::crypto::{hash, Address, Hash, PublicKey};
use crate::tx::{Direction, Role};

pub use apply::{apply_block, ApplyBlockError};
pub use econ::{
    age_decay, redeem_split, staff_multiplier, vote_delta, voter_weight, EconParams, EconParamsError,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub address: Address,
    pub pubkey: PublicKey,
    pub username: String,
    /// Academic staff identifier, empty for students.
    pub staff_id: String,
    pub role: Role,
    pub nonce: u64,
    pub bateekh: u64,
    pub earned_lifetime: u64,
    pub tofu: u64,
    pub active: bool,
    pub communities: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostKind {
    Question,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: Hash,
    pub kind: PostKind,
    pub author: Address,
    /// Community of the question (for answers, of the parent question).
    pub community: String,
    /// Parent question; `None` for questions.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parent: Option<Hash>,
    pub title: String,
    pub body_cid: Cid,
    pub created_height: u64,
    pub up: u64,
    pub down: u64,
    pub ratings: BTreeMap<Address, u8>,
    pub awards: u64,
    pub hidden: bool,
}

impl Post {
    /// Feed ordering score; callers break ties by newer `created_height`.
    pub fn rank_score(&self) -> i64 {
        let stars: i64 = self.ratings.values().map(|&s| s as i64).sum();
        10 * (self.up as i64 - self.down as i64) + 20 * stars
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Community {
    pub id: String,
    pub name: String,
    pub creator: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Service {
    pub id: String,
    pub name: String,
    pub price: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub rewards_pool: u64,
    pub treasury: u64,
    pub dev_fund: u64,
    pub burned: u64,
}

/// Account seeded directly by the genesis file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapAccount {
    pub address: Address,
    pub pubkey: PublicKey,
    pub username: String,
    pub role: Role,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TxError {
    #[error("BadSignature")]
    BadSignature,
    #[error("BadNonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("Unauthorized")]
    Unauthorized,
    #[error("UnknownEntity: {0}")]
    UnknownEntity(String),
    #[error("AlreadyVoted")]
    AlreadyVoted,
    #[error("AlreadyRated")]
    AlreadyRated,
    #[error("AlreadyMember")]
    AlreadyMember,
    #[error("SelfVote")]
    SelfVote,
    #[error("InsufficientTofu: have {have}, need {need}")]
    InsufficientTofu { have: u64, need: u64 },
    #[error("HiddenContent")]
    HiddenContent,
    #[error("InactiveAccount: {0}")]
    InactiveAccount(Address),
    #[error("AlreadyExists: {0}")]
    AlreadyExists(String),
    #[error("WrongChain: {0}")]
    WrongChain(String),
    #[error("InvalidPayload: {0}")]
    InvalidPayload(String),
}

impl TxError {
    /// Stable machine-readable code, echoed verbatim by the API and CLI.
    pub fn code(&self) -> &'static str {
        match self {
            TxError::BadSignature => "BadSignature",
            TxError::BadNonce { .. } => "BadNonce",
            TxError::Unauthorized => "Unauthorized",
            TxError::UnknownEntity(_) => "UnknownEntity",
            TxError::AlreadyVoted => "AlreadyVoted",
            TxError::AlreadyRated => "AlreadyRated",
            TxError::AlreadyMember => "AlreadyMember",
            TxError::SelfVote => "SelfVote",
            TxError::InsufficientTofu { .. } => "InsufficientTofu",
            TxError::HiddenContent => "HiddenContent",
            TxError::InactiveAccount(_) => "InactiveAccount",
            TxError::AlreadyExists(_) => "AlreadyExists",
            TxError::WrongChain(_) => "WrongChain",
            TxError::InvalidPayload(_) => "InvalidPayload",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum Event {
    AccountRegistered { address: Address, role: Role, cosigner: Address },
    RoleChanged { target: Address, role: Role },
    CommunityCreated { id: String },
    CommunityJoined { id: String, member: Address },
    PostCreated { id: Hash, kind: PostKind, author: Address },
    Voted { voter: Address, post_id: Hash, direction: Direction },
    Rated { rater: Address, post_id: Hash, stars: u8 },
    BateekhCredited { to: Address, amount: u64 },
    BateekhDebited { from: Address, amount: u64 },
    TofuMinted { to: Address, amount: u64 },
    AwardGiven { from: Address, to: Address, post_id: Hash, amount: u64, burned: u64 },
    TofuTransferred { from: Address, to: Address, amount: u64 },
    ServiceCreated { id: String, price: u64 },
    Redeemed { by: Address, service_id: String, price: u64, burned: u64, to_treasury: u64 },
    Flagged { post_id: Hash, by: Address, reason: String },
    Deactivated { target: Address, burned: u64 },
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub height: u64,
    pub tx_hash: Hash,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub chain_id: String,
    pub econ: EconParams,
    pub accounts: BTreeMap<Address, Account>,
    pub communities: BTreeMap<String, Community>,
    pub posts: BTreeMap<Hash, Post>,
    /// One entry per (voter, post); the value is the direction cast.
    pub votes: BTreeMap<(Address, Hash), Direction>,
    pub services: BTreeMap<String, Service>,
    pub ledger: TokenLedger,
    pub height_applied: u64,
}

impl WorldState {
    pub fn genesis(
        chain_id: &str,
        econ: EconParams,
        bootstrap: &[BootstrapAccount],
        services: &[Service],
    ) -> Result<Self, EconParamsError> {
        econ.validate()?;
        let accounts = bootstrap
            .iter()
            .map(|b| {
                let account = Account {
                    address: b.address,
                    pubkey: b.pubkey,
                    username: b.username.clone(),
                    staff_id: String::new(),
                    role: b.role,
                    nonce: 0,
                    bateekh: econ.initial_bateekh,
                    earned_lifetime: 0,
                    tofu: 0,
                    active: true,
                    communities: BTreeSet::new(),
                };
                (b.address, account)
            })
            .collect();
        Ok(WorldState {
            chain_id: chain_id.to_owned(),
            econ,
            accounts,
            communities: BTreeMap::new(),
            posts: BTreeMap::new(),
            votes: BTreeMap::new(),
            services: services.iter().map(|s| (s.id.clone(), s.clone())).collect(),
            ledger: TokenLedger {
                rewards_pool: econ.rewards_pool,
                treasury: econ.treasury,
                dev_fund: econ.dev_fund,
                burned: 0,
            },
            height_applied: 0,
        })
    }

    /// Sum of every Tofu bucket plus all balances; equals `max_supply` in any
    /// reachable state.
    pub fn tofu_total(&self) -> u64 {
        let l = &self.ledger;
        l.rewards_pool + l.treasury + l.dev_fund + l.burned + self.accounts.values().map(|a| a.tofu).sum::<u64>()
    }

    pub fn account(&self, addr: &Address) -> Option<&Account> {
        self.accounts.get(addr)
    }

    pub fn answers_of(&self, question: &Hash) -> impl Iterator<Item = &Post> + '_ {
        let question = *question;
        self.posts.values().filter(move |p| p.parent == Some(question))
    }

    /// Hash of the canonical rendering with every map flattened to a key-sorted list.
    pub fn state_root(&self) -> Hash {
        let posts: Vec<_> = self
            .posts
            .values()
            .map(|p| {
                let ratings: Vec<_> = p.ratings.iter().map(|(r, s)| json!({"rater": r, "stars": s})).collect();
                json!({
                    "id": p.id,
                    "kind": p.kind,
                    "author": p.author,
                    "community": p.community,
                    "parent": p.parent.map(|h| h.to_string()).unwrap_or_default(),
                    "title": p.title,
                    "body_cid": p.body_cid,
                    "created_height": p.created_height,
                    "up": p.up,
                    "down": p.down,
                    "ratings": ratings,
                    "awards": p.awards,
                    "hidden": p.hidden,
                })
            })
            .collect();
        let votes: Vec<_> = self
            .votes
            .iter()
            .map(|((voter, post), dir)| json!({"voter": voter, "post_id": post, "direction": dir}))
            .collect();
        let view = json!({
            "chain_id": self.chain_id,
            "econ": self.econ,
            "accounts": self.accounts.values().collect::<Vec<_>>(),
            "communities": self.communities.values().collect::<Vec<_>>(),
            "posts": posts,
            "votes": votes,
            "services": self.services.values().collect::<Vec<_>>(),
            "ledger": self.ledger,
            "height_applied": self.height_applied,
        });
        hash(&canonical_encode(&view).expect("state is encodable"))
    }
}

/// Free-function form of [`Post::rank_score`].
pub fn rank_score(post: &Post) -> i64 {
    post.rank_score()
}
