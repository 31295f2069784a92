//! Signed transactions and their kind-specific payloads.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::to_canonical;
use crate::content::Cid;
use crate::crypto::{hash, Address, Hash, Keypair, PublicKey, Signature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Student,
    TA,
    Professor,
    Admin,
    Owner,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Student, Role::TA, Role::Professor, Role::Admin, Role::Owner];

    pub fn is_staff(self) -> bool {
        matches!(self, Role::TA | Role::Professor)
    }

    pub fn is_admin(self) -> bool {
        matches!(self, Role::Admin | Role::Owner)
    }

    /// Roles this role may hand out through enrollment or `GrantRole`.
    pub fn can_assign(self, role: Role) -> bool {
        match self {
            Role::Owner => role != Role::Owner,
            Role::Admin => matches!(role, Role::Student | Role::TA | Role::Professor),
            _ => false,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// Admin or Owner approval of an account registration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdminCosig {
    pub admin_pubkey: PublicKey,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum TxPayload {
    RegisterUser { username: String, role: Role, staff_id: String, admin_cosig: AdminCosig },
    GrantRole { target: Address, role: Role },
    RevokeRole { target: Address },
    CreateCommunity { id: String, name: String },
    JoinCommunity { id: String },
    PostQuestion { community: String, title: String, cid: Cid },
    PostAnswer { question_id: Hash, cid: Cid },
    Vote { post_id: Hash, direction: Direction },
    StaffRate { post_id: Hash, stars: u8 },
    GiveAward { post_id: Hash },
    TransferTofu { to: Address, amount: u64 },
    CreateService { id: String, name: String, price: u64 },
    RedeemService { service_id: String },
    FlagContent { post_id: Hash, reason: String },
    DeactivateAccount { target: Address },
}

impl TxPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            TxPayload::RegisterUser { .. } => "RegisterUser",
            TxPayload::GrantRole { .. } => "GrantRole",
            TxPayload::RevokeRole { .. } => "RevokeRole",
            TxPayload::CreateCommunity { .. } => "CreateCommunity",
            TxPayload::JoinCommunity { .. } => "JoinCommunity",
            TxPayload::PostQuestion { .. } => "PostQuestion",
            TxPayload::PostAnswer { .. } => "PostAnswer",
            TxPayload::Vote { .. } => "Vote",
            TxPayload::StaffRate { .. } => "StaffRate",
            TxPayload::GiveAward { .. } => "GiveAward",
            TxPayload::TransferTofu { .. } => "TransferTofu",
            TxPayload::CreateService { .. } => "CreateService",
            TxPayload::RedeemService { .. } => "RedeemService",
            TxPayload::FlagContent { .. } => "FlagContent",
            TxPayload::DeactivateAccount { .. } => "DeactivateAccount",
        }
    }
}

/// Digest an admin signs to approve a registration.
pub fn registration_digest(chain_id: &str, pubkey: &PublicKey, username: &str, role: Role, staff_id: &str) -> Hash {
    #[derive(Serialize)]
    struct Registration<'a> {
        purpose: &'static str,
        chain_id: &'a str,
        pubkey: &'a PublicKey,
        username: &'a str,
        role: Role,
        staff_id: &'a str,
    }
    let reg = Registration { purpose: "registration", chain_id, pubkey, username, role, staff_id };
    hash(&to_canonical(&reg).expect("registration is encodable"))
}

pub fn cosign_registration(
    admin: &Keypair,
    chain_id: &str,
    pubkey: &PublicKey,
    username: &str,
    role: Role,
    staff_id: &str,
) -> AdminCosig {
    let digest = registration_digest(chain_id, pubkey, username, role, staff_id);
    AdminCosig { admin_pubkey: admin.public(), signature: admin.sign(&digest.0) }
}

/// A transaction envelope before signing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsignedTransaction {
    pub chain_id: String,
    pub nonce: u64,
    pub sender_pubkey: PublicKey,
    #[serde(flatten)]
    pub payload: TxPayload,
}

impl UnsignedTransaction {
    pub fn signing_digest(&self) -> Hash {
        hash(&to_canonical(self).expect("transactions are encodable"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedTransaction {
    pub chain_id: String,
    pub nonce: u64,
    pub sender_pubkey: PublicKey,
    #[serde(flatten)]
    pub payload: TxPayload,
    pub signature: Signature,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("signing key does not match sender_pubkey")]
pub struct KeyMismatch;

pub fn sign_tx(unsigned: UnsignedTransaction, secret: &Keypair) -> Result<SignedTransaction, KeyMismatch> {
    if secret.public() != unsigned.sender_pubkey {
        return Err(KeyMismatch);
    }
    let signature = secret.sign(&unsigned.signing_digest().0);
    let UnsignedTransaction { chain_id, nonce, sender_pubkey, payload } = unsigned;
    Ok(SignedTransaction { chain_id, nonce, sender_pubkey, payload, signature })
}

pub fn verify_tx_signature(tx: &SignedTransaction) -> bool {
    tx.sender_pubkey.verify(&tx.unsigned().signing_digest().0, &tx.signature)
}

impl SignedTransaction {
    /// Builds and signs in one step with the keypair as sender.
    pub fn new(chain_id: &str, nonce: u64, payload: TxPayload, key: &Keypair) -> Self {
        let unsigned = UnsignedTransaction { chain_id: chain_id.to_owned(), nonce, sender_pubkey: key.public(), payload };
        sign_tx(unsigned, key).expect("sender is the signing key")
    }

    pub fn unsigned(&self) -> UnsignedTransaction {
        UnsignedTransaction {
            chain_id: self.chain_id.clone(),
            nonce: self.nonce,
            sender_pubkey: self.sender_pubkey,
            payload: self.payload.clone(),
        }
    }

    pub fn sender(&self) -> Address {
        self.sender_pubkey.address()
    }

    /// Hash of the full signed envelope; also the id of any post it creates.
    pub fn hash(&self) -> Hash {
        hash(&to_canonical(self).expect("transactions are encodable"))
    }
}
