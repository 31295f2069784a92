//! Genesis file: consortium, constants and bootstrap accounts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::{compute_tx_root, Block, BlockHeader};
use crate::codec::{to_canonical, CodecError};
use crate::consensus::{ConsensusError, ConsensusParams, Validator, ValidatorSet};
use crate::crypto::{Address, Hash, Keypair, Signature};
use crate::state::{BootstrapAccount, EconParams, EconParamsError, Service, WorldState};
use crate::tx::Role;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisFile {
    pub chain_id: String,
    /// Timestamp of block 0, in seconds.
    pub genesis_time: u64,
    pub validators: ValidatorSet,
    pub consensus: ConsensusParams,
    pub econ: EconParams,
    pub bootstrap_accounts: Vec<BootstrapAccount>,
    pub services: Vec<Service>,
}

#[derive(Debug, Error)]
pub enum GenesisError {
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Econ(#[from] EconParamsError),
    #[error("bootstrap accounts need at least one {0}")]
    MissingRole(Role),
    #[error("bootstrap account {0} does not match its key or is duplicated")]
    BadAccount(Address),
    #[error("service {0:?} is invalid or duplicated")]
    BadService(String),
    #[error("chain id must be non-empty")]
    EmptyChainId,
    #[error("malformed genesis file: {0}")]
    Malformed(String),
}

impl GenesisFile {
    /// Genesis with default constants.
    pub fn with_defaults(chain_id: &str, validators: &[Keypair], owner: &Keypair, admin: &Keypair) -> Self {
        let validators = ValidatorSet::new(validators.iter().map(|k| Validator::from_key(k.public())).collect())
            .expect("distinct validator keys");
        let boot = |k: &Keypair, name: &str, role| BootstrapAccount {
            address: k.address(),
            pubkey: k.public(),
            username: name.to_owned(),
            role,
        };
        GenesisFile {
            chain_id: chain_id.to_owned(),
            genesis_time: 0,
            validators,
            consensus: ConsensusParams::default(),
            econ: EconParams::default(),
            bootstrap_accounts: vec![boot(owner, "owner", Role::Owner), boot(admin, "admin", Role::Admin)],
            services: vec![],
        }
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        if self.chain_id.is_empty() {
            return Err(GenesisError::EmptyChainId);
        }
        self.consensus.validate()?;
        self.econ.validate()?;
        for (i, a) in self.bootstrap_accounts.iter().enumerate() {
            let dup = self.bootstrap_accounts[..i].iter().any(|b| b.address == a.address);
            if a.pubkey.address() != a.address || dup {
                return Err(GenesisError::BadAccount(a.address));
            }
        }
        for role in [Role::Owner, Role::Admin] {
            if !self.bootstrap_accounts.iter().any(|a| a.role == role) {
                return Err(GenesisError::MissingRole(role));
            }
        }
        for (i, s) in self.services.iter().enumerate() {
            if s.id.is_empty() || s.price == 0 || self.services[..i].iter().any(|t| t.id == s.id) {
                return Err(GenesisError::BadService(s.id.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, GenesisError> {
        let g: GenesisFile = serde_json::from_slice(bytes).map_err(|e| GenesisError::Malformed(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<Vec<u8>, CodecError> {
        to_canonical(self)
    }

    pub fn state(&self) -> Result<WorldState, GenesisError> {
        self.validate()?;
        Ok(WorldState::genesis(&self.chain_id, self.econ, &self.bootstrap_accounts, &self.services)?)
    }

    /// Block 0: unsigned, zero parent, committing to the genesis state.
    pub fn block(&self) -> Result<Block, GenesisError> {
        let state = self.state()?;
        Ok(Block {
            header: BlockHeader {
                chain_id: self.chain_id.clone(),
                height: 0,
                parent_hash: Hash::ZERO,
                timestamp: self.genesis_time,
                tx_root: compute_tx_root(&[]),
                state_root: state.state_root(),
                proposer: Address::ZERO,
                signature: Signature::ZERO,
            },
            transactions: vec![],
        })
    }
}
