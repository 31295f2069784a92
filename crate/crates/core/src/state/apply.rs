//! Transaction dispatch.
//!
//! Every handler runs all of its checks before touching state, so a rejected
//! transaction leaves [`WorldState`] exactly as it found it.

use thiserror::Error;

use super::econ::{age_decay, mint_crossings, redeem_split, staff_multiplier, vote_delta, voter_weight};
use super::{Account, Community, Event, EventRecord, Post, PostKind, Service, TxError, WorldState};
use crate::block::Block;
use crate::crypto::{Address, Hash};
use crate::tx::{registration_digest, verify_tx_signature, AdminCosig, Direction, Role, SignedTransaction, TxPayload};

const MAX_NAME_LEN: usize = 64;
const MAX_TITLE_LEN: usize = 200;
const MAX_REASON_LEN: usize = 500;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyBlockError {
    #[error("transaction {index} invalid: {error}")]
    InvalidTxInBlock { index: usize, error: TxError },
    #[error("state root mismatch: header {expected}, computed {computed}")]
    StateRootMismatch { expected: Hash, computed: Hash },
}

/// Applies every transaction of `block` to a copy of `state`; any failure
/// rejects the whole block.
pub fn apply_block(state: &WorldState, block: &Block) -> Result<(WorldState, Vec<EventRecord>), ApplyBlockError> {
    let mut next = state.clone();
    let mut log = Vec::new();
    for (index, tx) in block.transactions.iter().enumerate() {
        let events = next
            .apply_transaction(tx, block.height())
            .map_err(|error| ApplyBlockError::InvalidTxInBlock { index, error })?;
        let tx_hash = tx.hash();
        log.extend(events.into_iter().map(|event| EventRecord { height: block.height(), tx_hash, event }));
    }
    next.height_applied = block.height();
    let computed = next.state_root();
    if computed != block.header.state_root {
        return Err(ApplyBlockError::StateRootMismatch { expected: block.header.state_root, computed });
    }
    Ok((next, log))
}

fn check_len(field: &str, value: &str, max: usize) -> Result<(), TxError> {
    if value.is_empty() || value.len() > max {
        return Err(TxError::InvalidPayload(format!("{field} must be 1..={max} bytes")));
    }
    Ok(())
}

impl WorldState {
    /// Validates and applies one transaction at block `height`.
    pub fn apply_transaction(&mut self, tx: &SignedTransaction, height: u64) -> Result<Vec<Event>, TxError> {
        if tx.chain_id != self.chain_id {
            return Err(TxError::WrongChain(tx.chain_id.clone()));
        }
        if !verify_tx_signature(tx) {
            return Err(TxError::BadSignature);
        }
        let sender = tx.sender();

        if let TxPayload::RegisterUser { username, role, staff_id, admin_cosig } = &tx.payload {
            return self.register(tx, sender, username, *role, staff_id, admin_cosig);
        }

        let account = self.accounts.get(&sender).ok_or_else(|| TxError::UnknownEntity(sender.to_string()))?;
        if !account.active {
            return Err(TxError::InactiveAccount(sender));
        }
        if tx.nonce != account.nonce {
            return Err(TxError::BadNonce { expected: account.nonce, got: tx.nonce });
        }
        let role = account.role;
        let tx_hash = tx.hash();

        let events = match &tx.payload {
            TxPayload::RegisterUser { .. } => unreachable!("handled above"),
            TxPayload::GrantRole { target, role: new_role } => self.set_role(role, *target, *new_role, true)?,
            TxPayload::RevokeRole { target } => self.set_role(role, *target, Role::Student, false)?,
            TxPayload::CreateCommunity { id, name } => {
                if !(role.is_staff() || role.is_admin()) {
                    return Err(TxError::Unauthorized);
                }
                check_len("id", id, MAX_NAME_LEN)?;
                check_len("name", name, MAX_NAME_LEN)?;
                if self.communities.contains_key(id) {
                    return Err(TxError::AlreadyExists(id.clone()));
                }
                self.communities.insert(id.clone(), Community { id: id.clone(), name: name.clone(), creator: sender });
                vec![Event::CommunityCreated { id: id.clone() }]
            }
            TxPayload::JoinCommunity { id } => {
                if !self.communities.contains_key(id) {
                    return Err(TxError::UnknownEntity(id.clone()));
                }
                let account = self.accounts.get_mut(&sender).expect("checked");
                if !account.communities.insert(id.clone()) {
                    return Err(TxError::AlreadyMember);
                }
                vec![Event::CommunityJoined { id: id.clone(), member: sender }]
            }
            TxPayload::PostQuestion { community, title, cid } => {
                if !self.communities.contains_key(community) {
                    return Err(TxError::UnknownEntity(community.clone()));
                }
                if !self.accounts[&sender].communities.contains(community) {
                    return Err(TxError::Unauthorized);
                }
                check_len("title", title, MAX_TITLE_LEN)?;
                self.insert_post(Post {
                    id: tx_hash,
                    kind: PostKind::Question,
                    author: sender,
                    community: community.clone(),
                    parent: None,
                    title: title.clone(),
                    body_cid: *cid,
                    created_height: height,
                    up: 0,
                    down: 0,
                    ratings: Default::default(),
                    awards: 0,
                    hidden: false,
                })
            }
            TxPayload::PostAnswer { question_id, cid } => {
                let question = self.post(question_id)?;
                if question.kind != PostKind::Question {
                    return Err(TxError::InvalidPayload("answers must reference a question".into()));
                }
                if question.hidden {
                    return Err(TxError::HiddenContent);
                }
                let community = question.community.clone();
                self.insert_post(Post {
                    id: tx_hash,
                    kind: PostKind::Answer,
                    author: sender,
                    community,
                    parent: Some(*question_id),
                    title: String::new(),
                    body_cid: *cid,
                    created_height: height,
                    up: 0,
                    down: 0,
                    ratings: Default::default(),
                    awards: 0,
                    hidden: false,
                })
            }
            TxPayload::Vote { post_id, direction } => self.vote(sender, *post_id, *direction, height)?,
            TxPayload::StaffRate { post_id, stars } => {
                if !role.is_staff() {
                    return Err(TxError::Unauthorized);
                }
                let post = self.post(post_id)?;
                if post.kind != PostKind::Answer {
                    return Err(TxError::InvalidPayload("only answers can be rated".into()));
                }
                if post.hidden {
                    return Err(TxError::HiddenContent);
                }
                if !(1..=5).contains(stars) {
                    return Err(TxError::InvalidPayload("stars must be 1..=5".into()));
                }
                if post.author == sender {
                    return Err(TxError::SelfVote);
                }
                if post.ratings.contains_key(&sender) {
                    return Err(TxError::AlreadyRated);
                }
                let author = post.author;
                let mut events = self.credit_bateekh(author, self.econ.rate_grant * *stars as u64)?;
                self.posts.get_mut(post_id).expect("checked").ratings.insert(sender, *stars);
                events.insert(0, Event::Rated { rater: sender, post_id: *post_id, stars: *stars });
                events
            }
            TxPayload::GiveAward { post_id } => {
                let post = self.post(post_id)?;
                if post.hidden {
                    return Err(TxError::HiddenContent);
                }
                if post.author == sender {
                    return Err(TxError::SelfVote);
                }
                let author = post.author;
                self.require_active(&author)?;
                let have = self.accounts[&sender].tofu;
                let p = self.econ;
                if have < p.award_cost {
                    return Err(TxError::InsufficientTofu { have, need: p.award_cost });
                }
                self.accounts.get_mut(&sender).expect("checked").tofu -= p.award_cost;
                self.accounts.get_mut(&author).expect("checked").tofu += p.award_to_recipient;
                self.ledger.burned += p.award_burn;
                self.posts.get_mut(post_id).expect("checked").awards += 1;
                let mut events = vec![Event::AwardGiven {
                    from: sender,
                    to: author,
                    post_id: *post_id,
                    amount: p.award_to_recipient,
                    burned: p.award_burn,
                }];
                events.extend(self.credit_bateekh(author, p.award_bateekh).expect("recipient checked active"));
                events
            }
            TxPayload::TransferTofu { to, amount } => {
                if *amount == 0 {
                    return Err(TxError::InvalidPayload("amount must be positive".into()));
                }
                self.require_active(to)?;
                let have = self.accounts[&sender].tofu;
                if have < *amount {
                    return Err(TxError::InsufficientTofu { have, need: *amount });
                }
                self.accounts.get_mut(&sender).expect("checked").tofu -= amount;
                self.accounts.get_mut(to).expect("checked").tofu += amount;
                vec![Event::TofuTransferred { from: sender, to: *to, amount: *amount }]
            }
            TxPayload::CreateService { id, name, price } => {
                if !role.is_admin() {
                    return Err(TxError::Unauthorized);
                }
                check_len("id", id, MAX_NAME_LEN)?;
                check_len("name", name, MAX_NAME_LEN)?;
                if *price == 0 {
                    return Err(TxError::InvalidPayload("price must be positive".into()));
                }
                if self.services.contains_key(id) {
                    return Err(TxError::AlreadyExists(id.clone()));
                }
                self.services.insert(id.clone(), Service { id: id.clone(), name: name.clone(), price: *price });
                vec![Event::ServiceCreated { id: id.clone(), price: *price }]
            }
            TxPayload::RedeemService { service_id } => {
                let price =
                    self.services.get(service_id).ok_or_else(|| TxError::UnknownEntity(service_id.clone()))?.price;
                let have = self.accounts[&sender].tofu;
                if have < price {
                    return Err(TxError::InsufficientTofu { have, need: price });
                }
                let (burned, to_treasury) = redeem_split(price);
                self.accounts.get_mut(&sender).expect("checked").tofu -= price;
                self.ledger.burned += burned;
                self.ledger.treasury += to_treasury;
                vec![Event::Redeemed { by: sender, service_id: service_id.clone(), price, burned, to_treasury }]
            }
            TxPayload::FlagContent { post_id, reason } => {
                if !role.is_admin() {
                    return Err(TxError::Unauthorized);
                }
                check_len("reason", reason, MAX_REASON_LEN)?;
                let post = self.post(post_id)?;
                if post.hidden {
                    return Err(TxError::HiddenContent);
                }
                let author = post.author;
                self.posts.get_mut(post_id).expect("checked").hidden = true;
                let mut events = vec![Event::Flagged { post_id: *post_id, by: sender, reason: reason.clone() }];
                events.extend(self.debit_bateekh(author, self.econ.flag_penalty));
                events
            }
            TxPayload::DeactivateAccount { target } => {
                if *target != sender && !(role.is_admin() && role.can_assign(self.account_role(target)?)) {
                    return Err(TxError::Unauthorized);
                }
                self.require_active(target)?;
                let account = self.accounts.get_mut(target).expect("checked");
                let burned = std::mem::take(&mut account.tofu);
                account.active = false;
                self.ledger.burned += burned;
                vec![Event::Deactivated { target: *target, burned }]
            }
        };

        self.accounts.get_mut(&sender).expect("sender exists").nonce += 1;
        Ok(events)
    }

    /// Adds `delta` to the recipient's balance and lifetime earnings, minting
    /// Tofu from the rewards pool for every threshold crossed.
    pub fn credit_bateekh(&mut self, recipient: Address, delta: u64) -> Result<Vec<Event>, TxError> {
        self.require_active(&recipient)?;
        if delta == 0 {
            return Ok(vec![]);
        }
        let p = self.econ;
        let pool = self.ledger.rewards_pool;
        let account = self.accounts.get_mut(&recipient).expect("checked");
        let before = account.earned_lifetime;
        account.bateekh += delta;
        account.earned_lifetime += delta;
        let mint = (mint_crossings(before, account.earned_lifetime, &p) * p.mint_amount).min(pool);
        account.tofu += mint;
        self.ledger.rewards_pool -= mint;
        let mut events = vec![Event::BateekhCredited { to: recipient, amount: delta }];
        if mint > 0 {
            events.push(Event::TofuMinted { to: recipient, amount: mint });
        }
        Ok(events)
    }

    /// Subtracts up to `delta`, flooring the balance at zero. Lifetime
    /// earnings are untouched.
    pub fn debit_bateekh(&mut self, target: Address, delta: u64) -> Vec<Event> {
        let Some(account) = self.accounts.get_mut(&target) else { return vec![] };
        let taken = account.bateekh.min(delta);
        account.bateekh -= taken;
        if taken == 0 {
            return vec![];
        }
        vec![Event::BateekhDebited { from: target, amount: taken }]
    }

    fn register(
        &mut self,
        tx: &SignedTransaction,
        sender: Address,
        username: &str,
        role: Role,
        staff_id: &str,
        cosig: &AdminCosig,
    ) -> Result<Vec<Event>, TxError> {
        if self.accounts.contains_key(&sender) {
            return Err(TxError::AlreadyExists(sender.to_string()));
        }
        if tx.nonce != 0 {
            return Err(TxError::BadNonce { expected: 0, got: tx.nonce });
        }
        let cosigner = cosig.admin_pubkey.address();
        let admin = self.accounts.get(&cosigner).ok_or(TxError::Unauthorized)?;
        if !admin.active || admin.pubkey != cosig.admin_pubkey || !admin.role.can_assign(role) {
            return Err(TxError::Unauthorized);
        }
        let digest = registration_digest(&self.chain_id, &tx.sender_pubkey, username, role, staff_id);
        if !cosig.admin_pubkey.verify(&digest.0, &cosig.signature) {
            return Err(TxError::Unauthorized);
        }
        check_len("username", username, MAX_NAME_LEN)?;
        if role != Role::Student {
            check_len("staff_id", staff_id, MAX_NAME_LEN)?;
        }
        self.accounts.insert(
            sender,
            Account {
                address: sender,
                pubkey: tx.sender_pubkey,
                username: username.to_owned(),
                staff_id: staff_id.to_owned(),
                role,
                nonce: 1,
                bateekh: self.econ.initial_bateekh,
                earned_lifetime: 0,
                tofu: 0,
                active: true,
                communities: Default::default(),
            },
        );
        Ok(vec![Event::AccountRegistered { address: sender, role, cosigner }])
    }

    fn set_role(&mut self, granter: Role, target: Address, role: Role, grant: bool) -> Result<Vec<Event>, TxError> {
        let current = self.account_role(&target)?;
        if (grant && !granter.can_assign(role)) || !granter.can_assign(current) {
            return Err(TxError::Unauthorized);
        }
        self.require_active(&target)?;
        self.accounts.get_mut(&target).expect("checked").role = role;
        Ok(vec![Event::RoleChanged { target, role }])
    }

    fn vote(&mut self, voter: Address, post_id: Hash, direction: Direction, height: u64) -> Result<Vec<Event>, TxError> {
        let post = self.post(&post_id)?;
        if post.hidden {
            return Err(TxError::HiddenContent);
        }
        if post.author == voter {
            return Err(TxError::SelfVote);
        }
        if self.votes.contains_key(&(voter, post_id)) {
            return Err(TxError::AlreadyVoted);
        }
        let author = post.author;
        self.require_active(&author)?;
        let p = self.econ;
        let mut events = vec![Event::Voted { voter, post_id, direction }];
        match direction {
            Direction::Up => {
                let weight = voter_weight(self.accounts[&voter].bateekh, &p);
                let decay = age_decay(height.saturating_sub(post.created_height), &p);
                let staff = staff_multiplier(post.ratings.values().copied());
                let delta = vote_delta(p.base_up, weight, decay, staff);
                events.extend(self.credit_bateekh(author, delta)?);
                self.posts.get_mut(&post_id).expect("checked").up += 1;
            }
            Direction::Down => {
                events.extend(self.debit_bateekh(author, p.base_down));
                self.posts.get_mut(&post_id).expect("checked").down += 1;
            }
        }
        self.votes.insert((voter, post_id), direction);
        Ok(events)
    }

    fn insert_post(&mut self, post: Post) -> Vec<Event> {
        let event = Event::PostCreated { id: post.id, kind: post.kind, author: post.author };
        self.posts.insert(post.id, post);
        vec![event]
    }

    fn post(&self, id: &Hash) -> Result<&Post, TxError> {
        self.posts.get(id).ok_or_else(|| TxError::UnknownEntity(id.to_string()))
    }

    fn account_role(&self, addr: &Address) -> Result<Role, TxError> {
        self.accounts.get(addr).map(|a| a.role).ok_or_else(|| TxError::UnknownEntity(addr.to_string()))
    }

    fn require_active(&self, addr: &Address) -> Result<&Account, TxError> {
        let account = self.accounts.get(addr).ok_or_else(|| TxError::UnknownEntity(addr.to_string()))?;
        if !account.active {
            return Err(TxError::InactiveAccount(*addr));
        }
        Ok(account)
    }
}
