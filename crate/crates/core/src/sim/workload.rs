//! Random forum activity that is valid against a given state by construction.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::content::Cid;
use crate::crypto::{Address, Hash, Keypair};
use crate::state::{PostKind, WorldState};
use crate::tx::{Direction, Role, SignedTransaction, TxPayload};

/// Role given to the `i`-th workload user.
pub fn user_role(i: usize) -> Role {
    match i % 6 {
        1 => Role::Professor,
        2 => Role::TA,
        _ => Role::Student,
    }
}

pub struct WorkloadGen {
    chain_id: String,
    users: Vec<Keypair>,
    rng: ChaCha8Rng,
    /// Also emit transactions that the state machine must reject.
    pub destructive: bool,
}

impl WorkloadGen {
    pub fn new(chain_id: &str, users: Vec<Keypair>, rng: ChaCha8Rng) -> Self {
        WorkloadGen { chain_id: chain_id.to_owned(), users, rng, destructive: false }
    }

    pub fn users(&self) -> &[Keypair] {
        &self.users
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// A transaction from a random active user, signed with that user's
    /// current nonce in `state`.
    pub fn next(&mut self, state: &WorldState) -> Option<SignedTransaction> {
        let mut order: Vec<usize> = (0..self.users.len()).collect();
        order.shuffle(&mut self.rng);
        for i in order {
            let user = self.users[i].clone();
            let Some(account) = state.account(&user.address()).filter(|a| a.active) else { continue };
            let nonce = account.nonce;
            let payload = if self.destructive && self.rng.gen_ratio(1, 5) {
                self.invalid_payload(state, &user)
            } else {
                self.valid_payload(state, &user)
            };
            if let Some(payload) = payload {
                return Some(SignedTransaction::new(&self.chain_id, nonce, payload, &user));
            }
        }
        None
    }

    fn valid_payload(&mut self, state: &WorldState, user: &Keypair) -> Option<TxPayload> {
        let me = user.address();
        let account = state.account(&me)?;
        let rng = &mut self.rng;
        let mut options: Vec<TxPayload> = Vec::new();

        if account.role.is_staff() && (state.communities.len() < 4 || rng.gen_ratio(1, 20)) {
            let id = format!("c{:08x}", rng.gen::<u32>());
            if !state.communities.contains_key(&id) {
                options.push(TxPayload::CreateCommunity { name: format!("Course {id}"), id });
            }
        }
        let joinable: Vec<&String> = state.communities.keys().filter(|c| !account.communities.contains(*c)).collect();
        if let Some(id) = joinable.choose(rng) {
            options.push(TxPayload::JoinCommunity { id: (*id).clone() });
        }
        let joined: Vec<&String> = account.communities.iter().collect();
        if let Some(community) = joined.choose(rng) {
            let n = rng.gen::<u32>();
            options.push(TxPayload::PostQuestion {
                community: (*community).clone(),
                title: format!("Question {n:08x}"),
                cid: Cid::of(format!("question body {n}").as_bytes()),
            });
        }

        let visible: Vec<(&Hash, PostKind, Address)> = state
            .posts
            .values()
            .filter(|p| !p.hidden && state.account(&p.author).is_some_and(|a| a.active))
            .map(|p| (&p.id, p.kind, p.author))
            .collect();
        let questions: Vec<&Hash> = visible.iter().filter(|p| p.1 == PostKind::Question).map(|p| p.0).collect();
        if let Some(q) = questions.choose(rng) {
            let n = rng.gen::<u32>();
            options.push(TxPayload::PostAnswer { question_id: **q, cid: Cid::of(format!("answer body {n}").as_bytes()) });
        }
        let votable: Vec<&Hash> =
            visible.iter().filter(|p| p.2 != me && !state.votes.contains_key(&(me, *p.0))).map(|p| p.0).collect();
        if let Some(post_id) = votable.choose(rng) {
            let direction = if rng.gen_ratio(1, 5) { Direction::Down } else { Direction::Up };
            options.push(TxPayload::Vote { post_id: **post_id, direction });
        }
        if account.role.is_staff() {
            let ratable: Vec<&Hash> = visible
                .iter()
                .filter(|p| p.1 == PostKind::Answer && p.2 != me && !state.posts[p.0].ratings.contains_key(&me))
                .map(|p| p.0)
                .collect();
            if let Some(post_id) = ratable.choose(rng) {
                options.push(TxPayload::StaffRate { post_id: **post_id, stars: rng.gen_range(1..=5) });
            }
        }
        if account.tofu >= state.econ.award_cost {
            let others: Vec<&Hash> = visible.iter().filter(|p| p.2 != me).map(|p| p.0).collect();
            if let Some(post_id) = others.choose(rng) {
                options.push(TxPayload::GiveAward { post_id: **post_id });
            }
        }
        if account.tofu > 0 {
            let peers: Vec<Address> = self
                .users
                .iter()
                .map(Keypair::address)
                .filter(|a| *a != me && state.account(a).is_some_and(|x| x.active))
                .collect();
            if let Some(to) = peers.choose(rng) {
                options.push(TxPayload::TransferTofu { to: *to, amount: rng.gen_range(1..=account.tofu) });
            }
        }
        let affordable: Vec<&String> =
            state.services.values().filter(|s| s.price <= account.tofu).map(|s| &s.id).collect();
        if let Some(id) = affordable.choose(rng) {
            options.push(TxPayload::RedeemService { service_id: (*id).clone() });
        }
        options.choose(rng).cloned()
    }

    fn invalid_payload(&mut self, state: &WorldState, user: &Keypair) -> Option<TxPayload> {
        let me = user.address();
        let rng = &mut self.rng;
        let mut options = Vec::new();
        if let Some(own) = state.posts.values().filter(|p| p.author == me && !p.hidden).collect::<Vec<_>>().choose(rng)
        {
            options.push(TxPayload::Vote { post_id: own.id, direction: Direction::Up });
        }
        if let Some(((_, post_id), _)) =
            state.votes.iter().filter(|((v, _), _)| *v == me).collect::<Vec<_>>().choose(rng)
        {
            options.push(TxPayload::Vote { post_id: *post_id, direction: Direction::Up });
        }
        if !state.account(&me)?.role.is_admin() {
            options.push(TxPayload::CreateService { id: "s".into(), name: "nope".into(), price: 1 });
        }
        options.push(TxPayload::JoinCommunity { id: "no-such-community".into() });
        options.choose(rng).cloned()
    }
}
