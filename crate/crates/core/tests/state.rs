mod common;

use blockcampus_core::block::{compute_tx_root, Block};
use blockcampus_core::sim::WorkloadGen;
use blockcampus_core::state::{ApplyBlockError, Event, PostKind};
use blockcampus_core::tx::cosign_registration;
use blockcampus_core::{
    apply_block, Address, Cid, Direction, Hash, Keypair, Role, SignedTransaction, TxError, TxPayload, WorldState,
};
use common::{fixture, seal, tx, Fixture, CHAIN};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// users[0] student, users[1] professor, users[2] TA, users[3..] students.
struct Scene {
    f: Fixture,
    s: WorldState,
    height: u64,
}

impl Scene {
    fn new() -> Self {
        let f = fixture(100, 1, 6);
        let s = f.state();
        Scene { f, s, height: 1 }
    }

    fn key(&self, i: usize) -> Keypair {
        self.f.users[i].clone()
    }

    fn addr(&self, i: usize) -> Address {
        self.f.users[i].address()
    }

    fn run(&mut self, key: &Keypair, payload: TxPayload) -> Result<Vec<Event>, TxError> {
        let t = tx(&self.s, key, payload);
        self.s.apply_transaction(&t, self.height)
    }

    fn ok(&mut self, key: &Keypair, payload: TxPayload) -> Hash {
        let t = tx(&self.s, key, payload);
        self.s.apply_transaction(&t, self.height).unwrap_or_else(|e| panic!("{e}"));
        t.hash()
    }

    /// Rejection must leave every byte of state alone.
    fn rejects(&mut self, key: &Keypair, payload: TxPayload) -> TxError {
        let root = self.s.state_root();
        let before = self.s.clone();
        let err = self.run(key, payload).unwrap_err();
        assert_eq!(self.s, before);
        assert_eq!(self.s.state_root(), root);
        err
    }

    /// Community "c" with a question by users[0] and an answer by users[3].
    fn with_thread(&mut self) -> (Hash, Hash) {
        let prof = self.key(1);
        self.ok(&prof, TxPayload::CreateCommunity { id: "c".into(), name: "Compilers".into() });
        let alice = self.key(0);
        self.ok(&alice, TxPayload::JoinCommunity { id: "c".into() });
        let q = self.ok(
            &alice,
            TxPayload::PostQuestion { community: "c".into(), title: "Why LR(1)?".into(), cid: Cid::of(b"q") },
        );
        let a = self.ok(&self.key(3), TxPayload::PostAnswer { question_id: q, cid: Cid::of(b"a") });
        (q, a)
    }

    fn bateekh(&self, i: usize) -> u64 {
        self.s.account(&self.addr(i)).unwrap().bateekh
    }

    fn give_tofu(&mut self, i: usize, amount: u64) {
        self.s.ledger.rewards_pool -= amount;
        self.s.accounts.get_mut(&self.addr(i)).unwrap().tofu += amount;
    }

    fn conserved(&self) -> bool {
        self.s.tofu_total() == self.s.econ.max_supply
    }
}

fn up(post_id: Hash) -> TxPayload {
    TxPayload::Vote { post_id, direction: Direction::Up }
}

#[test]
fn fresh_upvote_credits_base() {
    let mut sc = Scene::new();
    let (q, _) = sc.with_thread();
    let before = sc.bateekh(0);
    sc.ok(&sc.key(4), up(q));
    assert_eq!(sc.bateekh(0), before + 10_000);
    assert_eq!(sc.s.posts[&q].up, 1);
}

#[test]
fn staff_rating_grants_and_boosts_later_votes() {
    let mut sc = Scene::new();
    let (_, a) = sc.with_thread();
    let before = sc.bateekh(3);
    sc.ok(&sc.key(1), TxPayload::StaffRate { post_id: a, stars: 4 });
    assert_eq!(sc.bateekh(3), before + 20_000);
    sc.ok(&sc.key(4), up(a));
    assert_eq!(sc.bateekh(3), before + 20_000 + 14_000);
}

#[test]
fn weighted_decayed_vote_crosses_mint_threshold() {
    let mut sc = Scene::new();
    let (_, a) = sc.with_thread();
    sc.ok(&sc.key(2), TxPayload::StaffRate { post_id: a, stars: 4 });
    let author = sc.addr(3);
    sc.s.accounts.get_mut(&author).unwrap().earned_lifetime = 95_000;
    sc.s.accounts.get_mut(&sc.addr(4)).unwrap().bateekh = 51_000;
    let created = sc.s.posts[&a].created_height;
    sc.height = created + 5_000;
    let before = sc.s.account(&author).unwrap().bateekh;
    let pool = sc.s.ledger.rewards_pool;
    let events = sc.run(&sc.key(4), up(a)).unwrap();
    let acct = sc.s.account(&author).unwrap();
    assert_eq!(acct.bateekh, before + 13_125);
    assert_eq!(acct.earned_lifetime, 108_125);
    assert_eq!(acct.tofu, 10);
    assert_eq!(sc.s.ledger.rewards_pool, pool - 10);
    assert!(events.contains(&Event::TofuMinted { to: author, amount: 10 }));
    assert!(sc.conserved());
}

#[test]
fn partial_mint_drains_pool() {
    let mut sc = Scene::new();
    let (q, _) = sc.with_thread();
    let author = sc.addr(0);
    sc.s.accounts.get_mut(&author).unwrap().earned_lifetime = 95_000;
    let excess = sc.s.ledger.rewards_pool - 3;
    sc.s.ledger.rewards_pool = 3;
    sc.s.ledger.treasury += excess;
    sc.ok(&sc.key(4), up(q));
    assert_eq!(sc.s.account(&author).unwrap().tofu, 3);
    assert_eq!(sc.s.ledger.rewards_pool, 0);
    assert!(sc.conserved());
}

#[test]
fn credit_and_debit_edges() {
    let mut sc = Scene::new();
    let a = sc.addr(0);
    let before = sc.s.clone();
    assert_eq!(sc.s.credit_bateekh(a, 0).unwrap(), vec![]);
    assert_eq!(sc.s, before);
    assert!(sc.s.debit_bateekh(a, 0).is_empty());
    assert_eq!(sc.s, before);

    sc.s.accounts.get_mut(&a).unwrap().bateekh = 500;
    sc.s.debit_bateekh(a, 2_000);
    assert_eq!(sc.bateekh(0), 0);
    sc.s.accounts.get_mut(&a).unwrap().bateekh = 5_000;
    sc.s.debit_bateekh(a, 2_000);
    assert_eq!(sc.bateekh(0), 3_000);

    sc.ok(&sc.key(0), TxPayload::DeactivateAccount { target: a });
    assert_eq!(sc.s.credit_bateekh(a, 5), Err(TxError::InactiveAccount(a)));
}

#[test]
fn downvote_debits_and_floors() {
    let mut sc = Scene::new();
    let (q, _) = sc.with_thread();
    sc.ok(&sc.key(4), TxPayload::Vote { post_id: q, direction: Direction::Down });
    assert_eq!(sc.bateekh(0), 0);
    let lifetime = sc.s.account(&sc.addr(0)).unwrap().earned_lifetime;
    assert_eq!(lifetime, 0);
    assert_eq!(sc.s.posts[&q].down, 1);
}

#[test]
fn vote_rules() {
    let mut sc = Scene::new();
    let (q, _) = sc.with_thread();
    assert_eq!(sc.rejects(&sc.key(0), up(q)), TxError::SelfVote);
    sc.ok(&sc.key(4), up(q));
    assert_eq!(sc.rejects(&sc.key(4), up(q)), TxError::AlreadyVoted);
    let down = TxPayload::Vote { post_id: q, direction: Direction::Down };
    assert_eq!(sc.rejects(&sc.key(4), down), TxError::AlreadyVoted);
    assert!(matches!(sc.rejects(&sc.key(4), up(Hash::ZERO)), TxError::UnknownEntity(_)));
}

#[test]
fn rating_rules() {
    let mut sc = Scene::new();
    let (q, a) = sc.with_thread();
    let rate = |post_id, stars| TxPayload::StaffRate { post_id, stars };
    assert_eq!(sc.rejects(&sc.key(0), rate(a, 3)), TxError::Unauthorized);
    assert_eq!(sc.rejects(&sc.f.admin.clone(), rate(a, 3)), TxError::Unauthorized);
    assert!(matches!(sc.rejects(&sc.key(1), rate(q, 3)), TxError::InvalidPayload(_)));
    assert!(matches!(sc.rejects(&sc.key(1), rate(a, 0)), TxError::InvalidPayload(_)));
    assert!(matches!(sc.rejects(&sc.key(1), rate(a, 6)), TxError::InvalidPayload(_)));
    sc.ok(&sc.key(1), rate(a, 5));
    assert_eq!(sc.rejects(&sc.key(1), rate(a, 4)), TxError::AlreadyRated);
    sc.ok(&sc.key(2), rate(a, 1));
    assert_eq!(sc.s.posts[&a].ratings.len(), 2);
}

#[test]
fn community_rules() {
    let mut sc = Scene::new();
    let create = |id: &str| TxPayload::CreateCommunity { id: id.into(), name: "n".into() };
    assert_eq!(sc.rejects(&sc.key(0), create("x")), TxError::Unauthorized);
    sc.ok(&sc.key(2), create("x"));
    assert!(matches!(sc.rejects(&sc.f.admin.clone(), create("x")), TxError::AlreadyExists(_)));
    let join = TxPayload::JoinCommunity { id: "x".into() };
    sc.ok(&sc.key(0), join.clone());
    assert_eq!(sc.rejects(&sc.key(0), join), TxError::AlreadyMember);
    let post =
        TxPayload::PostQuestion { community: "x".into(), title: "t".into(), cid: Cid::of(b"") };
    assert_eq!(sc.rejects(&sc.key(4), post.clone()), TxError::Unauthorized);
    let id = sc.ok(&sc.key(0), post);
    let p = &sc.s.posts[&id];
    assert_eq!((p.kind, p.author, p.created_height), (PostKind::Question, sc.addr(0), 1));
}

#[test]
fn answers_need_visible_questions() {
    let mut sc = Scene::new();
    let (q, a) = sc.with_thread();
    let answer = |question_id| TxPayload::PostAnswer { question_id, cid: Cid::of(b"x") };
    assert!(matches!(sc.rejects(&sc.key(4), answer(a)), TxError::InvalidPayload(_)));
    sc.ok(&sc.f.admin.clone(), TxPayload::FlagContent { post_id: q, reason: "spam".into() });
    assert_eq!(sc.rejects(&sc.key(4), answer(q)), TxError::HiddenContent);
    assert_eq!(sc.s.answers_of(&q).count(), 1);
}

#[test]
fn flagging_hides_and_penalises() {
    let mut sc = Scene::new();
    let (_, a) = sc.with_thread();
    sc.ok(&sc.key(5), up(a));
    let flag = TxPayload::FlagContent { post_id: a, reason: "plagiarism".into() };
    assert_eq!(sc.rejects(&sc.key(1), flag.clone()), TxError::Unauthorized);
    let before = sc.bateekh(3);
    sc.ok(&sc.f.owner.clone(), flag.clone());
    assert!(sc.s.posts[&a].hidden);
    assert_eq!(sc.bateekh(3), before.saturating_sub(10_000));
    assert_eq!(sc.rejects(&sc.f.admin.clone(), flag), TxError::HiddenContent);
    assert_eq!(sc.rejects(&sc.key(4), up(a)), TxError::HiddenContent);
    assert_eq!(sc.rejects(&sc.key(1), TxPayload::StaffRate { post_id: a, stars: 2 }), TxError::HiddenContent);
    sc.give_tofu(4, 10);
    assert_eq!(sc.rejects(&sc.key(4), TxPayload::GiveAward { post_id: a }), TxError::HiddenContent);
}

#[test]
fn awards_move_tofu_and_grant_bateekh() {
    let mut sc = Scene::new();
    let (q, _) = sc.with_thread();
    sc.give_tofu(4, 3);
    assert_eq!(
        sc.rejects(&sc.key(4), TxPayload::GiveAward { post_id: q }),
        TxError::InsufficientTofu { have: 3, need: 5 }
    );
    sc.give_tofu(4, 4);
    assert_eq!(sc.rejects(&sc.key(0), TxPayload::GiveAward { post_id: q }), TxError::SelfVote);
    let burned = sc.s.ledger.burned;
    let before = sc.bateekh(0);
    sc.ok(&sc.key(4), TxPayload::GiveAward { post_id: q });
    assert_eq!(sc.s.account(&sc.addr(4)).unwrap().tofu, 2);
    assert_eq!(sc.s.account(&sc.addr(0)).unwrap().tofu, 4);
    assert_eq!(sc.s.ledger.burned, burned + 1);
    assert_eq!(sc.bateekh(0), before + 25_000);
    assert_eq!(sc.s.posts[&q].awards, 1);
    assert!(sc.conserved());
}

#[test]
fn transfers_and_redemptions() {
    let mut sc = Scene::new();
    sc.give_tofu(0, 30);
    let to = sc.addr(4);
    let send = |amount| TxPayload::TransferTofu { to, amount };
    assert!(matches!(sc.rejects(&sc.key(0), send(0)), TxError::InvalidPayload(_)));
    assert_eq!(sc.rejects(&sc.key(0), send(31)), TxError::InsufficientTofu { have: 30, need: 31 });
    sc.ok(&sc.key(0), send(5));
    assert_eq!(sc.s.account(&to).unwrap().tofu, 5);

    let service = TxPayload::CreateService { id: "tutoring".into(), name: "Tutoring".into(), price: 25 };
    assert_eq!(sc.rejects(&sc.key(1), service.clone()), TxError::Unauthorized);
    sc.ok(&sc.f.admin.clone(), service);
    let redeem = TxPayload::RedeemService { service_id: "tutoring".into() };
    assert_eq!(sc.rejects(&sc.key(4), redeem.clone()), TxError::InsufficientTofu { have: 5, need: 25 });
    let (burned, treasury) = (sc.s.ledger.burned, sc.s.ledger.treasury);
    let events = sc.run(&sc.key(0), redeem).unwrap();
    assert_eq!((sc.s.ledger.burned - burned, sc.s.ledger.treasury - treasury), (3, 22));
    assert!(matches!(events[0], Event::Redeemed { price: 25, burned: 3, to_treasury: 22, .. }));
    assert_eq!(sc.s.account(&sc.addr(0)).unwrap().tofu, 0);
    assert!(sc.conserved());
}

#[test]
fn deactivation_burns_balance() {
    let mut sc = Scene::new();
    sc.give_tofu(0, 47);
    let target = sc.addr(0);
    let burned = sc.s.ledger.burned;
    assert_eq!(sc.rejects(&sc.key(4), TxPayload::DeactivateAccount { target }), TxError::Unauthorized);
    sc.ok(&sc.f.admin.clone(), TxPayload::DeactivateAccount { target });
    assert_eq!(sc.s.ledger.burned, burned + 47);
    let acct = sc.s.account(&target).unwrap();
    assert!(!acct.active && acct.tofu == 0);
    assert!(sc.conserved());
    assert_eq!(sc.rejects(&sc.key(0), TxPayload::JoinCommunity { id: "c".into() }), TxError::InactiveAccount(target));
    let to = target;
    sc.give_tofu(4, 1);
    assert_eq!(sc.rejects(&sc.key(4), TxPayload::TransferTofu { to, amount: 1 }), TxError::InactiveAccount(target));

    let owner = sc.f.owner.address();
    let admin = sc.f.admin.clone();
    assert_eq!(sc.rejects(&admin, TxPayload::DeactivateAccount { target: owner }), TxError::Unauthorized);
    sc.ok(&sc.key(5), TxPayload::DeactivateAccount { target: sc.addr(5) });
}

#[test]
fn votes_for_inactive_authors_are_refused() {
    let mut sc = Scene::new();
    let (q, _) = sc.with_thread();
    sc.ok(&sc.key(0), TxPayload::DeactivateAccount { target: sc.addr(0) });
    assert_eq!(sc.rejects(&sc.key(4), up(q)), TxError::InactiveAccount(sc.addr(0)));
    let down = TxPayload::Vote { post_id: q, direction: Direction::Down };
    assert_eq!(sc.rejects(&sc.key(4), down), TxError::InactiveAccount(sc.addr(0)));
}

fn registration(chain: &str, admin: &Keypair, new: &Keypair, role: Role, staff_id: &str) -> SignedTransaction {
    let cosig = cosign_registration(admin, chain, &new.public(), "newbie", role, staff_id);
    let payload = TxPayload::RegisterUser { username: "newbie".into(), role, staff_id: staff_id.into(), admin_cosig: cosig };
    SignedTransaction::new(chain, 0, payload, new)
}

#[test]
fn registration_requires_matching_cosignature() {
    let sc = Scene::new();
    let new = Keypair::from_secret([7; 32]);
    let apply = |t: &SignedTransaction| {
        let mut s = sc.s.clone();
        let r = s.apply_transaction(t, 1);
        if r.is_err() {
            assert_eq!(s, sc.s);
        }
        r.map(|_| s)
    };

    let s = apply(&registration(CHAIN, &sc.f.admin, &new, Role::Student, "")).unwrap();
    let acct = s.account(&new.address()).unwrap();
    assert_eq!((acct.role, acct.bateekh, acct.tofu, acct.nonce), (Role::Student, 1_000, 0, 1));
    assert!(s.account(&sc.f.admin.address()).unwrap().nonce == 0);

    let s = apply(&registration(CHAIN, &sc.f.admin, &new, Role::Professor, "P-1138")).unwrap();
    assert_eq!(s.account(&new.address()).unwrap().staff_id, "P-1138");
    assert!(matches!(
        apply(&registration(CHAIN, &sc.f.admin, &new, Role::TA, "")),
        Err(TxError::InvalidPayload(_))
    ));
    assert_eq!(apply(&registration(CHAIN, &sc.key(1), &new, Role::Student, "")).err(), Some(TxError::Unauthorized));
    assert_eq!(apply(&registration(CHAIN, &sc.f.admin, &new, Role::Admin, "A-1")).err(), Some(TxError::Unauthorized));
    assert!(apply(&registration(CHAIN, &sc.f.owner, &new, Role::Admin, "A-1")).is_ok());

    // Cosignature for another chain, or for different fields.
    let mut t = registration("elsewhere", &sc.f.admin, &new, Role::Student, "");
    t.chain_id = CHAIN.into();
    let t = SignedTransaction::new(CHAIN, 0, t.payload, &new);
    assert_eq!(apply(&t).err(), Some(TxError::Unauthorized));
    let forged = registration(CHAIN, &sc.f.admin, &new, Role::Student, "");
    let TxPayload::RegisterUser { admin_cosig, .. } = forged.payload else { unreachable!() };
    let payload =
        TxPayload::RegisterUser { username: "newbie".into(), role: Role::TA, staff_id: "T-1".into(), admin_cosig };
    assert_eq!(apply(&SignedTransaction::new(CHAIN, 0, payload, &new)).err(), Some(TxError::Unauthorized));

    let again = registration(CHAIN, &sc.f.admin, &sc.key(0), Role::Student, "");
    assert!(matches!(apply(&again), Err(TxError::AlreadyExists(_))));
}

#[test]
fn role_changes_follow_hierarchy() {
    let mut sc = Scene::new();
    let (owner, admin) = (sc.f.owner.clone(), sc.f.admin.clone());
    let student = sc.addr(0);
    let grant = |target, role| TxPayload::GrantRole { target, role };
    sc.ok(&admin, grant(student, Role::TA));
    assert_eq!(sc.s.account(&student).unwrap().role, Role::TA);
    assert_eq!(sc.rejects(&admin, grant(student, Role::Admin)), TxError::Unauthorized);
    assert_eq!(sc.rejects(&sc.key(1), grant(student, Role::Professor)), TxError::Unauthorized);
    sc.ok(&owner, grant(student, Role::Admin));
    assert_eq!(sc.rejects(&admin, TxPayload::RevokeRole { target: student }), TxError::Unauthorized);
    assert_eq!(sc.rejects(&owner, grant(admin.address(), Role::Owner)), TxError::Unauthorized);
    sc.ok(&owner, TxPayload::RevokeRole { target: student });
    assert_eq!(sc.s.account(&student).unwrap().role, Role::Student);
}

#[test]
fn common_checks_come_first() {
    let mut sc = Scene::new();
    let k = sc.key(0);
    let mut t = tx(&sc.s, &k, TxPayload::JoinCommunity { id: "nope".into() });
    t.nonce = 5;
    let root = sc.s.state_root();
    assert_eq!(sc.s.apply_transaction(&t, 1), Err(TxError::BadSignature));
    let t = SignedTransaction::new(CHAIN, 5, TxPayload::JoinCommunity { id: "nope".into() }, &k);
    assert_eq!(sc.s.apply_transaction(&t, 1), Err(TxError::BadNonce { expected: 0, got: 5 }));
    let stranger = Keypair::from_secret([3; 32]);
    let t = SignedTransaction::new(CHAIN, 0, TxPayload::JoinCommunity { id: "nope".into() }, &stranger);
    assert!(matches!(sc.s.apply_transaction(&t, 1), Err(TxError::UnknownEntity(_))));
    assert_eq!(sc.s.state_root(), root);
    // A failed transaction does not consume the nonce.
    sc.rejects(&k, TxPayload::JoinCommunity { id: "nope".into() });
    assert_eq!(sc.s.account(&k.address()).unwrap().nonce, 0);
}

#[test]
fn apply_block_examples() {
    let sc = Scene::new();
    let v = &sc.f.validators[0];
    let g = sc.f.block0();
    let (empty, s1) = seal(&g, &sc.s, vec![], v, 5);
    let (s1b, _) = apply_block(&sc.s, &empty).unwrap();
    assert_eq!(s1b, s1);
    let mut expect = sc.s.clone();
    expect.height_applied = 1;
    assert_eq!(s1b, expect);

    let t = tx(&sc.s, &sc.key(1), TxPayload::CreateCommunity { id: "c".into(), name: "n".into() });
    let (one, _) = seal(&g, &sc.s, vec![t.clone()], v, 5);
    let (via_block, log) = apply_block(&sc.s, &one).unwrap();
    let mut direct = sc.s.clone();
    let events = direct.apply_transaction(&t, 1).unwrap();
    direct.height_applied = 1;
    assert_eq!(via_block, direct);
    assert_eq!(log.iter().map(|r| r.event.clone()).collect::<Vec<_>>(), events);
    assert!(log.iter().all(|r| r.tx_hash == t.hash() && r.height == 1));

    let mut wrong = one.clone();
    wrong.header.state_root = Hash::ZERO;
    assert!(matches!(apply_block(&sc.s, &wrong), Err(ApplyBlockError::StateRootMismatch { .. })));

    let bad = Block {
        header: one.header.clone(),
        transactions: vec![t.clone(), t.clone()],
    };
    assert!(bad.header.tx_root != compute_tx_root(&bad.transactions));
    assert!(matches!(
        apply_block(&sc.s, &bad),
        Err(ApplyBlockError::InvalidTxInBlock { index: 1, error: TxError::BadNonce { .. } })
    ));
}

#[test]
fn state_root_tracks_every_change() {
    let sc = Scene::new();
    let mut s = sc.s.clone();
    let root = s.state_root();
    s.accounts.get_mut(&sc.addr(2)).unwrap().bateekh += 1;
    assert_ne!(s.state_root(), root);
    let mut s = sc.s.clone();
    s.height_applied = 9;
    assert_ne!(s.state_root(), root);
    assert_eq!(sc.s.clone().state_root(), root);
}

#[test]
fn genesis_root_is_pinned() {
    let f = fixture(100, 1, 6);
    let root = f.genesis.block().unwrap().header.state_root;
    assert_eq!(root.to_string(), "9d11402c30ad263c8927a563725b77c89b3b719a8b9f5e5763fb7358fb49fab9");
}

fn workload_run(seed: u64, steps: usize, destructive: bool) -> (WorldState, usize) {
    let f = fixture(seed, 1, 12);
    let mut state = f.state();
    let mut econ = state.econ;
    econ.mint_threshold = 5_000;
    state.econ = econ;
    let mut gen = WorkloadGen::new(CHAIN, f.users.clone(), ChaCha8Rng::seed_from_u64(seed));
    gen.destructive = destructive;
    let mut accepted = 0;
    for step in 0..steps {
        let Some(t) = gen.next(&state) else { break };
        let before = state.clone();
        match state.apply_transaction(&t, 1 + step as u64 / 4) {
            Ok(_) => accepted += 1,
            Err(_) => assert_eq!(state, before),
        }
        assert_eq!(state.tofu_total(), state.econ.max_supply);
        for a in state.accounts.values() {
            assert!(a.active || a.tofu == 0);
        }
        for (voter, post) in state.votes.keys() {
            assert!(state.posts.contains_key(post) && state.accounts.contains_key(voter));
        }
    }
    (state, accepted)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_activity_conserves_supply(seed in any::<u64>(), destructive in any::<bool>()) {
        let (state, accepted) = workload_run(seed, 150, destructive);
        prop_assert!(accepted > 0);
        let ups: u64 = state.posts.values().map(|p| p.up + p.down).sum();
        prop_assert_eq!(ups as usize, state.votes.len());
    }

    #[test]
    fn role_gates_hold_for_every_role(role_idx in 0usize..5, kind in 0usize..6) {
        let f = fixture(200, 1, 1);
        let mut s = f.state();
        let key = Keypair::from_secret([42; 32]);
        let role = Role::ALL[role_idx];
        s.accounts.insert(key.address(), blockcampus_core::state::Account {
            address: key.address(),
            pubkey: key.public(),
            username: "probe".into(),
            staff_id: "S-1".into(),
            role,
            nonce: 0,
            bateekh: 1_000,
            earned_lifetime: 0,
            tofu: 0,
            active: true,
            communities: Default::default(),
        });
        let student = f.users[0].address();
        let admin = f.admin.address();
        let (payload, allowed) = match kind {
            0 => (TxPayload::CreateCommunity { id: "x".into(), name: "x".into() }, role != Role::Student),
            1 => (TxPayload::CreateService { id: "x".into(), name: "x".into(), price: 1 }, role.is_admin()),
            2 => (TxPayload::GrantRole { target: student, role: Role::TA }, role.is_admin()),
            3 => (TxPayload::GrantRole { target: admin, role: Role::Professor }, role == Role::Owner),
            4 => (TxPayload::DeactivateAccount { target: student }, role.is_admin()),
            _ => (TxPayload::GrantRole { target: student, role: Role::Admin }, role == Role::Owner),
        };
        let t = SignedTransaction::new(CHAIN, 0, payload, &key);
        let before = s.state_root();
        match s.apply_transaction(&t, 1) {
            Ok(_) => prop_assert!(allowed),
            Err(e) => {
                prop_assert!(!allowed, "{:?} refused: {}", role, e);
                prop_assert_eq!(e, TxError::Unauthorized);
                prop_assert_eq!(s.state_root(), before);
            }
        }
    }
}
