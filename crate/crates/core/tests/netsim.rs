use std::collections::BTreeMap;

use blockcampus_core::node::NodeEvent;
use blockcampus_core::sim::{run_simulation, Crash, Latency, Partition, SimConfig, SimConfigError, SimEvent, TraceEvent};
use blockcampus_core::{apply_block, block_weight, decode_canonical, to_canonical, Block, Hash};

fn quiet(seed: u64, duration_ms: u64) -> SimConfig {
    let mut cfg = SimConfig { seed, duration_ms, ..SimConfig::default() };
    cfg.workload.interval_ms = 0;
    cfg
}

#[test]
fn honest_validators_rotate_in_turn() {
    let cfg = quiet(1, 203_000);
    let res = run_simulation(&cfg).unwrap();
    assert!(res.converged());
    let node = &res.nodes[0];
    let chain: Vec<_> = node.chain().skip(1).take(40).cloned().collect();
    assert_eq!(chain.len(), 40);
    let vset = &res.genesis.validators;
    for b in &chain {
        assert_eq!(b.header.proposer, vset.in_turn(b.height()).address, "height {}", b.height());
        assert_eq!(b.header.timestamp, 5 * b.height());
        assert!(b.transactions.is_empty());
    }
    let proposers: Vec<_> = chain.iter().map(|b| b.header.proposer).collect();
    for w in proposers.windows(5) {
        assert_eq!(w[0], w[4]);
        assert_ne!(w[0], w[1]);
    }
}

#[test]
fn offline_in_turn_validator_is_covered_out_of_turn() {
    let mut cfg = quiet(2, 60_000);
    // Node 1 is scheduled for height 1.
    cfg.crashes = vec![Crash { node: 1, at_ms: 0, recover_ms: None }];
    let res = run_simulation(&cfg).unwrap();
    let b1 = res.nodes[0].chain().nth(1).unwrap().clone();
    assert_eq!(b1.header.proposer, res.genesis.validators.iter().nth(2).unwrap().address);
    assert!(b1.header.timestamp >= 5 + 2);
    let produced = res.trace.iter().find_map(|l| match &l.event {
        TraceEvent::Node(NodeEvent::BlockProduced { height: 1, offset, .. }) => Some(*offset),
        _ => None,
    });
    assert_eq!(produced, Some(1));
    assert!(res.nodes[0].head().height() >= 8);
}

#[test]
fn same_config_gives_identical_trace_bytes() {
    let mut cfg = SimConfig { seed: 77, duration_ms: 40_000, drop_permille: 50, ..SimConfig::default() };
    cfg.workload.destructive = true;
    let a = run_simulation(&cfg).unwrap().trace_jsonl();
    let b = run_simulation(&cfg).unwrap().trace_jsonl();
    assert_eq!(a, b);
    cfg.seed = 78;
    assert_ne!(run_simulation(&cfg).unwrap().trace_jsonl(), a);
}

#[test]
fn partition_heals_to_a_single_head() {
    let mut cfg = SimConfig { seed: 3, duration_ms: 95_000, ..SimConfig::default() };
    cfg.partitions = vec![Partition { start_ms: 5_000, end_ms: 65_000, side: vec![0, 1] }];
    let res = run_simulation(&cfg).unwrap();
    assert!(res.converged(), "{:?}", res.finals());
    let healed = res.trace.iter().any(|l| matches!(l.event, TraceEvent::Sim(SimEvent::PartitionHealed { .. })));
    assert!(healed);
    let reorged = res.trace.iter().any(|l| {
        matches!(l.event, TraceEvent::Node(NodeEvent::HeadChanged { reorg_depth, .. }) if reorg_depth > 0)
    });
    assert!(reorged, "both sides should have built their own branch");
}

#[test]
fn lossy_links_still_advance() {
    let cfg = SimConfig { seed: 4, duration_ms: 120_000, drop_permille: 200, ..SimConfig::default() };
    let res = run_simulation(&cfg).unwrap();
    for n in &res.nodes {
        assert!(n.head().height() >= 10, "stalled at {}", n.head().height());
    }
}

#[test]
fn workload_txs_are_included_and_states_replay() {
    let cfg = SimConfig { seed: 5, duration_ms: 90_000, ..SimConfig::default() };
    let res = run_simulation(&cfg).unwrap();
    assert!(res.converged());
    let node = &res.nodes[2];
    let included: usize = node.chain().map(|b| b.transactions.len()).sum();
    assert!(included > 20, "only {included} txs included");

    let mut state = res.genesis.state().unwrap();
    for b in node.chain().skip(1) {
        let wire = to_canonical(&**b).unwrap();
        let back: Block = decode_canonical(&wire).unwrap();
        state = apply_block(&state, &back).unwrap().0;
    }
    assert_eq!(state.state_root(), node.head_state().state_root());
    assert_eq!(state.tofu_total(), state.econ.max_supply);
}

#[test]
fn adopted_scores_never_decrease() {
    let mut cfg = SimConfig { seed: 6, duration_ms: 80_000, drop_permille: 100, ..SimConfig::default() };
    cfg.partitions = vec![Partition { start_ms: 10_000, end_ms: 40_000, side: vec![3] }];
    let res = run_simulation(&cfg).unwrap();
    let mut last: BTreeMap<usize, u64> = BTreeMap::new();
    for line in &res.trace {
        if let (Some(n), TraceEvent::Node(NodeEvent::HeadChanged { score, .. })) = (line.node, &line.event) {
            let prev = last.insert(n, *score).unwrap_or(0);
            assert!(*score > prev, "node {n} went from {prev} to {score}");
        }
    }
    for n in &res.nodes {
        let chain: Vec<Block> = n.chain().map(|b| (**b).clone()).collect();
        let score: u64 = chain.iter().map(|b| block_weight(b, &res.genesis.validators, &res.genesis.consensus)).sum();
        assert_eq!(score, n.head_tip().score);
    }
}

#[test]
fn observers_follow_the_chain() {
    let mut cfg = quiet(7, 40_000);
    cfg.nodes = 6;
    let res = run_simulation(&cfg).unwrap();
    assert!(res.converged());
    assert!(res.trace.iter().all(|l| match &l.event {
        TraceEvent::Node(NodeEvent::BlockProduced { .. }) => l.node.unwrap() < 4,
        _ => true,
    }));
}

#[test]
fn scenario_files_round_trip_and_validate() {
    let cfg = SimConfig {
        crashes: vec![Crash { node: 0, at_ms: 1, recover_ms: Some(9) }],
        partitions: vec![Partition { start_ms: 1, end_ms: 2, side: vec![1] }],
        ..SimConfig::default()
    };
    let bytes = to_canonical(&cfg).unwrap();
    let back: SimConfig = decode_canonical(&bytes).unwrap();
    assert_eq!(back, cfg);
    let partial: SimConfig = serde_json::from_str(r#"{"seed":9,"nodes":2,"validators":[1]}"#).unwrap();
    assert_eq!(partial.latency, Latency { min_ms: 20, max_ms: 200 });

    let bad = |f: &dyn Fn(&mut SimConfig)| {
        let mut c = SimConfig::default();
        f(&mut c);
        run_simulation(&c).err()
    };
    assert_eq!(bad(&|c| c.nodes = 0), Some(SimConfigError::NoNodes));
    assert_eq!(bad(&|c| c.validators = vec![0, 0]), Some(SimConfigError::BadValidator(0)));
    assert_eq!(bad(&|c| c.latency.min_ms = 500), Some(SimConfigError::BadLatency));
    assert_eq!(bad(&|c| c.drop_permille = 1001), Some(SimConfigError::BadDropRate));
    assert!(serde_json::from_str::<SimConfig>(r#"{"seeds":1}"#).is_err());
    let idle = run_simulation(&SimConfig { duration_ms: 1, ..SimConfig::default() }).unwrap();
    let genesis: Hash = idle.genesis.block().unwrap().hash();
    assert!(idle.finals().iter().all(|f| f.head == genesis && f.height == 0));
}
