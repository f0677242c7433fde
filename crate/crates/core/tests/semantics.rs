mod common;

use mercury_core::semantics::localts::Slot;
use mercury_core::semantics::{classify, reachable_indexed, Label, Oracle, Role, StepLabel};
use std::collections::BTreeSet;

#[test]
fn serializer_states() {
    let m = common::model("serializer_final");
    let names: BTreeSet<String> = (0..m.ts.num_states()).map(|s| m.ts.render_state(s)).collect();
    let want: BTreeSet<String> =
        ["Start", "Selected", "Idle", "Prepare", "Target"].iter().map(|l| format!("({l},{{}})")).collect();
    assert_eq!(names, want);
    assert_eq!(m.ts.crash, 5);
    assert_eq!(m.ts.render_state(m.ts.crash), "(crashed,{})");
}

#[test]
fn empty_process_has_only_crash() {
    let m = common::model_src("process P\ninitial location L");
    assert_eq!(m.ts.num_states(), 1);
    let labels: Vec<Label> = m.ts.transitions.iter().filter(|t| t.src != m.ts.crash).map(|t| t.label).collect();
    assert_eq!(labels, [Label::Crash]);
}

#[test]
fn every_state_can_crash() {
    let m = common::model("store");
    for s in 0..m.ts.num_states() {
        assert!(m.ts.outgoing(s).any(|t| t.label == Label::Crash && t.dst == m.ts.crash), "{}", m.ts.render_state(s));
    }
}

#[test]
fn replicas_react_to_every_singleton_decision() {
    let m = common::model("store");
    let ts = &m.ts;
    let vc = ts.agr_names.iter().position(|a| a == "vc").unwrap();
    let mut replicas = 0;
    for s in (0..ts.num_states()).filter(|&s| ts.loc_name(s) == "Replica") {
        replicas += 1;
        let decided: BTreeSet<Vec<i64>> = ts
            .outgoing(s)
            .filter_map(|t| match t.label {
                Label::Cons { id, decided, acting } if id == vc => {
                    assert!(!acting, "replicas propose nothing");
                    Some(ts.decided_values(id, decided))
                }
                _ => None,
            })
            .collect();
        let want: BTreeSet<Vec<i64>> = (1..=5).map(|v| vec![v]).collect();
        assert_eq!(decided, want, "{}", ts.render_state(s));
    }
    assert!(replicas > 0);
}

#[test]
fn consensus_acting_iff_own_proposal_decided() {
    let m = common::model("store");
    let ts = &m.ts;
    for t in &ts.transitions {
        if let Label::Cons { id, decided, acting } = t.label {
            if ts.loc_name(t.src) == "RepCmd" {
                let cmd = ts.int_value(t.src, "cmd").unwrap();
                assert_eq!(acting, ts.decided_values(id, decided).contains(&cmd));
            }
        }
    }
}

#[test]
fn classification_table() {
    assert_eq!(classify(&Label::PartWin { id: 0 }), (Role::Acting, true));
    assert_eq!(classify(&Label::PartLose { id: 0 }), (Role::Reacting, false));
    assert_eq!(classify(&Label::Internal), (Role::Neither, true));
    assert_eq!(classify(&Label::Crash), (Role::Neither, true));
    assert_eq!(classify(&Label::SendBr { act: 0, payload: None }), (Role::Acting, true));
    assert_eq!(classify(&Label::RecvBr { act: 0, payload: None }), (Role::Reacting, false));
    assert_eq!(classify(&Label::SendRz { act: 0, payload: None, target: None }), (Role::Neither, false));
    assert_eq!(classify(&Label::RecvRz { act: 0, payload: None }), (Role::Neither, false));
    assert_eq!(classify(&Label::Cons { id: 0, decided: 1, acting: true }), (Role::Acting, true));
    assert_eq!(classify(&Label::Cons { id: 0, decided: 1, acting: false }), (Role::Reacting, false));
}

#[test]
fn partition_of_three_with_two_winners() {
    let m = common::model("serializer_final");
    let ts = &m.ts;
    let oracle = Oracle::new(ts, 3);
    let q0 = oracle.initial();
    let sel = ts.state_of("Selected", &[]).unwrap();
    let idle = ts.state_of("Idle", &[]).unwrap();
    let mut clean = BTreeSet::new();
    let mut with_crash = 0;
    for (label, q) in oracle.step(&q0) {
        if let StepLabel::Partition { failed, .. } = label {
            if failed == 0 {
                clean.insert(q.procs.clone());
            } else {
                with_crash += 1;
            }
        }
    }
    let want: BTreeSet<Vec<usize>> =
        [vec![sel, sel, idle], vec![sel, idle, sel], vec![idle, sel, sel]].into_iter().collect();
    assert_eq!(clean, want);
    assert!(with_crash > 0);
}

#[test]
fn lone_broadcaster_moves_alone() {
    let m = common::model_src("process P\nactions br go : unit\ninitial location A\n  on _ do sendbr(go) goto B\n  passive go\nlocation B\n  passive go");
    let ts = &m.ts;
    let oracle = Oracle::new(ts, 1);
    let b = ts.state_of("B", &[]).unwrap();
    let succ = oracle.step(&oracle.initial());
    assert!(succ.iter().any(|(l, q)| matches!(l, StepLabel::Broadcast { .. }) && q.procs == [b]));
}

#[test]
fn store_consensus_decides_only_proposed_values() {
    let m = common::model("store");
    let ts = &m.ts;
    let find = |loc: &str, cmd: i64| {
        (0..ts.num_states())
            .find(|&s| {
                ts.loc_name(s) == loc
                    && ts.int_value(s, "cmd") == Some(cmd)
                    && ts.int_value(s, "stored") == Some(1)
                    && ts.render_state(s).contains("vc.decVar=_")
            })
            .unwrap_or_else(|| panic!("no {loc} state with cmd={cmd}"))
    };
    let oracle = Oracle::new(ts, 3);
    let mut q = oracle.initial();
    q.procs = vec![find("RepCmd", 4), find("Replica", 1), find("Replica", 1)];
    let vc = ts.agr_names.iter().position(|a| a == "vc").unwrap();
    let mut outcomes = 0;
    for (label, nq) in oracle.step(&q) {
        if let StepLabel::Consensus { decided, .. } = label {
            outcomes += 1;
            assert_eq!(ts.decided_values(vc, decided), [4]);
            // The branch bodies run afterwards; the decision itself is recorded at once.
            let slot = ts.slots.iter().position(|x| *x == Slot::Decided { id: vc }).unwrap();
            for &s in nq.procs.iter().filter(|&&s| s != ts.crash) {
                assert_eq!(ts.states[s].vals[slot], decided as i64, "{}", ts.render_state(s));
            }
        }
    }
    assert!(outcomes > 0);
}

#[test]
fn single_location_reachable_set() {
    let m = common::model_src("process P\ninitial location L");
    let r = reachable_indexed(&m.ts, 1, 100).unwrap();
    let procs: BTreeSet<Vec<usize>> = r.into_iter().map(|q| q.procs).collect();
    assert_eq!(procs, BTreeSet::from([vec![m.ts.initial], vec![m.ts.crash]]));
}

#[test]
fn state_cap_is_enforced() {
    let src = "process P\nvariables int[0,999] a := 0\nint[0,999] b := 0\ninitial location L\n  on _ do a := a + 1\n  on _ do b := b + 1";
    let err = mercury_core::pipeline::Model::build(src, 1000).unwrap_err();
    assert!(matches!(err, mercury_core::MercuryError::StateSpace { limit: 1000 }));
}

#[test]
fn properties_on_small_models() {
    for (name, n) in [("serializer_final", 3), ("store", 2), ("lock_service", 3), ("register", 2)] {
        let m = common::model(name);
        let rep = common::semantics_properties(&m.ts, n, Some(&m.phases));
        assert!(rep.violations.is_empty(), "{name}: {:?}", rep.violations);
        assert!(rep.steps > 0);
    }
}

#[test]
fn permutation_helper_is_a_group_action() {
    let m = common::model("store_mutant_partition2");
    let r = reachable_indexed(&m.ts, 3, 1_000_000).unwrap();
    let q = r.iter().find(|q| q.procs.iter().collect::<BTreeSet<_>>().len() == 3).unwrap();
    for p in common::permutations(3) {
        let mut inv = vec![0; 3];
        for (i, &j) in p.iter().enumerate() {
            inv[j] = i;
        }
        assert_eq!(&common::permute(&common::permute(q, &p), &inv), q);
    }
}
