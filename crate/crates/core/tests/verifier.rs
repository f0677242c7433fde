mod common;

use mercury_core::analysis::parse_spec;
use mercury_core::pipeline::Scope;
use mercury_core::verifier::{eval_spec, render_trace, replay, verify, Limits, Outcome};

#[test]
fn eval_spec_counts_processes_in_target_states() {
    let spec = parse_spec("(atmost(1, A) & (atmost(0, B) | atmost(2, C)))").unwrap();
    // Targets: leaf 0 -> state 0, leaf 1 -> state 1, leaf 2 -> states 1 and 2.
    let targets = vec![(2, vec![0]), (1, vec![1]), (3, vec![1, 2])];
    assert!(eval_spec(&vec![1, 0, 0], &spec, &targets));
    assert!(!eval_spec(&vec![2, 0, 0], &spec, &targets));
    assert!(eval_spec(&vec![0, 1, 1], &spec, &targets));
    assert!(!eval_spec(&vec![0, 1, 2], &spec, &targets));
    // Leaf 1 holds, so the disjunction does.
    assert!(eval_spec(&vec![0, 0, 9], &spec, &targets));
    assert!(!eval_spec(&vec![0, 1, 9], &spec, &targets));
    assert!(eval_spec(&vec![0, 0, 0], &spec, &targets));
}

#[test]
fn store_is_safe_at_its_cutoff() {
    let l = common::load(&common::CASES[0]);
    let v = verify(&l.sys, &l.spec, &l.targets, 3, &Limits::default());
    assert_eq!(v.result, Outcome::Safe);
    assert_eq!(v.n, 3);
    assert!(v.states > 1);
    assert!(v.trace.is_none());
}

#[test]
fn mutant_has_a_replayable_counterexample() {
    let c = common::CASES.iter().find(|c| c.model == "store_mutant_partition2").unwrap();
    let l = common::load(c);
    let v = verify(&l.sys, &l.spec, &l.targets, 3, &Limits::default());
    assert_eq!(v.result, Outcome::Unsafe);
    let trace = v.trace.expect("trace");
    assert!(replay(&l.sys, &trace));
    assert_eq!(trace.first().unwrap().counter, l.sys.initial_counter(3));
    let last = &trace.last().unwrap().counter;
    let leaders: u32 = l.targets[0].1.iter().map(|&s| last[s]).sum();
    assert_eq!(leaders, 2);
    assert!(!eval_spec(last, &l.spec, &l.targets));
    assert!(render_trace(&trace).contains("--elect-->"));
    // A tampered trace does not replay.
    let mut bad = trace.clone();
    bad.last_mut().unwrap().counter[l.sys.crash] += 1;
    assert!(!replay(&l.sys, &bad));
}

#[test]
fn fewer_processes_than_the_bound_is_safe() {
    let c = common::CASES.iter().find(|c| c.model == "store_mutant_partition2").unwrap();
    let l = common::load(c);
    let v = verify(&l.sys, &l.spec, &l.targets, 1, &Limits::default());
    assert_eq!(v.result, Outcome::Safe);
}

#[test]
fn state_limit_is_reported() {
    let l = common::load(&common::CASES[0]);
    let v = verify(&l.sys, &l.spec, &l.targets, 3, &Limits { max_states: 10, max_seconds: None });
    assert_eq!(v.result, Outcome::ResourceExceeded);
}

#[test]
fn verdicts_match_the_expected_table() {
    for c in common::CASES {
        let l = common::load(c);
        let run = l.model.verify(&l.spec, None, &Limits::default()).unwrap();
        let safe = run.verdict.result == Outcome::Safe;
        assert_eq!(safe, c.safe, "{} / {}", c.model, c.spec);
        let want = if safe && c.cutoff.is_some() { Scope::Parameterized } else { Scope::BoundedOnly };
        assert_eq!(run.scope, want, "{} / {}", c.model, c.spec);
        if let Some(cut) = c.cutoff {
            assert_eq!(run.verdict.n, cut as u32);
        }
    }
}

#[test]
fn explicit_size_is_bounded_only() {
    let l = common::load(&common::CASES[0]);
    let run = l.model.verify(&l.spec, Some(2), &Limits::default()).unwrap();
    assert_eq!(run.verdict.result, Outcome::Safe);
    assert_eq!(run.scope, Scope::BoundedOnly);
    assert_eq!(run.verdict.n, 2);
}
