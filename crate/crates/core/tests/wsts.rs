mod common;

use mercury_core::analysis::parse_spec;
use mercury_core::gspcore::Counter;
use mercury_core::verifier;
use mercury_core::wsts::{coverable, error_basis, pointwise_leq, Basis, CoverLimits, Order};
use proptest::prelude::*;

fn serializer() -> mercury_core::gspcore::GspSystem {
    common::model("serializer_final").gsp().unwrap()
}

fn counters(dims: usize) -> impl Strategy<Value = Counter> {
    proptest::collection::vec(0u32..3, dims)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn order_is_reflexive_and_transitive(a in counters(6), b in counters(6), c in counters(6)) {
        let sys = serializer();
        let ord = Order::new(&sys);
        prop_assert!(ord.leq(&a, &a));
        if ord.leq(&a, &b) && ord.leq(&b, &c) {
            prop_assert!(ord.leq(&a, &c));
        }
    }

    #[test]
    fn ready_sets_and_guards_agree(a in counters(6), extra in counters(6)) {
        let sys = serializer();
        let ord = Order::new(&sys);
        let b: Counter = a.iter().zip(&extra).map(|(x, y)| x + y).collect();
        prop_assert_eq!(ord.leq(&a, &b), ord.leq_by_guards(&a, &b));
        prop_assert_eq!(ord.leq(&b, &a), ord.leq_by_guards(&b, &a));
    }

    #[test]
    fn basis_stays_an_antichain(elems in proptest::collection::vec(counters(6), 1..30)) {
        let sys = serializer();
        let ord = Order::new(&sys);
        let mut basis = Basis::default();
        for q in &elems {
            basis.insert(q.clone(), ord.ready(q));
        }
        prop_assert!(basis.is_antichain());
        // Every inserted element is covered afterwards.
        for q in &elems {
            prop_assert!(basis.covers(q, &ord.ready(q)));
        }
    }
}

#[test]
fn more_processes_in_the_initial_state_is_above() {
    let sys = serializer();
    let ord = Order::new(&sys);
    let one = common::counter(&sys, &[("Start", 1)]);
    let two = common::counter(&sys, &[("Start", 2)]);
    assert!(ord.leq(&one, &two));
    assert!(!ord.leq(&two, &one));
    // Pointwise above, but a new state blocks the broadcast that was ready.
    let q = common::counter(&sys, &[("Selected", 1)]);
    let p = common::counter(&sys, &[("Selected", 1), ("Start", 1)]);
    assert!(pointwise_leq(&q, &p));
    assert!(!ord.leq(&q, &p));
}

#[test]
fn empty_basis_and_error_basis() {
    let sys = serializer();
    let basis = Basis::default();
    assert!(basis.is_empty());
    assert!(!basis.covers(&sys.initial_counter(1), &Order::new(&sys).ready(&sys.initial_counter(1))));
    let spec = parse_spec("atmost(1, Target)").unwrap();
    let m = common::model("serializer_final");
    let targets = verifier::targets(&spec, &m.targets(&spec).unwrap());
    assert_eq!(error_basis(&sys, &spec, &targets).unwrap(), vec![common::counter(&sys, &[("Target", 2)])]);
}

#[test]
fn unreachable_target_is_uncoverable() {
    let m = common::model_src("process P\ninitial location A\nlocation B");
    let sys = m.gsp().unwrap();
    let spec = parse_spec("atmost(1, B)").unwrap();
    let targets = verifier::targets(&spec, &m.targets(&spec).unwrap());
    let res = coverable(&sys, &spec, &targets, &CoverLimits::default()).unwrap();
    assert!(!res.coverable && !res.resource_exceeded);
    assert!(res.chain.is_empty());
}

#[test]
fn coverability_agrees_with_verification_at_the_cutoff() {
    // The store takes about a minute here and is covered by the acceptance suite.
    for c in common::CASES.iter().filter(|c| c.cutoff.is_some() && !c.model.starts_with("store")) {
        let l = common::load(c);
        let res = coverable(&l.sys, &l.spec, &l.targets, &CoverLimits::default()).unwrap();
        assert!(!res.resource_exceeded, "{}", c.model);
        assert_eq!(res.coverable, !c.safe, "{} / {}", c.model, c.spec);
        if res.coverable {
            let first = &res.chain.first().unwrap().counter;
            let last = &res.chain.last().unwrap().counter;
            assert!(first.iter().enumerate().all(|(s, &n)| n == 0 || s == l.sys.initial || Some(s) == l.sys.env));
            assert!(!verifier::eval_spec(last, &l.spec, &l.targets), "{}", c.model);
        }
    }
}

#[test]
fn linked_model_is_coverable_beyond_its_leaf_bound() {
    let c = common::CASES.iter().find(|c| c.model == "compose/linked").unwrap();
    let l = common::load(c);
    let res = coverable(&l.sys, &l.spec, &l.targets, &CoverLimits::default()).unwrap();
    assert!(res.coverable);
    let v = verifier::verify(&l.sys, &l.spec, &l.targets, 4, &verifier::Limits::default());
    assert_eq!(v.result, verifier::Outcome::Unsafe);
}

#[test]
fn compatibility_spot_check() {
    for name in ["serializer_final", "lock_service", "register"] {
        let sys = common::model(name).gsp().unwrap();
        let r = common::compatibility_spot_check(&sys, 1000, 4, 7);
        assert_eq!(r.trials, 1000);
        assert!(r.failures.is_empty(), "{name}: {:#?}", r.failures);
    }
}
