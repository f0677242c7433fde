mod common;

use mercury_core::frontend::ast::{Body, Event, Item, Mode, VarKind};
use mercury_core::frontend::{load, parse, print_program, validate_symmetry, validate_wellformed};
use mercury_core::{DiagKind, MercuryError};
use proptest::prelude::*;

fn diags(e: MercuryError) -> Vec<mercury_core::Diagnostic> {
    e.diagnostics()
}

#[test]
fn store_ast_shape() {
    let p = parse(&common::source("store")).unwrap();
    assert_eq!(p.name.name, "DistributedStore");
    let locs: Vec<&str> = p.locations.iter().map(|l| l.name.name.as_str()).collect();
    assert_eq!(locs, ["Candidate", "Leader", "RepCmd", "Replica"]);
    assert!(p.locations[0].initial);
    assert_eq!(p.locations.iter().filter(|l| l.initial).count(), 1);
    assert_eq!(p.vars.len(), 2);
    assert_eq!(p.vars[0].name.name, "cmd");
    assert_eq!(p.vars[0].kind, VarKind::Int { lo: 1, hi: 5, init: 1 });
    assert_eq!(p.vars[1].name.name, "stored");
    assert_eq!(p.vars[1].kind, VarKind::Int { lo: 1, hi: 2, init: 1 });
    let env: Vec<&str> = p.acts.iter().filter(|a| a.env).map(|a| a.name.name.as_str()).collect();
    assert_eq!(env, ["doCmd", "ackCmd", "ret", "LeaderDown"]);
    assert_eq!(p.act("LeaderDown").unwrap().mode, Mode::Broadcast);
    assert_eq!(p.act("doCmd").unwrap().payload, Some((1, 5)));
}

#[test]
fn minimal_program() {
    let p = parse("process P; variables ; actions ; initial location L").unwrap();
    assert_eq!(p.locations.len(), 1);
    assert!(p.locations[0].items.is_empty());
    assert!(p.vars.is_empty() && p.acts.is_empty());
}

#[test]
fn serializer_partition_arity() {
    let p = parse(&common::source("serializer_initial")).unwrap();
    assert_eq!(p.locations.len(), 5);
    let ks: Vec<i64> = p
        .handlers()
        .filter_map(|(_, h)| match &h.event {
            Event::Partition { id, k, .. } if id.name == "select" => Some(*k),
            _ => None,
        })
        .collect();
    assert_eq!(ks, [2]);
    let idle = p.locations.iter().find(|l| l.name.name == "Idle").unwrap();
    assert!(matches!(&idle.items[0], Item::Passive { events, .. } if events.len() == 2));
}

#[test]
fn win_lose_bodies_are_kept() {
    let p = parse(&common::source("store")).unwrap();
    let (_, h) = p.handlers().next().unwrap();
    assert!(matches!(h.body, Body::WinLose { .. }));
}

#[test]
fn comments_and_separators() {
    let src = "process P /*set*/\nvariables int[0,1] x := 0 // trailing\nactions br a : unit\n\
               initial location L\n  on _ do x := 1; goto L\n  on recv(a) do goto L";
    let p = load(src).unwrap();
    assert_eq!(p.locations[0].items.len(), 2);
}

#[test]
fn syntax_error_position() {
    let err = parse("process P\ninitial location L\n  on _ do goto").unwrap_err();
    let d = &diags(err)[0];
    assert_eq!(d.kind, DiagKind::Syntax);
    let sp = d.span.unwrap();
    assert_eq!(sp.line, 3);
    assert!(d.message.contains("expected"), "{}", d.message);
}

#[test]
fn duplicate_identifiers() {
    let err = load("process P\nvariables int[0,1] x := 0\n int[0,1] x := 1\ninitial location L").unwrap_err();
    assert!(diags(err).iter().any(|d| d.kind == DiagKind::Duplicate));
    let err = load("process P\ninitial location L\nlocation L").unwrap_err();
    assert!(diags(err).iter().any(|d| d.kind == DiagKind::Duplicate));
}

#[test]
fn unknown_goto_target() {
    let err = load("process P\ninitial location L\n  on _ do goto Nowhere").unwrap_err();
    let ds = diags(err);
    assert!(ds.iter().any(|d| d.kind == DiagKind::UnknownLocation && d.message.contains("Nowhere")));
}

#[test]
fn exactly_one_initial_location() {
    assert!(load("process P\nlocation L").is_err());
    assert!(load("process P\ninitial location L\ninitial location M").is_err());
}

const SYM_BASE: &str = "process P\nvariables int[0,1] x := 0\nactions rz ping : unit\nrz pong : unit\n\
                        initial location L\n  on recv(ping) where (COND) do sendrz(pong, ping.sID)";

fn with_guard(cond: &str) -> String {
    SYM_BASE.replace("COND", cond)
}

#[test]
fn symmetry_equality_on_ids_is_fine() {
    let p = parse(&with_guard("ping.sID != self")).unwrap();
    assert!(validate_symmetry(&p).is_empty());
    assert!(load(&with_guard("ping.sID = self")).is_ok());
}

#[test]
fn symmetry_ordering_on_ids_is_rejected() {
    let p = parse(&with_guard("ping.sID < self")).unwrap();
    let ds = validate_symmetry(&p);
    assert_eq!(ds.len(), 1);
    assert_eq!(ds[0].kind, DiagKind::Symmetry);
    assert!(ds[0].message.contains("ordering"), "{}", ds[0].message);
}

#[test]
fn sendrz_to_last_sender_is_symmetric() {
    let p = parse(&common::source("store")).unwrap();
    assert!(validate_symmetry(&p).is_empty());
    assert!(validate_wellformed(&p).is_empty());
}

const DECVAR: &str = "process P\nvariables int[1,2] v := 1\ninitial location L\n\
                      on Consensus<vc>(All, 1, v) do\n  v := vc.decVar[IDX]";

#[test]
fn decvar_index_bound() {
    assert!(load(&DECVAR.replace("IDX", "1")).is_ok());
    let err = load(&DECVAR.replace("IDX", "2")).unwrap_err();
    assert!(diags(err).iter().any(|d| d.kind == DiagKind::Type));
}

#[test]
fn idset_mutation_is_out_of_fragment() {
    let src = "process P\nvariables idSet s\ninitial location L\n  on _ do s.add(self)";
    match load(src) {
        Err(MercuryError::OutOfFragment(ds)) => {
            assert!(ds.iter().all(|d| d.kind == DiagKind::OutOfFragment));
            assert!(ds[0].message.contains("participant sets must be All or a Partition result"));
        }
        other => panic!("expected out-of-fragment, got {other:?}"),
    }
    assert!(matches!(load(&common::source("nonfragment/sensor_network")), Err(MercuryError::OutOfFragment(_))));
}

#[test]
fn guard_on_agreement_is_rejected() {
    let src = "process P\nvariables int[0,1] x := 0\ninitial location L\n\
               on Partition<p>(All, 1) where (x = 0) win: goto L lose: goto L";
    assert!(load(src).is_err());
}

#[test]
fn assignment_out_of_range_is_a_type_error() {
    let err = load("process P\nvariables int[0,1] x := 0\ninitial location L\n  on _ do x := 7").unwrap_err();
    assert!(diags(err).iter().any(|d| d.kind == DiagKind::Type));
}

#[test]
fn round_trip_on_bundled_models() {
    for name in [
        "store",
        "store_mutant_partition2",
        "serializer_initial",
        "serializer_fix1",
        "serializer_final",
        "lock_service",
        "motion_planning",
        "register",
        "compose/workers",
        "compose/linked",
        "nonfragment/sensor_network",
    ] {
        let a = parse(&common::source(name)).unwrap();
        let printed = print_program(&a);
        let b = parse(&printed).unwrap_or_else(|e| panic!("{name}: reparse failed: {e}\n{printed}"));
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn diagnostics_spans_lie_inside_input() {
    let bad = [
        "process P\ninitial location L\n  on _ do goto Nowhere",
        "process P\nvariables int[0,1] x := 0\ninitial location L\n  on _ do x := 7",
        "process P\nvariables idSet s\ninitial location L\n  on _ do s.add(self)",
        &with_guard("ping.sID < self"),
        "process P\ninitial location L\n  on _ do goto",
    ];
    for src in bad {
        let err = load(src).unwrap_err();
        for d in diags(err) {
            let sp = d.span.expect("span");
            assert!(sp.start <= sp.end && sp.end <= src.len(), "{d} in {src:?}");
        }
    }
}

fn int_expr() -> impl Strategy<Value = String> {
    prop_oneof![Just("x".to_string()), (0i64..2).prop_map(|v| v.to_string()), Just("ping.payld".to_string())]
}

fn id_expr() -> impl Strategy<Value = String> {
    prop_oneof![Just("self".to_string()), Just("ping.sID".to_string())]
}

fn bexp() -> impl Strategy<Value = String> {
    let atom = prop_oneof![
        (id_expr(), id_expr(), prop_oneof![Just("="), Just("!=")]).prop_map(|(a, b, op)| format!("{a} {op} {b}")),
        (int_expr(), int_expr(), prop_oneof![Just("<"), Just("<="), Just("="), Just("!=")])
            .prop_map(|(a, b, op)| format!("{a} {op} {b}")),
    ];
    atom.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} && {b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a} || {b})")),
        ]
    })
}

const SYM_PAYLOAD: &str = "process P\nvariables int[0,1] x := 0\nactions rz ping : int[0,1]\nrz pong : unit\n\
                           initial location L\n  on recv(ping) where (COND) do sendrz(pong, ping.sID)";

proptest! {
    #[test]
    fn equality_only_guards_pass_symmetry(cond in bexp()) {
        let p = parse(&SYM_PAYLOAD.replace("COND", &cond)).unwrap();
        prop_assert!(validate_symmetry(&p).is_empty());
    }

    #[test]
    fn any_ordering_on_ids_fails_symmetry(cond in bexp(), op in prop_oneof![Just("<"), Just("<="), Just(">"), Just(">=")]) {
        let guarded = format!("({cond}) && ping.sID {op} self");
        let p = parse(&SYM_PAYLOAD.replace("COND", &guarded)).unwrap();
        prop_assert!(validate_symmetry(&p).iter().any(|d| d.kind == DiagKind::Symmetry));
    }
}
