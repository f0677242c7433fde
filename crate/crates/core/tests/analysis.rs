mod common;

use mercury_core::analysis::amenability::Via;
use mercury_core::analysis::{parse_spec, suggest_fixes};
use mercury_core::MercuryError;

#[test]
fn serializer_initial_lacks_a_reaction_to_get_ready() {
    let m = common::model("serializer_initial");
    let f = m.fragment();
    assert!(!f.phase_compatible);
    assert!(!f.in_fragment());
    let v = f.violations.iter().find(|v| v.event == "getReady").expect("getReady violation");
    assert_eq!(v.state, "(Selected,{})");
    assert_eq!(v.message, "(Selected,{}) needs a corresponding reacting transition on getReady");
    assert!(v.suggestions.len() >= 2);
    assert_eq!(v.suggestions[0], "add transition (Selected,{})\t------R(getReady)------>\t(Prepare,{})");
    assert!(v.suggestions.iter().any(|s| s.contains("(Anywhere!,{})")));
    assert!(f.render().contains("Suggestions to solve this:"));
}

#[test]
fn first_ranked_edit_repairs_the_serializer() {
    let src = common::source("serializer_initial");
    let f = common::model_src(&src).fragment();
    let edits = suggest_fixes(&f);
    let first = edits.iter().find(|e| e.rank == 1).unwrap();
    assert_eq!(first.state, "(Selected,{})");
    // Apply the edit: Selected reacts to getReady by moving to Prepare.
    assert!(first.text.ends_with("(Prepare,{})"));
    let fixed = src.replacen("location Selected\n", "location Selected\n  on recv(getReady) do goto Prepare\n", 1);
    assert_ne!(fixed, src);
    let m = common::model_src(&fixed);
    assert!(m.fragment().in_fragment(), "{}", m.fragment().render());
    // The repaired model is the bundled first fix, modulo layout.
    let fix1 = common::model("serializer_fix1");
    assert_eq!(m.ts.num_states(), fix1.ts.num_states());
    assert_eq!(m.phases.phases, fix1.phases.phases);
}

#[test]
fn fix1_is_compatible_but_not_amenable() {
    let m = common::model("serializer_fix1");
    assert!(m.fragment().in_fragment());
    let rep = m.cutoff(&common::spec_file("serializer_fix1")).unwrap();
    assert!(!rep.amenable);
    assert_eq!(rep.cutoff, None);
    let leaf = &rep.leaves[0];
    let w = leaf.witness.as_ref().expect("witness path");
    let g = mercury_core::analysis::Graph::new(&m.ts);
    let text = w.render(&m.ts, &g);
    assert!(text.contains("R(sequencer)"), "{text}");
    assert!(text.contains("(Prepare,{})------R(sequencer)------> (Target,{})"), "{text}");
    assert_eq!(w.path.first(), Some(&m.ts.initial));
    assert!(!w.dependent.is_empty());
    let json = w.to_json(&m.ts, &g);
    assert!(json.as_array().unwrap().iter().any(|s| s["independent"] == false));
}

#[test]
fn final_serializer_cutoff_is_two() {
    let m = common::model("serializer_final");
    let rep = m.cutoff(&common::spec_file("serializer_final")).unwrap();
    assert!(rep.amenable);
    assert_eq!(rep.cutoff, Some(2));
    assert!(rep.warnings.is_empty());
}

#[test]
fn bundled_cutoffs() {
    for c in common::CASES {
        let m = common::model(c.model);
        if !m.fragment().in_fragment() {
            assert_eq!(c.cutoff, None, "{}", c.model);
            continue;
        }
        let rep = m.cutoff(&common::spec_file(c.spec)).unwrap();
        assert_eq!(rep.cutoff, c.cutoff, "{} / {}", c.model, c.spec);
        assert_eq!(rep.amenable, c.cutoff.is_some());
    }
}

#[test]
fn side_conditions_hold_for_store() {
    let f = common::model("store").fragment();
    assert!(f.side_conditions.finite_state);
    assert!(f.side_conditions.one_rz_recv_per_phase);
    assert!(f.side_conditions.symmetric);
    assert!(f.in_fragment());
    assert!(f.violations.is_empty() && f.rz_conflicts.is_empty());
}

#[test]
fn rendezvous_received_at_two_locations_of_a_phase() {
    let src = "process P\nactions br hi : unit\nrz ping : unit\ninitial location A\n  on _ do sendbr(hi) goto W\n  \
               on recv(hi) do goto R\nlocation W\n  on recv(ping) do goto Done\n  passive hi\n\
               location R\n  on _ do sendrz(ping, hi.sID) goto Done\n  on recv(ping) do goto Done\n  passive hi\n\
               location Done\n  passive hi";
    let f = common::model_src(src).fragment();
    assert!(!f.side_conditions.one_rz_recv_per_phase);
    assert!(!f.in_fragment());
    assert!(f.rz_conflicts.iter().any(|c| c.contains("`ping`") && c.contains("R, W")), "{:?}", f.rz_conflicts);
}

#[test]
fn internal_only_process_is_trivially_compatible() {
    let m = common::model_src("process P\ninitial location A\n  on _ do goto B\nlocation B\n  on _ do goto A");
    let f = m.fragment();
    assert!(f.in_fragment());
    let rep = m.cutoff(&parse_spec("atmost(1, B)").unwrap()).unwrap();
    assert!(rep.amenable);
    assert_eq!(rep.leaves[0].via, Some(Via::AllIndependent));
    // Two processes in B violate atmost(1, B).
    assert_eq!(rep.cutoff, Some(2));
}

#[test]
fn conjunction_takes_the_maximum_and_disjunction_the_sum() {
    let m = common::model("compose/workers");
    let and = m.cutoff(&common::spec_file("compose/workers")).unwrap();
    assert_eq!(and.clauses.len(), 2);
    assert_eq!(and.cutoff, Some(3));
    let or = m.cutoff(&common::spec_file("compose/workers_or")).unwrap();
    assert_eq!(or.clauses.len(), 1);
    assert_eq!(or.clauses[0].leaves.len(), 2);
    assert_eq!(or.cutoff, Some(4));
    assert!(or.clauses[0].conflict.is_none());
}

#[test]
fn linked_disjunction_is_rejected() {
    let m = common::model("compose/linked");
    let rep = m.cutoff(&common::spec_file("compose/linked")).unwrap();
    assert!(!rep.amenable);
    let conflict = rep.clauses[0].conflict.as_deref().expect("conflict");
    assert!(conflict.contains("R(promote)"), "{conflict}");
    assert!(conflict.contains("leaves 0 and 1"), "{conflict}");
}

#[test]
fn empty_target_set_warns_unfalsifiable() {
    let m = common::model_src("process P\ninitial location A\nlocation B");
    let rep = m.cutoff(&parse_spec("atmost(1, B)").unwrap()).unwrap();
    assert_eq!(rep.leaves[0].via, Some(Via::Vacuous));
    assert!(rep.warnings.iter().any(|w| w.contains("unfalsifiable")), "{:?}", rep.warnings);
}

#[test]
fn spec_parsing() {
    let s = parse_spec("(atmost(1, A) & (atmost(2, B) | atmost(1, C: x = 1)))").unwrap();
    assert_eq!(s.leaves().len(), 3);
    assert_eq!(s.leaves()[1].m(), 3);
    let cnf = s.cnf().unwrap();
    assert_eq!(cnf, vec![vec![0], vec![1, 2]]);
    assert_eq!(parse_spec(&s.text()).unwrap().text(), s.text());
    assert!(matches!(parse_spec("atmost(0 A)"), Err(MercuryError::Spec(_))));
}

#[test]
fn unknown_location_in_spec_is_an_error() {
    let m = common::model("store");
    assert!(m.targets(&parse_spec("atmost(1, Nowhere)").unwrap()).is_err());
}
