//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero on any FAIL.

mod common;

use common::{Case, CASES};
use mercury_core::analysis::{parse_spec, Graph};
use mercury_core::gspcore::Counter;
use mercury_core::pipeline::Scope;
use mercury_core::verifier::{self, Limits, Outcome};
use mercury_core::wsts::{coverable, Basis, CoverLimits, Order};
use rand::{rngs::StdRng, Rng, SeedableRng};
use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, title: &str, problems: &[String], detail: String, secs: f64) {
        let ok = problems.is_empty();
        if !ok {
            self.failed += 1;
        }
        println!("{} criterion {id}: {title} ({detail}; {secs:.1}s)", if ok { "PASS" } else { "FAIL" });
        for p in problems {
            println!("    - {p}");
        }
    }
}

fn unique_models() -> Vec<&'static Case> {
    let mut seen = BTreeSet::new();
    CASES.iter().filter(|c| seen.insert(c.model)).collect()
}

fn amenable() -> impl Iterator<Item = &'static Case> {
    CASES.iter().filter(|c| c.cutoff.is_some())
}

fn worked_example(problems: &mut Vec<String>) -> String {
    let mut times = Vec::new();
    let mut check = |cond: bool, what: &str| {
        if !cond {
            problems.push(what.to_string());
        }
    };

    let t = Instant::now();
    let m = common::model("serializer_initial");
    let f = m.fragment();
    let text = f.render();
    let suggestions = f.violations.iter().filter(|v| v.event == "getReady").map(|v| v.suggestions.len()).max();
    check(!f.in_fragment(), "initial model accepted");
    check(text.contains("(Selected,{})") && text.contains("getReady"), "diagnostic does not name (Selected,{}) / getReady");
    check(suggestions.unwrap_or(0) >= 2, "fewer than two suggestions");
    times.push(t.elapsed().as_secs_f64());

    let t = Instant::now();
    let m = common::model("serializer_fix1");
    let rep = m.cutoff(&common::spec_file("serializer_fix1")).unwrap();
    let g = Graph::new(&m.ts);
    let witness = rep.leaves[0].witness.as_ref().map(|w| w.render(&m.ts, &g)).unwrap_or_default();
    check(m.fragment().in_fragment() && !rep.amenable, "fix 1 not reported as compatible but not amenable");
    let flagged = witness.lines().last().unwrap_or("");
    check(flagged.contains("R(sequencer)"), "witness does not end in the R(sequencer) transition");
    times.push(t.elapsed().as_secs_f64());

    let t = Instant::now();
    let m = common::model("serializer_final");
    let run = m.verify(&common::spec_file("serializer_final"), None, &Limits::default()).unwrap();
    let cutoff = run.cutoff.as_ref().and_then(|c| c.cutoff);
    check(cutoff == Some(2), "final cutoff is not 2");
    check(run.verdict.result == Outcome::Safe && run.scope == Scope::Parameterized, "final model not SAFE");
    times.push(t.elapsed().as_secs_f64());

    for (stage, secs) in ["initial", "fix1", "final"].iter().zip(&times) {
        if *secs >= 5.0 {
            problems.push(format!("{stage} took {secs:.1}s"));
        }
    }
    format!("stage times {}", times.iter().map(|t| format!("{t:.2}s")).collect::<Vec<_>>().join(", "))
}

fn structural_values(problems: &mut Vec<String>) -> String {
    let store = common::model("store");
    let mut parts = Vec::new();
    let props = [
        ("store/leader", "atmost(1, Leader)".to_string()),
        ("store/consistency", "(atmost(0, {Leader, Replica}: stored = 1) | atmost(0, {Leader, Replica}: stored = 2))".into()),
    ];
    let mut runs = vec![];
    for (label, text) in &props {
        runs.push((*label, "store", parse_spec(text).unwrap(), 2usize, 3usize));
    }
    runs.push(("store/both", "store", common::spec_file("store"), 2, 3));
    runs.push(("lock_service", "lock_service", common::spec_file("lock_service"), 2, 2));
    runs.push(("motion_planning", "motion_planning", common::spec_file("motion_planning"), 5, 2));
    runs.push(("register", "register", common::spec_file("register"), 1, 2));
    for (label, name, spec, phases, cutoff) in runs {
        let t = Instant::now();
        let m = if name == "store" { store.clone() } else { common::model(name) };
        let run = m.verify(&spec, None, &Limits::default()).unwrap();
        let got = run.cutoff.as_ref().and_then(|c| c.cutoff);
        let secs = t.elapsed().as_secs_f64();
        if m.phases.count() != phases {
            problems.push(format!("{label}: {} phases, expected {phases}", m.phases.count()));
        }
        if got != Some(cutoff) {
            problems.push(format!("{label}: cutoff {got:?}, expected {cutoff}"));
        }
        if run.verdict.result != Outcome::Safe || run.scope != Scope::Parameterized {
            problems.push(format!("{label}: {:?} ({})", run.verdict.result, run.scope.text()));
        }
        if secs > 600.0 {
            problems.push(format!("{label}: {secs:.0}s"));
        }
        parts.push(format!("{label} {}ph/c{}/{:.3}s", m.phases.count(), got.unwrap_or(0), secs));
    }
    parts.join(", ")
}

fn differential_suite(problems: &mut Vec<String>) -> String {
    let mut runs = 0;
    for c in unique_models() {
        let l = common::load(c);
        for n in 1..=4 {
            let d = common::differential(&l, n);
            runs += 1;
            if !d.sets_equal {
                problems.push(format!("{} n={n}: {} indexed vs {} counter states", c.model, d.oracle_states, d.counter_states));
            }
            if d.oracle_safe != d.counter_safe {
                problems.push(format!("{} n={n}: verdicts differ", c.model));
            }
        }
    }
    format!("{runs} model/size pairs")
}

fn cutoff_stability(problems: &mut Vec<String>) -> String {
    let mut runs = 0;
    for c in amenable() {
        let l = common::load(c);
        let cut = c.cutoff.unwrap() as u32;
        let verdicts: Vec<Outcome> = (cut..=cut + 2)
            .map(|n| verifier::verify(&l.sys, &l.spec, &l.targets, n, &Limits::default()).result)
            .collect();
        runs += 1;
        let want = if c.safe { Outcome::Safe } else { Outcome::Unsafe };
        if verdicts.iter().any(|v| *v != want) {
            problems.push(format!("{} / {}: {verdicts:?} at n={cut}..={}", c.model, c.spec, cut + 2));
        }
    }
    format!("{runs} model/spec pairs at cutoff, +1, +2")
}

fn random_order_properties(problems: &mut Vec<String>) {
    let sys = common::model("serializer_final").gsp().unwrap();
    let ord = Order::new(&sys);
    let mut rng = StdRng::seed_from_u64(11);
    let random = |rng: &mut StdRng| -> Counter { (0..sys.dims()).map(|_| rng.gen_range(0..3)).collect() };
    for _ in 0..2000 {
        let (a, b, c) = (random(&mut rng), random(&mut rng), random(&mut rng));
        if !ord.leq(&a, &a) {
            problems.push(format!("order not reflexive at {a:?}"));
            return;
        }
        if ord.leq(&a, &b) && ord.leq(&b, &c) && !ord.leq(&a, &c) {
            problems.push(format!("order not transitive at {a:?} {b:?} {c:?}"));
            return;
        }
    }
    for _ in 0..200 {
        let mut basis = Basis::default();
        for _ in 0..20 {
            let q = random(&mut rng);
            let r = ord.ready(&q);
            basis.insert(q, r);
        }
        if !basis.is_antichain() {
            problems.push("basis lost the antichain property".into());
            return;
        }
    }
}

fn coverability(problems: &mut Vec<String>) -> String {
    let mut parts = Vec::new();
    for c in amenable() {
        let l = common::load(c);
        let t = Instant::now();
        let res = coverable(&l.sys, &l.spec, &l.targets, &CoverLimits::default()).unwrap();
        if res.resource_exceeded {
            problems.push(format!("{} / {}: expansion limit reached", c.model, c.spec));
        } else if res.coverable == c.safe {
            problems.push(format!("{} / {}: coverable={} but cutoff verdict safe={}", c.model, c.spec, res.coverable, c.safe));
        }
        parts.push(format!("{} {:.1}s", c.spec, t.elapsed().as_secs_f64()));
    }
    random_order_properties(problems);
    let mut trials = 0;
    for c in unique_models().into_iter().filter(|c| c.cutoff.is_some()) {
        let sys = common::model(c.model).gsp().unwrap();
        let r = common::compatibility_spot_check(&sys, 1000, 4, 3);
        trials += r.trials;
        for f in r.failures {
            problems.push(format!("{}: {f}", c.model));
        }
    }
    format!("{}; {trials} compatibility trials", parts.join(", "))
}

fn semantics(problems: &mut Vec<String>) -> String {
    let (mut states, mut cons, mut parts) = (0, 0, 0);
    for c in unique_models() {
        let m = common::model(c.model);
        for n in 1..=3 {
            let rep = common::semantics_properties(&m.ts, n, Some(&m.phases));
            states += rep.states;
            cons += rep.consensus_steps;
            parts += rep.partition_steps;
            for v in rep.violations {
                problems.push(format!("{} n={n}: {v}", c.model));
            }
        }
    }
    format!("{states} indexed states, {cons} consensus and {parts} partition steps")
}

fn composition(problems: &mut Vec<String>) -> String {
    let m = common::model("compose/workers");
    let and = m.cutoff(&common::spec_file("compose/workers")).unwrap();
    let or = m.cutoff(&common::spec_file("compose/workers_or")).unwrap();
    let leaf: Vec<Option<usize>> = and.leaves.iter().map(|l| l.cutoff).collect();
    let want_max = leaf.iter().flatten().max().copied();
    if and.cutoff != want_max || and.cutoff != Some(3) {
        problems.push(format!("conjunction cutoff {:?}, leaves {leaf:?}", and.cutoff));
    }
    let or_leaves: usize = or.leaves.iter().map(|l| l.m).sum();
    if or.cutoff != Some(4) || or.cutoff.map_or(true, |c| c < or_leaves) {
        problems.push(format!("disjunction cutoff {:?}, leaf bounds sum to {or_leaves}", or.cutoff));
    }
    let linked = common::model("compose/linked").cutoff(&common::spec_file("compose/linked")).unwrap();
    let rejected = !linked.amenable && linked.clauses.iter().any(|c| c.conflict.is_some());
    if !rejected {
        problems.push("linked disjunction was not rejected".into());
    }
    format!("and = {:?}, or = {:?}, linked rejected = {rejected}", and.cutoff, or.cutoff)
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    type Criterion = (&'static str, &'static str, fn(&mut Vec<String>) -> String);
    let criteria: [Criterion; 7] = [
        ("1", "staged serializer diagnostics, witness and cutoff", worked_example),
        ("2", "benchmark phases, cutoffs and verdicts", structural_values),
        ("3", "indexed oracle vs counter engine, n = 1..4", differential_suite),
        ("4", "verdicts stable at cutoff, +1, +2", cutoff_stability),
        ("5", "coverability agrees with cutoff verdicts; order properties", coverability),
        ("6", "semantics properties, n <= 3", semantics),
        ("7", "composition rules", composition),
    ];
    for (id, title, run) in criteria {
        let t = Instant::now();
        let mut problems = Vec::new();
        let detail = run(&mut problems);
        report.line(id, title, &problems, detail, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 7 criteria passed", 7 - report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
