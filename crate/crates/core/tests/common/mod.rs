#![allow(dead_code)]

use mercury_core::analysis::{parse_spec, Spec};
use mercury_core::gspcore::{Counter, GspSystem};
use mercury_core::phases::StateSet;
use mercury_core::pipeline::Model;
use mercury_core::semantics::{IndexedState, DEFAULT_STATE_CAP};
use mercury_core::verifier::{self, Targets};
use std::path::PathBuf;

pub fn examples_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples")
}

pub fn source(name: &str) -> String {
    let p = examples_dir().join(format!("{name}.mer"));
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn spec_file(name: &str) -> Spec {
    let p = examples_dir().join(format!("{name}.spec"));
    parse_spec(&std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

pub fn model(name: &str) -> Model {
    Model::build(&source(name), DEFAULT_STATE_CAP).unwrap()
}

pub fn model_src(src: &str) -> Model {
    Model::build(src, DEFAULT_STATE_CAP).unwrap()
}

/// A bundled model paired with one of its property files.
pub struct Case {
    pub model: &'static str,
    pub spec: &'static str,
    /// Expected cutoff when amenable.
    pub cutoff: Option<usize>,
    /// Expected verdict at the cutoff (or at the largest leaf m).
    pub safe: bool,
}

const fn case(model: &'static str, spec: &'static str, cutoff: Option<usize>, safe: bool) -> Case {
    Case { model, spec, cutoff, safe }
}

/// Every bundled model inside the supported fragment, with its specs.
pub const CASES: &[Case] = &[
    case("store", "store", Some(3), true),
    case("store_mutant_partition2", "store_mutant_partition2", Some(3), false),
    case("serializer_initial", "serializer_initial", None, true),
    case("serializer_fix1", "serializer_fix1", None, true),
    case("serializer_final", "serializer_final", Some(2), true),
    case("lock_service", "lock_service", Some(2), true),
    case("lock_service_mutant", "lock_service_mutant", Some(2), false),
    case("motion_planning", "motion_planning", Some(2), true),
    case("register", "register", Some(2), true),
    case("register_mutant", "register_mutant", Some(2), false),
    case("compose/workers", "compose/workers", Some(3), false),
    case("compose/workers", "compose/workers_or", Some(4), false),
    // Safe at its largest leaf m = 2; the violation needs four processes.
    case("compose/linked", "compose/linked", None, true),
];

pub struct Loaded {
    pub model: Model,
    pub spec: Spec,
    pub sets: Vec<StateSet>,
    pub sys: GspSystem,
    pub targets: Targets,
}

pub fn load(c: &Case) -> Loaded {
    let model = model(c.model);
    let spec = spec_file(c.spec);
    let sets = model.targets(&spec).unwrap();
    let sys = model.gsp().unwrap();
    let targets = verifier::targets(&spec, &sets);
    Loaded { model, spec, sets, sys, targets }
}

/// The property evaluated directly on an indexed state, by counting processes.
pub fn indexed_holds(q: &IndexedState, spec: &Spec, sets: &[StateSet]) -> bool {
    let leaves = spec.leaves();
    spec.eval(&mut |i| {
        let hits = q.procs.iter().filter(|s| sets[i].contains(s)).count();
        hits < leaves[i].m()
    })
}

/// Permute process indices: process `i` of `q` becomes process `perm[i]`.
/// `senders` is laid out per process, `tracked` entries each.
pub fn permute(q: &IndexedState, perm: &[usize]) -> IndexedState {
    let n = q.procs.len();
    let tracked = if n == 0 { 0 } else { q.senders.len() / n };
    let mut procs = vec![0; n];
    let mut senders = vec![0u8; q.senders.len()];
    for i in 0..n {
        procs[perm[i]] = q.procs[i];
        for k in 0..tracked {
            let code = q.senders[i * tracked + k];
            senders[perm[i] * tracked + k] = if code >= 2 { 2 + perm[(code - 2) as usize] as u8 } else { code };
        }
    }
    let map_mask = |m: u64| (0..n).filter(|&i| m >> i & 1 == 1).fold(0u64, |acc, i| acc | 1 << perm[i]);
    let parts = q.parts.iter().map(|p| p.map(|(w, l)| (map_mask(w), map_mask(l)))).collect();
    IndexedState { procs, senders, parts }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut v = p.clone();
            v.insert(pos, n - 1);
            out.push(v);
        }
    }
    out
}

/// Counter with the given named locations filled; env set when present.
pub fn counter(sys: &GspSystem, fill: &[(&str, u32)]) -> Counter {
    let mut q = vec![0; sys.dims()];
    for (name, c) in fill {
        let i = sys
            .states
            .iter()
            .position(|s| s == name || s.starts_with(&format!("({name},")))
            .unwrap_or_else(|| panic!("no state {name}"));
        q[i] += c;
    }
    if let Some(e) = sys.env {
        q[e] = 1;
    }
    q
}

use mercury_core::lowering::CoreKind;
use mercury_core::semantics::localts::Slot;
use mercury_core::semantics::{reachable_indexed, LocalTs, Oracle, StepLabel};
use std::collections::BTreeSet;

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

/// Value proposed to consensus `id` by a process in local state `s`.
fn proposal(ts: &LocalTs, id: usize, s: usize) -> Option<i64> {
    let name = &ts.agr_names[id];
    let loc = ts.states[s].loc;
    ts.core.handlers.iter().filter(|h| h.loc == loc).find_map(|h| match &h.kind {
        CoreKind::Consensus { id: c, propose: Some(v), .. } if c == name => ts.int_value(s, v),
        _ => None,
    })
}

#[derive(Default, Debug)]
pub struct SemanticsReport {
    pub states: usize,
    pub steps: usize,
    pub consensus_steps: usize,
    pub partition_steps: usize,
    pub violations: Vec<String>,
}

/// Symmetry, agreement and crash properties over every reachable indexed state.
pub fn semantics_properties(ts: &LocalTs, n: usize, check_phases: Option<&mercury_core::phases::PhaseSet>) -> SemanticsReport {
    let reach = reachable_indexed(ts, n, 2_000_000).unwrap();
    let oracle = Oracle::new(ts, n);
    let perms = permutations(n);
    let decided_slot = |id: usize| ts.slots.iter().position(|s| *s == Slot::Decided { id });
    let (mut steps, mut consensus_steps, mut partition_steps) = (0, 0, 0);
    let mut violations: Vec<String> = Vec::new();
    let mut bad = |msg: String| {
        if violations.len() < 20 {
            violations.push(msg)
        }
    };
    for q in &reach {
        for p in &perms {
            if !reach.contains(&permute(q, p)) {
                bad(format!("permutation {p:?} of {q:?} unreachable"));
            }
        }
        if let Some(ph) = check_phases {
            let live: Vec<usize> = q.procs.iter().copied().filter(|&s| s != ts.crash).collect();
            if let Some(&first) = live.first() {
                let common: BTreeSet<usize> = ph.membership[first].iter().copied().collect();
                let shared = live.iter().fold(common, |acc, &s| {
                    acc.intersection(&ph.membership[s].iter().copied().collect()).copied().collect()
                });
                if shared.is_empty() {
                    bad(format!("live processes of {q:?} share no phase"));
                }
            }
        }
        for (label, nq) in oracle.step(q) {
            steps += 1;
            for i in 0..n {
                if q.procs[i] == ts.crash && nq.procs[i] != ts.crash {
                    bad(format!("crashed process {i} revived by {label:?}"));
                }
            }
            match label {
                StepLabel::Consensus { id, gamma, failed, decided, .. } => {
                    consensus_steps += 1;
                    let alive = gamma & !failed;
                    if failed & !gamma != 0 || alive.count_ones() <= failed.count_ones() {
                        bad(format!("consensus without a live majority: gamma {gamma:b} failed {failed:b}"));
                    }
                    let k = ts.agreement(id).k;
                    if decided == 0 || decided.count_ones() as usize > k {
                        bad(format!("decided set {decided:b} outside 1..={k}"));
                    }
                    let proposed: BTreeSet<i64> = bits(gamma).filter_map(|i| proposal(ts, id, q.procs[i])).collect();
                    for v in ts.decided_values(id, decided) {
                        if !proposed.contains(&v) {
                            bad(format!("decided {v} was never proposed (proposals {proposed:?})"));
                        }
                    }
                    if let Some(slot) = decided_slot(id) {
                        let views: BTreeSet<i64> = bits(alive).map(|i| ts.states[nq.procs[i]].vals[slot]).collect();
                        if views.len() != 1 || views.iter().next() != Some(&(decided as i64)) {
                            bad(format!("participants disagree after consensus: {views:?}"));
                        }
                    }
                    if bits(failed).any(|i| nq.procs[i] != ts.crash) {
                        bad("failed consensus participant not crashed".into());
                    }
                }
                StepLabel::Partition { id, gamma, failed, winners } => {
                    partition_steps += 1;
                    let alive = gamma & !failed;
                    if failed == gamma {
                        bad(format!("all-fail partition outcome: gamma {gamma:b}"));
                    }
                    if winners & !alive != 0 {
                        bad(format!("winner outside the live participants: {winners:b} vs {alive:b}"));
                    }
                    let want = ts.agreement(id).k.min(alive.count_ones() as usize);
                    if winners.count_ones() as usize != want {
                        bad(format!("{} winners, expected min(k, |live|) = {want}", winners.count_ones()));
                    }
                    for i in bits(alive) {
                        let win = winners >> i & 1 == 1;
                        let ok = ts.outgoing(q.procs[i]).any(|t| {
                            t.dst == nq.procs[i]
                                && t.label
                                    == if win {
                                        mercury_core::semantics::Label::PartWin { id }
                                    } else {
                                        mercury_core::semantics::Label::PartLose { id }
                                    }
                        });
                        if !ok {
                            bad(format!("process {i} took no matching partition transition"));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    SemanticsReport { states: reach.len(), steps, consensus_steps, partition_steps, violations }
}

#[derive(Debug)]
pub struct Differential {
    pub oracle_states: usize,
    pub counter_states: usize,
    pub sets_equal: bool,
    pub oracle_safe: bool,
    pub counter_safe: bool,
}

/// Compare the abstraction of the indexed reachable set with the counter
/// system's reachable set, and the verdicts each one gives.
pub fn differential(l: &Loaded, n: u32) -> Differential {
    let reach = reachable_indexed(&l.model.ts, n as usize, 5_000_000).unwrap();
    let image: BTreeSet<Counter> = reach.iter().map(|q| l.sys.alpha(q)).collect();
    let counters = verifier::reachable(&l.sys, n, 5_000_000).expect("counter state cap");
    let oracle_safe = reach.iter().all(|q| indexed_holds(q, &l.spec, &l.sets));
    let v = verifier::verify(&l.sys, &l.spec, &l.targets, n, &verifier::Limits::default());
    Differential {
        oracle_states: reach.len(),
        counter_states: counters.len(),
        sets_equal: image == counters,
        oracle_safe,
        counter_safe: v.result == verifier::Outcome::Safe,
    }
}

#[derive(Debug, Default)]
pub struct SpotCheck {
    pub trials: usize,
    pub failures: Vec<String>,
}

/// Random compatibility trials: pick q reachable, p above q in the order,
/// a step q -> q', and look for p' above q' within `depth` steps of p.
pub fn compatibility_spot_check(sys: &GspSystem, trials: usize, depth: usize, seed: u64) -> SpotCheck {
    use mercury_core::wsts::Order;
    use rand::{rngs::StdRng, Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(seed);
    let ord = Order::new(sys);
    let mut pool: Vec<Counter> = Vec::new();
    for n in 1..=3 {
        pool.extend(verifier::reachable(sys, n, 200_000).expect("reachable set within cap"));
    }
    let free: Vec<usize> = (0..sys.dims()).filter(|&s| Some(s) != sys.env).collect();
    let mut out = SpotCheck::default();
    let mut attempts = 0;
    while out.trials < trials {
        attempts += 1;
        assert!(attempts < trials * 1000, "could not generate enough comparable pairs");
        let q = &pool[rng.gen_range(0..pool.len())];
        let succ = ord.eng.successors(q);
        if succ.is_empty() {
            continue;
        }
        let mut p = q.clone();
        for _ in 0..rng.gen_range(0..=3) {
            p[free[rng.gen_range(0..free.len())]] += 1;
        }
        if !ord.leq(q, &p) {
            continue;
        }
        let (a, q2) = &succ[rng.gen_range(0..succ.len())];
        out.trials += 1;
        let mut frontier = vec![p.clone()];
        let mut seen = BTreeSet::from([p.clone()]);
        let mut found = ord.leq(q2, &p);
        for _ in 0..depth {
            if found {
                break;
            }
            let mut next = Vec::new();
            for x in &frontier {
                for (_, y) in ord.eng.successors(x) {
                    if seen.insert(y.clone()) {
                        found |= ord.leq(q2, &y);
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        if !found && out.failures.len() < 10 {
            out.failures.push(format!(
                "q {} --{}--> {} not matched from p {}",
                sys.render_counter(q),
                sys.actions[*a].name,
                sys.render_counter(q2),
                sys.render_counter(&p)
            ));
        }
    }
    out
}
