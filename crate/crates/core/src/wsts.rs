//! Backward coverability over GSP-Core counter systems, for any number of processes.

use crate::analysis::Spec;
use crate::diag::MercuryError;
use crate::gspcore::{ActionKind, Bits, Counter, Engine, Firing, GspSystem};
use crate::verifier::Targets;
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

pub const DEFAULT_MAX_EXPANSIONS: usize = 200_000;

/// The firability-aware order and its helpers over one system.
pub struct Order<'a> {
    pub eng: Engine<'a>,
}

impl<'a> Order<'a> {
    pub fn new(sys: &'a GspSystem) -> Order<'a> {
        Order { eng: sys.compile() }
    }

    pub fn ready(&self, q: &Counter) -> Bits {
        self.eng.ready(q)
    }

    /// q ⪯ p and every action ready in q is ready in p.
    pub fn leq(&self, q: &Counter, p: &Counter) -> bool {
        pointwise_leq(q, p) && self.ready(q).is_subset(&self.ready(p))
    }

    /// Same order, phrased through guards: for every fireable action whose guard q
    /// satisfies, p can fire it and also satisfies the guard.
    pub fn leq_by_guards(&self, q: &Counter, p: &Counter) -> bool {
        if !pointwise_leq(q, p) {
            return false;
        }
        let (sq, sp) = (self.eng.support(q), self.eng.support(p));
        (0..self.eng.sys.actions.len()).all(|a| {
            let g = &self.eng.guard[a];
            !(sq.is_subset(g) && self.eng.can_fire(q, a)) || (sp.is_subset(g) && self.eng.can_fire(p, a))
        })
    }
}

pub fn pointwise_leq(q: &Counter, p: &Counter) -> bool {
    q.iter().zip(p).all(|(a, b)| a <= b)
}

/// Finite basis of an upward-closed set; elements pairwise incomparable.
#[derive(Clone, Debug, Default)]
pub struct Basis {
    slots: Vec<Option<(Counter, Bits)>>,
    by_support: HashMap<Vec<usize>, Vec<usize>>,
    by_state: HashMap<usize, Vec<usize>>,
    live: usize,
}

fn support_list(q: &Counter) -> Vec<usize> {
    q.iter().enumerate().filter(|(_, c)| **c > 0).map(|(i, _)| i).collect()
}

impl Basis {
    pub fn iter(&self) -> impl Iterator<Item = &(Counter, Bits)> {
        self.slots.iter().flatten()
    }

    pub fn contains(&self, q: &Counter) -> bool {
        self.by_support
            .get(&support_list(q))
            .map_or(false, |v| v.iter().any(|&i| self.slots[i].as_ref().map_or(false, |e| &e.0 == q)))
    }

    /// Some element b with b ⪯ q and ready(b) ⊆ ready(q).
    pub fn covers(&self, q: &Counter, ready: &Bits) -> bool {
        let supp = support_list(q);
        if supp.len() > 16 {
            return self.iter().any(|(b, r)| r.is_subset(ready) && pointwise_leq(b, q));
        }
        // Candidates have their support inside supp(q).
        (0u32..1 << supp.len()).any(|mask| {
            let key: Vec<usize> = supp.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect();
            self.by_support.get(&key).map_or(false, |v| {
                v.iter().any(|&i| self.slots[i].as_ref().map_or(false, |(b, r)| r.is_subset(ready) && pointwise_leq(b, q)))
            })
        })
    }

    /// Add `q` unless already covered; drop elements it covers. True when added.
    pub fn insert(&mut self, q: Counter, ready: Bits) -> bool {
        if self.covers(&q, &ready) {
            return false;
        }
        let supp = support_list(&q);
        // Elements above q contain every state of supp(q); scan the rarest state's list.
        let cands: Vec<usize> = match supp.iter().filter_map(|s| self.by_state.get(s)).min_by_key(|v| v.len()) {
            Some(v) if !supp.is_empty() && supp.iter().all(|s| self.by_state.contains_key(s)) => v.clone(),
            _ if supp.is_empty() => (0..self.slots.len()).collect(),
            _ => Vec::new(),
        };
        for i in cands {
            let dead = self.slots[i].as_ref().map_or(false, |(b, r)| ready.is_subset(r) && pointwise_leq(&q, b));
            if dead {
                self.slots[i] = None;
                self.live -= 1;
            }
        }
        let id = self.slots.len();
        self.by_support.entry(supp.clone()).or_default().push(id);
        for s in supp {
            self.by_state.entry(s).or_default().push(id);
        }
        self.slots.push(Some((q, ready)));
        self.live += 1;
        true
    }

    pub fn is_antichain(&self) -> bool {
        let le = |(b, r): &(Counter, Bits), (c, s): &(Counter, Bits)| pointwise_leq(b, c) && r.is_subset(s);
        let elems: Vec<_> = self.iter().collect();
        elems.iter().enumerate().all(|(i, x)| elems.iter().enumerate().all(|(j, y)| i == j || !le(x, y)))
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }
}

fn with_env(sys: &GspSystem, mut q: Counter) -> Option<Counter> {
    if let Some(e) = sys.env {
        if q[e] > 1 {
            return None;
        }
        q[e] = 1;
    }
    Some(q)
}

/// Minimal counters violating the property: for some clause, every leaf has at least m processes in its states.
pub fn error_basis(sys: &GspSystem, spec: &Spec, targets: &Targets) -> Result<Vec<Counter>, MercuryError> {
    let mut out: Vec<Counter> = Vec::new();
    for clause in spec.cnf()? {
        let mut partial: Vec<Counter> = vec![vec![0; sys.dims()]];
        for &leaf in &clause {
            let (m, states) = &targets[leaf];
            let mut next = Vec::new();
            for q in partial {
                let have: usize = states.iter().map(|&s| q[s] as usize).sum();
                if have >= *m {
                    next.push(q);
                    continue;
                }
                let mut cur = q.clone();
                spread(states, 0, m - have, &mut cur, &mut next);
            }
            partial = next;
        }
        out.extend(partial);
    }
    let mut min: Vec<Counter> = Vec::new();
    out.sort();
    out.dedup();
    for q in &out {
        if !out.iter().any(|p| p != q && pointwise_leq(p, q)) {
            min.push(q.clone());
        }
    }
    Ok(min.into_iter().filter_map(|q| with_env(sys, q)).collect())
}

/// All ways of adding `k` processes over `states[from..]`.
fn spread(states: &[usize], from: usize, k: usize, cur: &mut Counter, out: &mut Vec<Counter>) {
    if k == 0 {
        out.push(cur.clone());
        return;
    }
    for i in from..states.len() {
        cur[states[i]] += 1;
        spread(states, i, k - 1, cur, out);
        cur[states[i]] -= 1;
    }
}

/// Minimal predecessors of the upward closure of `b` under action `a`, with their ready sets.
pub fn pred(ord: &Order, b: &Counter, b_ready: &Bits, a: usize) -> Vec<(Counter, Bits)> {
    let eng = &ord.eng;
    let sys = eng.sys;
    let act = &sys.actions[a];
    let guard = &eng.guard[a];
    let n = sys.dims();
    let mut firings: Vec<(Firing, bool)> = Vec::new();
    match act.kind {
        ActionKind::Sender => {
            let mut cur = Vec::new();
            product(&act.slots, 0, &mut cur, &mut |f| firings.push((f.clone(), false)));
        }
        ActionKind::Maximal => {
            for m in 1..=act.arity {
                let mut cur = Vec::new();
                combos(&act.slots[0], 0, m, &mut cur, &mut |f| firings.push((f.clone(), m < act.arity)));
            }
        }
    }
    let sources: Vec<usize> = act.sources().into_iter().collect();
    let mut preimage: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in guard.iter() {
        if let Some(t) = eng.recv_of(a, s) {
            preimage[t].push(s);
        }
    }
    let mut out = Vec::new();
    for (f, exhaust) in firings {
        if f.iter().any(|&(s, _)| !guard.contains(s)) {
            continue;
        }
        let mut deficit: Vec<(usize, u32)> = Vec::new();
        let mut placed = vec![0u32; n];
        for &(_, d) in &f {
            placed[d] += 1;
        }
        for t in 0..n {
            if b[t] > placed[t] {
                deficit.push((t, b[t] - placed[t]));
            }
        }
        // Remaining processes must map onto the deficit; exhausted maximal slots leave none at sources.
        let allowed = |s: usize| !(exhaust && sources.contains(&s));
        let mut rests: Vec<Counter> = vec![vec![0; n]];
        for &(t, d) in &deficit {
            let pre: Vec<usize> = preimage[t].iter().copied().filter(|&s| allowed(s)).collect();
            let mut next = Vec::new();
            for r in &rests {
                let mut cur = r.clone();
                distribute(&pre, 0, d, &mut cur, &mut next);
            }
            rests = next;
            if rests.is_empty() {
                break;
            }
        }
        for mut q in rests {
            for &(s, _) in &f {
                q[s] += 1;
            }
            let Some(q) = with_env(sys, q) else { continue };
            let Some(next) = eng.apply(&q, a, &f) else { continue };
            if !eng.support(&q).is_subset(guard) || !pointwise_leq(b, &next) {
                continue;
            }
            if act.kind == ActionKind::Maximal && !eng.firings(&q, a).contains(&sorted(&f)) {
                continue;
            }
            let q_ready = ord.ready(&q);
            // Already above b in the order: nothing new.
            if pointwise_leq(b, &q) && b_ready.is_subset(&q_ready) {
                continue;
            }
            if b_ready.is_subset(&ord.ready(&next)) {
                out.push((q, q_ready));
            }
        }
    }
    out.sort();
    out.dedup_by(|x, y| x.0 == y.0);
    out
}

fn sorted(f: &Firing) -> Firing {
    let mut f = f.clone();
    f.sort();
    f
}

fn product(slots: &[Vec<(usize, usize)>], i: usize, cur: &mut Firing, emit: &mut dyn FnMut(&Firing)) {
    if i == slots.len() {
        emit(cur);
        return;
    }
    for &t in &slots[i] {
        cur.push(t);
        product(slots, i + 1, cur, emit);
        cur.pop();
    }
}

fn combos(ts: &[(usize, usize)], from: usize, m: usize, cur: &mut Firing, emit: &mut dyn FnMut(&Firing)) {
    if cur.len() == m {
        emit(cur);
        return;
    }
    for j in from..ts.len() {
        cur.push(ts[j]);
        combos(ts, j, m, cur, emit);
        cur.pop();
    }
}

fn distribute(pre: &[usize], from: usize, d: u32, cur: &mut Counter, out: &mut Vec<Counter>) {
    if d == 0 {
        out.push(cur.clone());
        return;
    }
    for i in from..pre.len() {
        cur[pre[i]] += 1;
        distribute(pre, i, d - 1, cur, out);
        cur[pre[i]] -= 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainStep {
    /// Action leading from this element towards the error set.
    pub action: Option<String>,
    pub counter: Counter,
    pub rendered: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Coverability {
    pub coverable: bool,
    pub resource_exceeded: bool,
    pub basis_size: usize,
    pub expansions: usize,
    /// From an initial-family element to an error element.
    pub chain: Vec<ChainStep>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct CoverLimits {
    pub max_expansions: usize,
    pub max_seconds: Option<f64>,
}

impl Default for CoverLimits {
    fn default() -> Self {
        CoverLimits { max_expansions: DEFAULT_MAX_EXPANSIONS, max_seconds: None }
    }
}

fn initial_family(sys: &GspSystem, q: &Counter) -> bool {
    q.iter().enumerate().all(|(s, &c)| c == 0 || s == sys.initial || Some(s) == sys.env)
}

/// Is some counter violating the property reachable from an initial state of some size?
pub fn coverable(sys: &GspSystem, spec: &Spec, targets: &Targets, limits: &CoverLimits) -> Result<Coverability, MercuryError> {
    let start = Instant::now();
    let ord = Order::new(sys);
    let mut basis = Basis::default();
    let mut link: HashMap<Counter, (usize, Counter)> = HashMap::new();
    // Smallest elements first: they subsume the most.
    let mut work: BinaryHeap<Reverse<(u32, usize, Counter)>> = BinaryHeap::new();
    let mut seq = 0;
    for q in error_basis(sys, spec, targets)? {
        let r = ord.ready(&q);
        if basis.insert(q.clone(), r) {
            seq += 1;
            work.push(Reverse((q.iter().sum(), seq, q)));
        }
    }
    let mut expansions = 0;
    let done = |basis: &Basis, link: &HashMap<Counter, (usize, Counter)>, expansions, exceeded| {
        let hit = basis.iter().map(|e| &e.0).filter(|q| initial_family(sys, q)).min().cloned();
        let mut chain = Vec::new();
        if let Some(mut q) = hit.clone() {
            loop {
                let next = link.get(&q).cloned();
                chain.push(ChainStep {
                    action: next.as_ref().map(|(a, _)| sys.actions[*a].name.clone()),
                    rendered: sys.render_counter(&q),
                    counter: q.clone(),
                });
                match next {
                    Some((_, p)) if chain.len() <= link.len() => q = p,
                    _ => break,
                }
            }
        }
        Coverability {
            coverable: hit.is_some(),
            resource_exceeded: exceeded && hit.is_none(),
            basis_size: basis.len(),
            expansions,
            chain,
            seconds: start.elapsed().as_secs_f64(),
        }
    };
    while let Some(Reverse((_, _, b))) = work.pop() {
        if !basis.contains(&b) {
            continue;
        }
        if initial_family(sys, &b) {
            return Ok(done(&basis, &link, expansions, false));
        }
        expansions += 1;
        if expansions > limits.max_expansions || limits.max_seconds.map_or(false, |t| start.elapsed().as_secs_f64() > t) {
            return Ok(done(&basis, &link, expansions, true));
        }
        let b_ready = ord.ready(&b);
        for a in 0..sys.actions.len() {
            for (q, r) in pred(&ord, &b, &b_ready, a) {
                if basis.insert(q.clone(), r) {
                    link.entry(q.clone()).or_insert((a, b.clone()));
                    if initial_family(sys, &q) {
                        return Ok(done(&basis, &link, expansions, false));
                    }
                    seq += 1;
                    work.push(Reverse((q.iter().sum(), seq, q)));
                }
            }
        }
    }
    Ok(done(&basis, &link, expansions, false))
}

pub fn render_chain(chain: &[ChainStep]) -> String {
    let mut out = String::new();
    for st in chain {
        out.push_str(&format!("  {}\n", st.rendered));
        if let Some(a) = &st.action {
            out.push_str(&format!("    --{a}-->\n"));
        }
    }
    out
}
