//! GSP-Core systems: rewrite from a local TS, counter semantics, and abstraction.

mod bits;
mod check;
mod rewrite;

pub use bits::Bits;
pub use check::{check_conditions, ConditionReport};
pub use rewrite::rewrite;

use crate::diag::MercuryError;
use crate::semantics::IndexedState;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const FORMAT: &str = "mercury-gsp/1";

/// Process counts per state, crash and env dimensions included.
pub type Counter = Vec<u32>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// Exactly `arity` senders, one per slot.
    Sender,
    /// Up to `arity` senders from one shared slot, as many as can be filled.
    Maximal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Internal,
    Crash,
    Broadcast,
    EnvBroadcast,
    Rendezvous,
    EnvSend,
    EnvReceive,
    Partition,
    Consensus,
    #[default]
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GspAction {
    pub name: String,
    pub kind: ActionKind,
    pub arity: usize,
    #[serde(default)]
    pub origin: Origin,
    pub guard: Vec<usize>,
    /// Sender: one transition set per slot. Maximal: a single shared set.
    pub slots: Vec<Vec<(usize, usize)>>,
    /// Receive map as (src, dst) pairs; functional.
    pub recv_map: Vec<(usize, usize)>,
    /// States outside the receive map stay put instead of blocking.
    #[serde(default)]
    pub identity: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GspSystem {
    pub format: String,
    pub states: Vec<String>,
    pub initial: usize,
    pub crash: usize,
    pub env: Option<usize>,
    pub actions: Vec<GspAction>,
}

impl GspAction {
    pub fn sources(&self) -> BTreeSet<usize> {
        self.slots.iter().flatten().map(|t| t.0).collect()
    }

    pub fn targets(&self) -> BTreeSet<usize> {
        self.slots.iter().flatten().map(|t| t.1).collect()
    }
}

impl GspSystem {
    pub fn dims(&self) -> usize {
        self.states.len()
    }

    /// Initial counter with `n` system processes in the initial state.
    pub fn initial_counter(&self, n: u32) -> Counter {
        let mut q = vec![0; self.dims()];
        q[self.initial] = n;
        if let Some(e) = self.env {
            q[e] = 1;
        }
        q
    }

    /// Abstraction of an indexed global state: occurrence count per local state.
    pub fn alpha(&self, q: &IndexedState) -> Counter {
        let mut c = vec![0; self.dims()];
        for &s in &q.procs {
            c[s] += 1;
        }
        if let Some(e) = self.env {
            c[e] = 1;
        }
        c
    }

    pub fn render_counter(&self, q: &Counter) -> String {
        let parts: Vec<String> = q
            .iter()
            .enumerate()
            .filter(|(i, c)| **c > 0 && Some(*i) != self.env)
            .map(|(i, c)| format!("{}: {c}", self.states[i]))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("gsp system serializes")
    }

    pub fn from_json(text: &str) -> Result<GspSystem, MercuryError> {
        let sys: GspSystem = serde_json::from_str(text).map_err(|e| MercuryError::Gsp(format!("invalid GSP JSON: {e}")))?;
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<(), MercuryError> {
        let n = self.dims();
        let bad = |m: String| Err(MercuryError::Gsp(m));
        if self.format != FORMAT {
            return bad(format!("unsupported format `{}`, expected `{FORMAT}`", self.format));
        }
        if self.initial >= n || self.crash >= n || self.env.map_or(false, |e| e >= n) {
            return bad("state index out of range".into());
        }
        for a in &self.actions {
            let ids = a.guard.iter().chain(a.slots.iter().flatten().flat_map(|t| [&t.0, &t.1]));
            if ids.chain(a.recv_map.iter().flat_map(|t| [&t.0, &t.1])).any(|&s| s >= n) {
                return bad(format!("action `{}` references an unknown state", a.name));
            }
            if a.arity == 0 {
                return bad(format!("action `{}` has arity 0", a.name));
            }
            let expected = if a.kind == ActionKind::Sender { a.arity } else { 1 };
            if a.slots.len() != expected {
                return bad(format!("action `{}` has {} slots, expected {expected}", a.name, a.slots.len()));
            }
            let mut seen = BTreeSet::new();
            for (s, _) in &a.recv_map {
                if !seen.insert(s) {
                    return bad(format!("action `{}` has a non-functional receive map at state {s}", a.name));
                }
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Engine<'_> {
        Engine::new(self)
    }
}

/// Dense, indexed form of a system for fast stepping.
pub struct Engine<'a> {
    pub sys: &'a GspSystem,
    pub guard: Vec<Bits>,
    recv: Vec<Vec<Option<usize>>>,
    sources: Vec<Vec<usize>>,
    /// Action ids whose slots read each state, in name order.
    by_source: Vec<Vec<usize>>,
    /// Actions whose guard contains each state.
    guarded_by: Vec<Bits>,
    order: Vec<usize>,
}

/// One way of firing an action: the chosen slot transitions.
pub type Firing = Vec<(usize, usize)>;

impl<'a> Engine<'a> {
    fn new(sys: &'a GspSystem) -> Engine<'a> {
        let n = sys.dims();
        let mut order: Vec<usize> = (0..sys.actions.len()).collect();
        order.sort_by(|&a, &b| sys.actions[a].name.cmp(&sys.actions[b].name));
        let mut rank = vec![0; sys.actions.len()];
        for (r, &a) in order.iter().enumerate() {
            rank[a] = r;
        }
        let mut guard = Vec::new();
        let mut recv = Vec::new();
        let mut sources = Vec::new();
        let mut by_source = vec![Vec::new(); n];
        for (i, a) in sys.actions.iter().enumerate() {
            guard.push(Bits::from_iter(n, a.guard.iter().copied()));
            let mut m = vec![None; n];
            for &(s, t) in &a.recv_map {
                m[s] = Some(t);
            }
            if a.identity {
                for (s, slot) in m.iter_mut().enumerate() {
                    if slot.is_none() {
                        *slot = Some(s);
                    }
                }
            }
            recv.push(m);
            let src: Vec<usize> = a.sources().into_iter().collect();
            for &s in &src {
                by_source[s].push(i);
            }
            sources.push(src);
        }
        for v in &mut by_source {
            v.sort_by_key(|&a| rank[a]);
        }
        let mut guarded_by = vec![Bits::new(sys.actions.len()); n];
        for (a, g) in guard.iter().enumerate() {
            for s in g.iter() {
                guarded_by[s].insert(a);
            }
        }
        Engine { sys, guard, recv, sources, by_source, guarded_by, order }
    }

    pub fn support(&self, q: &Counter) -> Bits {
        Bits::from_iter(q.len(), q.iter().enumerate().filter(|(_, c)| **c > 0).map(|(i, _)| i))
    }

    pub fn recv_of(&self, a: usize, s: usize) -> Option<usize> {
        self.recv[a][s]
    }

    /// Some slot assignment is covered by `q`.
    pub fn can_fire(&self, q: &Counter, a: usize) -> bool {
        let act = &self.sys.actions[a];
        match act.kind {
            ActionKind::Maximal => self.sources[a].iter().any(|&s| q[s] > 0),
            ActionKind::Sender if act.arity == 1 => self.sources[a].iter().any(|&s| q[s] > 0),
            ActionKind::Sender => {
                let mut rest = q.clone();
                fill(&act.slots, 0, &mut rest)
            }
        }
    }

    /// Ready action ids: fireable with the support inside the guard.
    pub fn ready(&self, q: &Counter) -> Bits {
        let mut cands: Option<Bits> = None;
        for (s, &c) in q.iter().enumerate() {
            if c > 0 {
                match &mut cands {
                    None => cands = Some(self.guarded_by[s].clone()),
                    Some(b) => b.intersect_with(&self.guarded_by[s]),
                }
            }
        }
        let n = self.sys.actions.len();
        let cands = cands.unwrap_or_else(|| Bits::from_iter(n, 0..n));
        Bits::from_iter(n, cands.iter().filter(|&a| self.can_fire(q, a)))
    }

    /// Slot choices of action `a` available in `q`, without the receive check.
    pub fn firings(&self, q: &Counter, a: usize) -> Vec<Firing> {
        let act = &self.sys.actions[a];
        let mut out = Vec::new();
        match act.kind {
            ActionKind::Sender => {
                let mut rest = q.clone();
                let mut cur = Vec::new();
                assign(&act.slots, 0, &mut rest, &mut cur, &mut out);
            }
            ActionKind::Maximal => {
                let avail: u32 = self.sources[a].iter().map(|&s| q[s]).sum();
                let m = (act.arity as u32).min(avail) as usize;
                if m == 0 {
                    return out;
                }
                let mut rest = q.clone();
                let mut cur = Vec::new();
                multiset(&act.slots[0], 0, m, &mut rest, &mut cur, &mut out);
            }
        }
        for f in &mut out {
            f.sort();
        }
        out.sort();
        out.dedup();
        out
    }

    /// Successor under a firing, or `None` when a remaining process cannot receive.
    pub fn apply(&self, q: &Counter, a: usize, firing: &Firing) -> Option<Counter> {
        let mut rest = q.clone();
        for &(s, _) in firing {
            rest[s] -= 1;
        }
        let mut next = vec![0; q.len()];
        for (s, &c) in rest.iter().enumerate() {
            if c > 0 {
                next[self.recv[a][s]?] += c;
            }
        }
        for &(_, d) in firing {
            next[d] += 1;
        }
        Some(next)
    }

    /// All successors, ordered by action name then counter.
    pub fn successors(&self, q: &Counter) -> Vec<(usize, Counter)> {
        let supp = self.support(q);
        let mut cands = BTreeSet::new();
        for s in supp.iter() {
            for &a in &self.by_source[s] {
                cands.insert(self.rank_of(a));
            }
        }
        let mut out = Vec::new();
        for r in cands {
            let a = self.order[r];
            if !supp.is_subset(&self.guard[a]) {
                continue;
            }
            let mut succ: Vec<Counter> = self.firings(q, a).iter().filter_map(|f| self.apply(q, a, f)).collect();
            succ.sort();
            succ.dedup();
            out.extend(succ.into_iter().map(|c| (a, c)));
        }
        out
    }

    fn rank_of(&self, a: usize) -> usize {
        self.order.iter().position(|&x| x == a).unwrap()
    }

    pub fn action_order(&self) -> &[usize] {
        &self.order
    }
}

fn fill(slots: &[Vec<(usize, usize)>], i: usize, rest: &mut Counter) -> bool {
    if i == slots.len() {
        return true;
    }
    let srcs: BTreeSet<usize> = slots[i].iter().map(|t| t.0).collect();
    for s in srcs {
        if rest[s] > 0 {
            rest[s] -= 1;
            let ok = fill(slots, i + 1, rest);
            rest[s] += 1;
            if ok {
                return true;
            }
        }
    }
    false
}

fn assign(slots: &[Vec<(usize, usize)>], i: usize, rest: &mut Counter, cur: &mut Firing, out: &mut Vec<Firing>) {
    if i == slots.len() {
        out.push(cur.clone());
        return;
    }
    for &(s, d) in &slots[i] {
        if rest[s] > 0 {
            rest[s] -= 1;
            cur.push((s, d));
            assign(slots, i + 1, rest, cur, out);
            cur.pop();
            rest[s] += 1;
        }
    }
}

fn multiset(ts: &[(usize, usize)], from: usize, m: usize, rest: &mut Counter, cur: &mut Firing, out: &mut Vec<Firing>) {
    if cur.len() == m {
        out.push(cur.clone());
        return;
    }
    for j in from..ts.len() {
        let (s, d) = ts[j];
        if rest[s] > 0 {
            rest[s] -= 1;
            cur.push((s, d));
            multiset(ts, j, m, rest, cur, out);
            cur.pop();
            rest[s] += 1;
        }
    }
}
