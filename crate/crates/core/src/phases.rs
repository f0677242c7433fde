//! Event source/destination sets, the adjacency relation R, and phase construction.

use crate::semantics::{EventId, Label, LocalTs, Role};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

pub type StateSet = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EventInfo {
    pub event: EventId,
    pub src: StateSet,
    pub dst: StateSet,
    pub firable_in: BTreeSet<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseSet {
    pub phases: Vec<StateSet>,
    pub events: BTreeMap<EventId, EventInfo>,
    /// Phase indices containing each state (crash state excluded).
    pub membership: Vec<Vec<usize>>,
    /// Pairs of phases that share states without being R-connected.
    pub overlaps: Vec<(usize, usize)>,
}

pub fn src_dst_sets(ts: &LocalTs) -> BTreeMap<EventId, (StateSet, StateSet)> {
    let mut m: BTreeMap<EventId, (StateSet, StateSet)> = BTreeMap::new();
    for a in 0..ts.core.acts.len() {
        m.insert(EventId::Act(a), Default::default());
    }
    for a in 0..ts.agr_names.len() {
        m.insert(EventId::Agr(a), Default::default());
    }
    for t in &ts.transitions {
        if let Some(e) = t.label.event() {
            let entry = m.get_mut(&e).unwrap();
            entry.0.insert(t.src);
            entry.1.insert(t.dst);
        }
    }
    m
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Pairs related by R: internal transitions (both directions) and co-membership
/// in the source/destination states of one rendezvous action. Crash edges excluded.
pub fn relation_r(ts: &LocalTs) -> BTreeSet<(usize, usize)> {
    let mut r = BTreeSet::new();
    for t in &ts.transitions {
        if t.label == Label::Internal && t.src != t.dst {
            r.insert((t.src, t.dst));
            r.insert((t.dst, t.src));
        }
    }
    for (e, (src, dst)) in src_dst_sets(ts) {
        if let EventId::Act(a) = e {
            if ts.is_sync(e) {
                continue;
            }
            let _ = a;
            let all: Vec<usize> = src.union(&dst).copied().collect();
            for &x in &all {
                for &y in &all {
                    if x != y {
                        r.insert((x, y));
                    }
                }
            }
        }
    }
    r
}

/// Connected components of R (as a representative per state) and their sizes.
fn components(ts: &LocalTs) -> (Vec<usize>, Vec<usize>) {
    let n = ts.crash;
    let mut d = Dsu((0..n).collect());
    for t in &ts.transitions {
        if t.label == Label::Internal && t.src != t.dst && t.dst != ts.crash {
            d.union(t.src, t.dst);
        }
    }
    for (e, (src, dst)) in src_dst_sets(ts) {
        if matches!(e, EventId::Act(_)) && !ts.is_sync(e) {
            let all: Vec<usize> = src.union(&dst).copied().filter(|&s| s != ts.crash).collect();
            for w in all.windows(2) {
                d.union(w[0], w[1]);
            }
        }
    }
    let rep: Vec<usize> = (0..n).map(|s| d.find(s)).collect();
    let mut size = vec![0; n];
    for &r in &rep {
        size[r] += 1;
    }
    (rep, size)
}

pub fn compute_phases(ts: &LocalTs) -> PhaseSet {
    let sd = src_dst_sets(ts);
    let (rep, size) = components(ts);
    let mut comp_members: BTreeMap<usize, StateSet> = BTreeMap::new();
    for (s, &r) in rep.iter().enumerate() {
        comp_members.entry(r).or_default().insert(s);
    }
    let sync: Vec<EventId> = ts.sync_events();
    let mut initial: Vec<StateSet> = Vec::new();
    for e in &sync {
        let (src, dst) = &sd[e];
        for set in [src, dst] {
            let set: StateSet = set.iter().copied().filter(|&s| s != ts.crash).collect();
            if !set.is_empty() && !initial.contains(&set) {
                initial.push(set);
            }
        }
    }
    let mut phases: Vec<StateSet> = if initial.is_empty() {
        vec![(0..ts.crash).collect()]
    } else {
        initial
            .iter()
            .map(|x| x.iter().flat_map(|s| comp_members[&rep[*s]].iter().copied()).collect())
            .collect()
    };
    // Merge phases sharing a non-trivial R component, to a fixpoint.
    loop {
        let mut d = Dsu((0..phases.len()).collect());
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, p) in phases.iter().enumerate() {
            for &s in p {
                if size[rep[s]] > 1 {
                    if let Some(&j) = owner.get(&rep[s]) {
                        d.union(i, j);
                    } else {
                        owner.insert(rep[s], i);
                    }
                }
            }
        }
        let mut merged: BTreeMap<usize, StateSet> = BTreeMap::new();
        for (i, p) in phases.iter().enumerate() {
            merged.entry(d.find(i)).or_default().extend(p.iter().copied());
        }
        let mut next: Vec<StateSet> = Vec::new();
        for p in merged.into_values() {
            if !next.contains(&p) {
                next.push(p);
            }
        }
        if next.len() == phases.len() {
            phases = next;
            break;
        }
        phases = next;
    }
    phases.sort();
    let mut membership = vec![Vec::new(); ts.crash];
    for (i, p) in phases.iter().enumerate() {
        for &s in p {
            membership[s].push(i);
        }
    }
    let mut overlaps = Vec::new();
    for i in 0..phases.len() {
        for j in i + 1..phases.len() {
            if !phases[i].is_disjoint(&phases[j]) {
                overlaps.push((i, j));
            }
        }
    }
    let mut events = BTreeMap::new();
    for e in sync {
        let (src, dst) = sd[&e].clone();
        let firable_in = (0..phases.len()).filter(|&x| firable_states(ts, e, &phases[x])).collect();
        events.insert(e, EventInfo { event: e, src, dst, firable_in });
    }
    PhaseSet { phases, events, membership, overlaps }
}

fn firable_states(ts: &LocalTs, e: EventId, set: &StateSet) -> bool {
    set.iter().any(|&s| ts.outgoing(s).any(|t| t.label.event() == Some(e) && ts.classify(t).0 == Role::Acting))
}

impl PhaseSet {
    pub fn firable(&self, e: EventId, phase: usize) -> bool {
        self.events.get(&e).map_or(false, |i| i.firable_in.contains(&phase))
    }

    pub fn count(&self) -> usize {
        self.phases.len()
    }

    /// Union of the phases containing `s`; every state when `s` lies in no phase.
    pub fn phase_union(&self, ts: &LocalTs, s: usize) -> StateSet {
        if s >= self.membership.len() || self.membership[s].is_empty() {
            return (0..ts.crash).collect();
        }
        self.membership[s].iter().flat_map(|&p| self.phases[p].iter().copied()).collect()
    }

    pub fn to_json(&self, ts: &LocalTs) -> serde_json::Value {
        let phases: Vec<Vec<String>> =
            self.phases.iter().map(|p| p.iter().map(|&s| ts.render_state(s)).collect()).collect();
        let events: Vec<serde_json::Value> = self
            .events
            .values()
            .map(|e| {
                serde_json::json!({
                    "event": ts.event_name(e.event),
                    "src": e.src.iter().map(|&s| ts.render_state(s)).collect::<Vec<_>>(),
                    "dst": e.dst.iter().map(|&s| ts.render_state(s)).collect::<Vec<_>>(),
                    "firable_in": e.firable_in,
                })
            })
            .collect();
        serde_json::json!({ "count": self.phases.len(), "phases": phases, "events": events, "overlaps": self.overlaps })
    }
}
