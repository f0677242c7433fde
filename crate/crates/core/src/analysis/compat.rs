//! Phase compatibility and the fragment side conditions.

use crate::phases::{PhaseSet, StateSet};
use crate::semantics::{EventId, Label, LocalTs, Role};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub condition: &'static str,
    pub state: String,
    pub event: String,
    pub message: String,
    pub suggestions: Vec<String>,
}

impl Violation {
    pub fn render(&self) -> String {
        let mut out = self.message.clone();
        if !self.suggestions.is_empty() {
            out.push_str("\nSuggestions to solve this:");
            for s in &self.suggestions {
                out.push_str("\n - ");
                out.push_str(s);
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatReport {
    pub compatible: bool,
    pub violations: Vec<Violation>,
}

pub fn edge_text(src: &str, label: &str, dst: &str) -> String {
    format!("add transition {src}\t------{label}------>\t{dst}")
}

pub const ANYWHERE: &str = "(Anywhere!,{})";

fn has_role(ts: &LocalTs, s: usize, e: EventId, role: Role) -> bool {
    ts.outgoing(s).any(|t| t.label.event() == Some(e) && ts.classify(t).0 == role)
}

fn reacting_dsts(ts: &LocalTs, s: usize, e: EventId) -> BTreeSet<usize> {
    ts.outgoing(s)
        .filter(|t| t.label.event() == Some(e) && ts.classify(t).0 == Role::Reacting)
        .map(|t| t.dst)
        .collect()
}

fn local_step(l: &Label) -> bool {
    matches!(l, Label::Internal | Label::SendRz { .. } | Label::RecvRz { .. })
}

/// States that reach `goal` using internal and rendezvous transitions, staying inside `within`.
fn backward_closure(ts: &LocalTs, goal: &StateSet, within: Option<&StateSet>) -> StateSet {
    let mut preds: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in &ts.transitions {
        if local_step(&t.label) && t.src != t.dst {
            if let Some(w) = within {
                if !w.contains(&t.src) || !w.contains(&t.dst) {
                    continue;
                }
            }
            preds.entry(t.dst).or_default().push(t.src);
        }
    }
    let mut seen: StateSet = goal.clone();
    let mut q: VecDeque<usize> = goal.iter().copied().collect();
    while let Some(x) = q.pop_front() {
        for &p in preds.get(&x).map(|v| v.as_slice()).unwrap_or(&[]) {
            if seen.insert(p) {
                q.push_back(p);
            }
        }
    }
    seen
}

fn suggestions(ts: &LocalTs, at: usize, e: EventId, dsts: &BTreeSet<usize>) -> Vec<String> {
    let src = ts.render_state(at);
    let label = format!("R({})", ts.event_name(e));
    let mut out: Vec<String> = dsts.iter().map(|&d| edge_text(&src, &label, &ts.render_state(d))).collect();
    out.push(edge_text(&src, &label, ANYWHERE));
    out
}

pub fn check_compat(ts: &LocalTs, ph: &PhaseSet) -> CompatReport {
    let mut vs: Vec<Violation> = Vec::new();
    let sync = ts.sync_events();
    let n = ts.crash;

    // Every state with an acting transition on e also reacts to e.
    for s in 0..n {
        for &e in &sync {
            if has_role(ts, s, e, Role::Acting) && !has_role(ts, s, e, Role::Reacting) {
                let dsts: BTreeSet<usize> = ts
                    .outgoing(s)
                    .filter(|t| t.label.event() == Some(e) && ts.classify(t).0 == Role::Acting)
                    .map(|t| t.dst)
                    .collect();
                vs.push(Violation {
                    condition: "acting_without_reacting",
                    state: ts.render_state(s),
                    event: ts.event_name(e).to_string(),
                    message: format!(
                        "{} needs a corresponding reacting transition on {}",
                        ts.render_state(s),
                        ts.event_name(e)
                    ),
                    suggestions: suggestions(ts, s, e, &dsts),
                });
            }
        }
    }

    // Internal moves must not strand other phase members away from a pending reaction.
    let mut closures: BTreeMap<(usize, EventId), StateSet> = BTreeMap::new();
    let mut reported: BTreeSet<(usize, EventId)> = BTreeSet::new();
    for t in &ts.transitions {
        if t.label != Label::Internal || t.src == t.dst || t.dst == n {
            continue;
        }
        for &f in &sync {
            if !has_role(ts, t.dst, f, Role::Reacting) {
                continue;
            }
            for &x in &ph.membership[t.src] {
                if !ph.phases[x].contains(&t.dst) || !ph.firable(f, x) {
                    continue;
                }
                let phase = &ph.phases[x];
                let good = closures.entry((x, f)).or_insert_with(|| {
                    let goal: StateSet = phase.iter().copied().filter(|&s| has_role(ts, s, f, Role::Reacting)).collect();
                    backward_closure(ts, &goal, Some(phase))
                });
                for &u in phase {
                    if good.contains(&u) || !reported.insert((u, f)) {
                        continue;
                    }
                    vs.push(Violation {
                        condition: "internal_strands_reaction",
                        state: ts.render_state(u),
                        event: ts.event_name(f).to_string(),
                        message: format!(
                            "{} cannot reach a reacting transition on {} within its phase, but {} can after tau",
                            ts.render_state(u),
                            ts.event_name(f),
                            ts.render_state(t.src)
                        ),
                        suggestions: suggestions(ts, u, f, &reacting_dsts(ts, t.dst, f)),
                    });
                }
            }
        }
    }

    // After an event, all participants can react to the events it enables.
    let sd = crate::phases::src_dst_sets(ts);
    let mut global_closure: BTreeMap<EventId, StateSet> = BTreeMap::new();
    for &e in &sync {
        let acting: Vec<_> = ts
            .transitions
            .iter()
            .filter(|t| t.label.event() == Some(e) && ts.classify(t).0 == Role::Acting)
            .collect();
        let reacting: Vec<_> = ts
            .transitions
            .iter()
            .filter(|t| t.label.event() == Some(e) && ts.classify(t).0 == Role::Reacting)
            .collect();
        let dst_e = &sd[&e].1;
        for &f in &sync {
            let firable = dst_e.iter().any(|&d| d != n && has_role(ts, d, f, Role::Acting));
            if !firable {
                continue;
            }
            let Some(model) = acting.iter().find(|t| has_role(ts, t.dst, f, Role::Reacting)) else { continue };
            let model_dsts = reacting_dsts(ts, model.dst, f);
            for t in &acting {
                if !has_role(ts, t.dst, f, Role::Reacting) && reported.insert((t.dst, f)) {
                    vs.push(Violation {
                        condition: "event_strands_winner",
                        state: ts.render_state(t.dst),
                        event: ts.event_name(f).to_string(),
                        message: format!(
                            "{} is entered by acting on {} and needs a reacting transition on {}",
                            ts.render_state(t.dst),
                            ts.event_name(e),
                            ts.event_name(f)
                        ),
                        suggestions: suggestions(ts, t.dst, f, &model_dsts),
                    });
                }
            }
            let good = global_closure.entry(f).or_insert_with(|| {
                let goal: StateSet = (0..n).filter(|&s| has_role(ts, s, f, Role::Reacting)).collect();
                backward_closure(ts, &goal, None)
            });
            for t in &reacting {
                if t.dst != n && !good.contains(&t.dst) && reported.insert((t.dst, f)) {
                    vs.push(Violation {
                        condition: "event_strands_reactor",
                        state: ts.render_state(t.dst),
                        event: ts.event_name(f).to_string(),
                        message: format!(
                            "{} is entered by reacting to {} and cannot reach a reacting transition on {}",
                            ts.render_state(t.dst),
                            ts.event_name(e),
                            ts.event_name(f)
                        ),
                        suggestions: suggestions(ts, t.dst, f, &model_dsts),
                    });
                }
            }
        }
    }
    CompatReport { compatible: vs.is_empty(), violations: vs }
}

/// Rendezvous acts (system only) received at more than one location of a phase.
pub fn rz_receive_conflicts(ts: &LocalTs, ph: &PhaseSet) -> Vec<String> {
    let mut out = Vec::new();
    for (a, decl) in ts.core.acts.iter().enumerate() {
        if decl.env || decl.mode == crate::frontend::ast::Mode::Broadcast {
            continue;
        }
        for (x, phase) in ph.phases.iter().enumerate() {
            let recv: BTreeSet<usize> = phase
                .iter()
                .copied()
                .filter(|&s| ts.outgoing(s).any(|t| matches!(t.label, Label::RecvRz { act, .. } if act == a)))
                .collect();
            let locs: BTreeSet<&str> = recv.iter().map(|&s| ts.loc_name(s)).collect();
            if locs.len() > 1 {
                out.push(format!(
                    "rendezvous `{}` is received at {} locations of phase {x} ({})",
                    decl.name.name,
                    locs.len(),
                    locs.into_iter().collect::<Vec<_>>().join(", ")
                ));
            }
        }
    }
    out
}
