//! Cutoffs for conjunctions and disjunctions of leaves.

use super::amenability::{check_leaf, helpers_needed, path_states, Graph, LeafReport};
use super::spec::Spec;
use crate::diag::MercuryError;
use crate::phases::StateSet;
use crate::semantics::{Label, LocalTs};
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Clone, Debug, Serialize)]
pub struct ClauseReport {
    pub leaves: Vec<usize>,
    pub cutoff: Option<usize>,
    pub conflict: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffReport {
    pub amenable: bool,
    pub cutoff: Option<usize>,
    pub leaves: Vec<LeafReport>,
    pub clauses: Vec<ClauseReport>,
    pub warnings: Vec<String>,
}

/// A non-internal transition between states used only by one disjunct's paths
/// and states used only by another's.
fn disjointness_conflict(ts: &LocalTs, sets: &[(usize, StateSet)]) -> Option<String> {
    for (i, (li, a)) in sets.iter().enumerate() {
        for (lj, b) in sets.iter().skip(i + 1) {
            let only_a: StateSet = a.difference(b).copied().collect();
            let only_b: StateSet = b.difference(a).copied().collect();
            for t in &ts.transitions {
                if matches!(t.label, Label::Internal | Label::Crash) || t.src == t.dst {
                    continue;
                }
                let crosses = (only_a.contains(&t.src) && only_b.contains(&t.dst))
                    || (only_b.contains(&t.src) && only_a.contains(&t.dst));
                if crosses {
                    return Some(format!(
                        "transition {}------{}------> {} connects the paths of leaves {li} and {lj}",
                        ts.render_state(t.src),
                        ts.label_text(&t.label),
                        ts.render_state(t.dst)
                    ));
                }
            }
        }
    }
    None
}

pub fn compose_cutoff(ts: &LocalTs, spec: &Spec, sets: &[StateSet]) -> Result<CutoffReport, MercuryError> {
    let g = Graph::new(ts);
    compose_with(ts, &g, spec, sets)
}

pub fn compose_with(ts: &LocalTs, g: &Graph, spec: &Spec, sets: &[StateSet]) -> Result<CutoffReport, MercuryError> {
    let leaves = spec.leaves();
    let reports: Vec<LeafReport> = leaves.iter().zip(sets).map(|(l, s)| check_leaf(ts, g, s, l.m())).collect();
    let mut warnings: Vec<String> = Vec::new();
    for (l, r) in leaves.iter().zip(&reports) {
        for w in &r.warnings {
            warnings.push(format!("{}: {w}", l.text()));
        }
    }
    let mut clauses = Vec::new();
    for clause in spec.cnf()? {
        let cutoff = if clause.iter().any(|&i| !reports[i].amenable) {
            None
        } else if clause.len() == 1 {
            reports[clause[0]].cutoff
        } else {
            let states: Vec<(usize, StateSet)> =
                clause.iter().map(|&i| (i, path_states(g, ts.initial, &sets[i]))).collect();
            if let Some(c) = disjointness_conflict(ts, &states) {
                clauses.push(ClauseReport { leaves: clause, cutoff: None, conflict: Some(c) });
                continue;
            }
            let needs: BTreeSet<Label> = clause.iter().flat_map(|&i| reports[i].needed.iter().copied()).collect();
            helpers_needed(ts, g, ts.initial, &needs).map(|h| clause.iter().map(|&i| reports[i].m).sum::<usize>() + h)
        };
        clauses.push(ClauseReport { leaves: clause, cutoff, conflict: None });
    }
    let amenable = clauses.iter().all(|c| c.cutoff.is_some());
    let cutoff = if amenable { clauses.iter().filter_map(|c| c.cutoff).max() } else { None };
    Ok(CutoffReport { amenable, cutoff, leaves: reports, clauses, warnings })
}
