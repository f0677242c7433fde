//! Explicit-state reachability over the counter system at a fixed size.

use crate::analysis::Spec;
use crate::gspcore::{Counter, GspSystem};
use serde::Serialize;
use std::collections::HashMap;
use std::time::Instant;

pub const DEFAULT_MAX_STATES: usize = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Safe,
    Unsafe,
    ResourceExceeded,
}

impl Outcome {
    pub fn text(self) -> &'static str {
        match self {
            Outcome::Safe => "SAFE",
            Outcome::Unsafe => "UNSAFE",
            Outcome::ResourceExceeded => "RESOURCE EXCEEDED",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    /// Action fired to reach `counter`; `None` for the initial state.
    pub action: Option<String>,
    pub counter: Counter,
    pub rendered: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub result: Outcome,
    pub n: u32,
    pub states: usize,
    pub depth: usize,
    pub trace: Option<Vec<TraceStep>>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Limits {
    pub max_states: usize,
    pub max_seconds: Option<f64>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_states: DEFAULT_MAX_STATES, max_seconds: None }
    }
}

/// Leaf targets resolved against the system's states: (m, states).
pub type Targets = Vec<(usize, Vec<usize>)>;

pub fn targets(spec: &Spec, sets: &[crate::phases::StateSet]) -> Targets {
    spec.leaves().iter().zip(sets).map(|(l, s)| (l.m(), s.iter().copied().collect())).collect()
}

/// A leaf holds iff fewer than m processes occupy its states.
pub fn eval_spec(q: &Counter, spec: &Spec, targets: &Targets) -> bool {
    spec.eval(&mut |i| {
        let (m, states) = &targets[i];
        states.iter().map(|&s| q[s] as usize).sum::<usize>() < *m
    })
}

pub fn verify(sys: &GspSystem, spec: &Spec, targets: &Targets, n: u32, limits: &Limits) -> Verdict {
    let start = Instant::now();
    let eng = sys.compile();
    let q0 = sys.initial_counter(n);
    let mut parent: HashMap<Counter, Option<(usize, Counter)>> = HashMap::new();
    parent.insert(q0.clone(), None);
    let finish = |result, depth, trace, states| Verdict {
        result,
        n,
        states,
        depth,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    };
    if !eval_spec(&q0, spec, targets) {
        let trace = build_trace(sys, &parent, &q0);
        return finish(Outcome::Unsafe, 0, Some(trace), 1);
    }
    let mut frontier = vec![q0];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for q in &frontier {
            for (a, nq) in eng.successors(q) {
                if parent.contains_key(&nq) {
                    continue;
                }
                parent.insert(nq.clone(), Some((a, q.clone())));
                if !eval_spec(&nq, spec, targets) {
                    let trace = build_trace(sys, &parent, &nq);
                    return finish(Outcome::Unsafe, depth, Some(trace), parent.len());
                }
                if parent.len() >= limits.max_states {
                    return finish(Outcome::ResourceExceeded, depth, None, parent.len());
                }
                next.push(nq);
            }
            if limits.max_seconds.map_or(false, |t| start.elapsed().as_secs_f64() > t) {
                return finish(Outcome::ResourceExceeded, depth, None, parent.len());
            }
        }
        frontier = next;
    }
    finish(Outcome::Safe, depth.saturating_sub(1), None, parent.len())
}

fn build_trace(sys: &GspSystem, parent: &HashMap<Counter, Option<(usize, Counter)>>, last: &Counter) -> Vec<TraceStep> {
    let mut steps = Vec::new();
    let mut cur = last.clone();
    loop {
        let link = parent[&cur].clone();
        steps.push(TraceStep {
            action: link.as_ref().map(|(a, _)| sys.actions[*a].name.clone()),
            rendered: sys.render_counter(&cur),
            counter: cur,
        });
        match link {
            Some((_, p)) => cur = p,
            None => break,
        }
    }
    steps.reverse();
    steps
}

/// Counter states reachable with `n` processes, or `None` past the cap.
pub fn reachable(sys: &GspSystem, n: u32, cap: usize) -> Option<std::collections::BTreeSet<Counter>> {
    let eng = sys.compile();
    let q0 = sys.initial_counter(n);
    let mut seen = std::collections::BTreeSet::from([q0.clone()]);
    let mut stack = vec![q0];
    while let Some(q) = stack.pop() {
        for (_, nq) in eng.successors(&q) {
            if !seen.contains(&nq) {
                if seen.len() >= cap {
                    return None;
                }
                seen.insert(nq.clone());
                stack.push(nq);
            }
        }
    }
    Some(seen)
}

/// Replay a trace; true iff every step is a successor of the previous one.
pub fn replay(sys: &GspSystem, trace: &[TraceStep]) -> bool {
    let eng = sys.compile();
    let Some(first) = trace.first() else { return false };
    if first.action.is_some() {
        return false;
    }
    trace.windows(2).all(|w| {
        let name = w[1].action.as_deref();
        eng.successors(&w[0].counter).iter().any(|(a, c)| Some(sys.actions[*a].name.as_str()) == name && *c == w[1].counter)
    })
}

pub fn render_trace(trace: &[TraceStep]) -> String {
    let mut out = String::new();
    for (i, st) in trace.iter().enumerate() {
        match &st.action {
            None => out.push_str(&format!("  {i:>3}: {}\n", st.rendered)),
            Some(a) => out.push_str(&format!("  {i:>3}: --{a}--> {}\n", st.rendered)),
        }
    }
    out
}
