//! Cutoff amenability of a single `atmost` leaf.

use crate::phases::StateSet;
use crate::semantics::{classify, Label, LocalTs};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Node expansions allowed for exact simple-path searches before falling back
/// to the conservative answer.
pub const SEARCH_BUDGET: usize = 200_000;
/// Independent simple paths enumerated before giving up on the returning-path condition.
pub const PATH_BUDGET: usize = 20_000;
/// Distinct helper events for which every ordering is tried.
const PERMUTE_LIMIT: usize = 6;

/// Independence used for amenability: the classifier's answer, plus any
/// communication with the environment, which never waits on another system process.
pub fn independent(ts: &LocalTs, l: &Label) -> bool {
    if classify(l).1 {
        return true;
    }
    match *l {
        Label::RecvBr { act, .. } | Label::RecvRz { act, .. } | Label::SendRz { act, .. } => ts.is_env_act(act),
        _ => false,
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub dst: usize,
    pub indep: bool,
    /// Transitions from the source to `dst`, independent ones first.
    pub labels: Vec<Label>,
}

/// State graph over non-crash transitions with parallel transitions merged.
/// An edge is independent when any of its transitions is.
#[derive(Clone, Debug)]
pub struct Graph {
    pub succ: Vec<Vec<Edge>>,
}

impl Graph {
    /// Consensus transitions deciding a value no reachable state proposes are
    /// dropped; validity rules them out globally.
    pub fn new(ts: &LocalTs) -> Graph {
        let mut live = vec![false; ts.crash];
        live[ts.initial] = true;
        let mut offered: BTreeSet<Label> = BTreeSet::new();
        loop {
            let mut changed = false;
            let mut q: VecDeque<usize> = (0..ts.crash).filter(|&s| live[s]).collect();
            while let Some(s) = q.pop_front() {
                for t in ts.outgoing(s) {
                    if t.label == Label::Crash {
                        continue;
                    }
                    if offered.insert(key(&t.label)) {
                        changed = true;
                    }
                    if !live[t.dst] && enabled(ts, &t.label, &offered) {
                        live[t.dst] = true;
                        changed = true;
                        q.push_back(t.dst);
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut succ: Vec<Vec<Edge>> = vec![Vec::new(); ts.crash];
        for s in (0..ts.crash).filter(|&s| live[s]) {
            let mut by_dst: BTreeMap<usize, Vec<Label>> = BTreeMap::new();
            for t in ts.outgoing(s) {
                if t.label != Label::Crash && t.dst != s && enabled(ts, &t.label, &offered) {
                    by_dst.entry(t.dst).or_default().push(t.label);
                }
            }
            for (dst, mut labels) in by_dst {
                labels.sort_by_key(|l| !independent(ts, l));
                let indep = independent(ts, &labels[0]);
                succ[s].push(Edge { dst, indep, labels });
            }
        }
        Graph { succ }
    }

    pub fn edge(&self, u: usize, v: usize) -> Option<&Edge> {
        self.succ[u].iter().find(|e| e.dst == v)
    }

    fn reach(&self, from: &[usize], indep_only: bool, avoid: &BTreeSet<usize>) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.succ.len()];
        let mut q = VecDeque::new();
        for &f in from {
            if !avoid.contains(&f) && parent[f].is_none() {
                parent[f] = Some(f);
                q.push_back(f);
            }
        }
        while let Some(x) = q.pop_front() {
            for e in &self.succ[x] {
                if (indep_only && !e.indep) || avoid.contains(&e.dst) || parent[e.dst].is_some() {
                    continue;
                }
                parent[e.dst] = Some(x);
                q.push_back(e.dst);
            }
        }
        parent
    }

    /// Shortest path from `from` to any state in `goal`, avoiding `avoid`.
    fn path(&self, from: usize, goal: &StateSet, avoid: &BTreeSet<usize>) -> Option<Vec<usize>> {
        let parent = self.reach(&[from], false, avoid);
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; self.succ.len()];
        // BFS order gives shortest paths; recover the nearest goal by walking parents.
        for &g in goal {
            if parent[g].is_some() {
                let mut d = 0;
                let mut c = g;
                while c != from {
                    c = parent[c].unwrap();
                    d += 1;
                }
                dist[g] = d;
                if best.map_or(true, |b| d < dist[b]) {
                    best = Some(g);
                }
            }
        }
        let g = best?;
        let mut p = vec![g];
        let mut c = g;
        while c != from {
            c = parent[c].unwrap();
            p.push(c);
        }
        p.reverse();
        Some(p)
    }

    fn backward(&self, goal: &StateSet) -> StateSet {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.succ.len()];
        for (u, es) in self.succ.iter().enumerate() {
            for e in es {
                preds[e.dst].push(u);
            }
        }
        let mut seen = goal.clone();
        let mut q: VecDeque<usize> = goal.iter().copied().collect();
        while let Some(x) = q.pop_front() {
            for &p in &preds[x] {
                if seen.insert(p) {
                    q.push_back(p);
                }
            }
        }
        seen
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Via {
    /// Every path to the target states is independent.
    AllIndependent,
    /// Deviations from independent paths return via independent transitions.
    Returning,
    /// Dependent reactions are enabled by helper processes.
    Helpers,
    /// No target state is reachable.
    Vacuous,
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub path: Vec<usize>,
    /// Positions `i` such that the step `path[i] -> path[i+1]` is dependent.
    pub dependent: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafReport {
    pub amenable: bool,
    pub m: usize,
    pub helpers: usize,
    pub cutoff: Option<usize>,
    pub via: Option<Via>,
    /// Acting transitions that helper processes must perform.
    pub needed: BTreeSet<Label>,
    pub witness: Option<Witness>,
    pub warnings: Vec<String>,
}

fn step_label(ts: &LocalTs, g: &Graph, u: usize, v: usize) -> String {
    g.edge(u, v).map(|e| ts.label_text(&e.labels[0])).unwrap_or_else(|| "?".into())
}

impl Witness {
    pub fn render(&self, ts: &LocalTs, g: &Graph) -> String {
        let mut out = String::from("Cutoff computation failed: on path\n");
        out.push_str(&ts.render_state(self.path[0]));
        for w in self.path.windows(2) {
            out.push_str(&format!("------{}------>{}", step_label(ts, g, w[0], w[1]), ts.render_state(w[1])));
        }
        out.push_str("\nthe following transition(s) are not independent:");
        for &i in &self.dependent {
            let (u, v) = (self.path[i], self.path[i + 1]);
            out.push_str(&format!(
                "\n{}------{}------> {}",
                ts.render_state(u),
                step_label(ts, g, u, v),
                ts.render_state(v)
            ));
        }
        out
    }

    pub fn to_json(&self, ts: &LocalTs, g: &Graph) -> serde_json::Value {
        let steps: Vec<serde_json::Value> = self
            .path
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                serde_json::json!({
                    "src": ts.render_state(w[0]),
                    "label": step_label(ts, g, w[0], w[1]),
                    "dst": ts.render_state(w[1]),
                    "independent": !self.dependent.contains(&i),
                })
            })
            .collect();
        serde_json::json!(steps)
    }
}

/// Does some simple path from `s0` into `goal` use the edge `u -> v`?
/// `None` when the search budget ran out.
fn on_simple_path(g: &Graph, s0: usize, u: usize, v: usize, goal: &StateSet) -> Option<Option<Vec<usize>>> {
    if v == s0 {
        return Some(None);
    }
    let join = |p: &[usize], q: &[usize]| -> Vec<usize> { p.iter().chain(q.iter()).copied().collect() };
    let single = |x: usize| -> StateSet { [x].into_iter().collect() };
    // Cheap attempts: shortest prefix first, then shortest suffix first.
    if let Some(p) = g.path(s0, &single(u), &single(v)) {
        let avoid: BTreeSet<usize> = p.iter().copied().collect();
        if let Some(q) = g.path(v, goal, &avoid) {
            return Some(Some(join(&p, &q)));
        }
    }
    let mut avoid_u = single(u);
    avoid_u.insert(s0);
    if let Some(q) = g.path(v, goal, &avoid_u) {
        let mut avoid: BTreeSet<usize> = q.iter().copied().collect();
        avoid.remove(&u);
        if let Some(p) = g.path(s0, &single(u), &avoid) {
            return Some(Some(join(&p, &q)));
        }
    }
    // Exhaustive: enumerate simple prefixes s0 ~> u avoiding v.
    let mut budget = SEARCH_BUDGET;
    let mut on_path = vec![false; g.succ.len()];
    let mut stack: Vec<usize> = vec![s0];
    on_path[s0] = true;
    fn dfs(
        g: &Graph,
        x: usize,
        u: usize,
        v: usize,
        goal: &StateSet,
        on_path: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        budget: &mut usize,
    ) -> Option<Option<Vec<usize>>> {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        if x == u {
            let avoid: BTreeSet<usize> = stack.iter().copied().collect();
            if let Some(q) = g.path(v, goal, &avoid) {
                let mut full = stack.clone();
                full.extend(q);
                return Some(Some(full));
            }
            return Some(None);
        }
        for e in &g.succ[x] {
            if on_path[e.dst] || e.dst == v {
                continue;
            }
            on_path[e.dst] = true;
            stack.push(e.dst);
            let r = dfs(g, e.dst, u, v, goal, on_path, stack, budget);
            stack.pop();
            on_path[e.dst] = false;
            match r {
                Some(None) => {}
                other => return other,
            }
        }
        Some(None)
    }
    dfs(g, s0, u, v, goal, &mut on_path, &mut stack, &mut budget)
}

/// Dependent edges lying on some simple path from `s0` into `goal`, each with
/// a witness path. Budget exhaustion counts as lying on a path.
pub fn dependent_edges(g: &Graph, s0: usize, goal: &StateSet) -> Vec<((usize, usize), Option<Vec<usize>>)> {
    let fwd = g.reach(&[s0], false, &BTreeSet::new());
    let bwd = g.backward(goal);
    let mut out = Vec::new();
    for u in 0..g.succ.len() {
        if fwd[u].is_none() {
            continue;
        }
        for e in &g.succ[u] {
            if e.indep || !bwd.contains(&e.dst) {
                continue;
            }
            match on_simple_path(g, s0, u, e.dst, goal) {
                Some(None) => {}
                Some(Some(p)) => out.push(((u, e.dst), Some(p))),
                None => out.push(((u, e.dst), None)),
            }
        }
    }
    out
}

/// Independent simple paths from `s0` into `goal`; `None` past the budget.
pub fn independent_paths(g: &Graph, s0: usize, goal: &StateSet) -> Option<Vec<Vec<usize>>> {
    let mut paths = Vec::new();
    let mut on_path = vec![false; g.succ.len()];
    let mut stack = vec![s0];
    on_path[s0] = true;
    let mut budget = SEARCH_BUDGET;
    fn dfs(
        g: &Graph,
        goal: &StateSet,
        on_path: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        paths: &mut Vec<Vec<usize>>,
        budget: &mut usize,
    ) -> bool {
        if *budget == 0 || paths.len() > PATH_BUDGET {
            return false;
        }
        *budget -= 1;
        let x = *stack.last().unwrap();
        if goal.contains(&x) {
            paths.push(stack.clone());
        }
        for e in &g.succ[x] {
            if !e.indep || on_path[e.dst] {
                continue;
            }
            on_path[e.dst] = true;
            stack.push(e.dst);
            let ok = dfs(g, goal, on_path, stack, paths, budget);
            stack.pop();
            on_path[e.dst] = false;
            if !ok {
                return false;
            }
        }
        true
    }
    if dfs(g, goal, &mut on_path, &mut stack, &mut paths, &mut budget) {
        Some(paths)
    } else {
        None
    }
}

/// Every maximal path out of `from` returns to `home` through independent edges.
fn returns_to(g: &Graph, from: usize, home: usize) -> bool {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color: BTreeMap<usize, u8> = BTreeMap::new();
    fn go(g: &Graph, x: usize, home: usize, color: &mut BTreeMap<usize, u8>) -> bool {
        if x == home {
            return true;
        }
        match color.get(&x) {
            Some(1) => return false,
            Some(2) => return true,
            _ => {}
        }
        if g.succ[x].is_empty() {
            return false;
        }
        color.insert(x, 1);
        for e in &g.succ[x] {
            if !e.indep || !go(g, e.dst, home, color) {
                return false;
            }
        }
        color.insert(x, 2);
        true
    }
    go(g, from, home, &mut color)
}

fn returning_condition(g: &Graph, paths: &[Vec<usize>]) -> bool {
    if paths.is_empty() {
        return false;
    }
    let mut memo: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    for p in paths {
        let on: BTreeSet<usize> = p.iter().copied().collect();
        for &s in p {
            for e in &g.succ[s] {
                let ok = if on.contains(&e.dst) {
                    e.indep
                } else {
                    *memo.entry((e.dst, s)).or_insert_with(|| returns_to(g, e.dst, s))
                };
                if !ok {
                    return false;
                }
            }
        }
    }
    true
}

/// Label with rendezvous targets erased, for matching partners.
fn key(l: &Label) -> Label {
    match *l {
        Label::SendRz { act, payload, .. } => Label::SendRz { act, payload, target: None },
        other => other,
    }
}

/// Consensus outcomes are kept only when every decided value has a proposer.
fn enabled(_ts: &LocalTs, l: &Label, offered: &BTreeSet<Label>) -> bool {
    match *l {
        Label::Cons { id, decided, .. } => (0..64)
            .filter(|b| decided >> b & 1 == 1)
            .all(|b| offered.contains(&Label::Cons { id, decided: 1 << b, acting: true })),
        _ => true,
    }
}

/// Acting transition that enables a dependent one, ignoring rendezvous targets.
pub fn counterpart(ts: &LocalTs, l: &Label) -> Option<Label> {
    match *l {
        Label::RecvBr { act, payload } if !ts.is_env_act(act) => Some(Label::SendBr { act, payload }),
        Label::RecvRz { act, payload } if !ts.is_env_act(act) => Some(Label::SendRz { act, payload, target: None }),
        Label::PartLose { id } => Some(Label::PartWin { id }),
        Label::Cons { id, decided, acting: false } => Some(Label::Cons { id, decided, acting: true }),
        _ => None,
    }
}

fn same_need(l: &Label, need: &Label) -> bool {
    match (l, need) {
        (Label::SendRz { act, payload, .. }, Label::SendRz { act: a2, payload: p2, .. }) => act == a2 && payload == p2,
        _ => l == need,
    }
}

/// Destinations of `need` transitions reachable from `from` by independent edges.
fn perform(ts: &LocalTs, g: &Graph, from: &[usize], need: &Label) -> Vec<usize> {
    let parent = g.reach(from, true, &BTreeSet::new());
    let mut out = BTreeSet::new();
    for s in 0..ts.crash {
        if parent[s].is_some() {
            for t in ts.outgoing(s) {
                if same_need(&t.label, need) {
                    out.insert(t.dst);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Fewest helper processes that together perform every needed acting transition,
/// each helper walking from `s0` over independent edges. `None` if some need is unreachable.
pub fn helpers_needed(ts: &LocalTs, g: &Graph, s0: usize, needs: &BTreeSet<Label>) -> Option<usize> {
    let needs: Vec<Label> = needs.iter().copied().collect();
    for n in &needs {
        if perform(ts, g, &[s0], n).is_empty() {
            return None;
        }
    }
    if needs.is_empty() {
        return Some(0);
    }
    if needs.len() > PERMUTE_LIMIT {
        return Some(needs.len());
    }
    let mut best = needs.len();
    let mut order: Vec<usize> = (0..needs.len()).collect();
    permute(&mut order, 0, &mut |ord| {
        let mut walks = 1;
        let mut pos = vec![s0];
        for &i in ord {
            let next = perform(ts, g, &pos, &needs[i]);
            if next.is_empty() {
                walks += 1;
                pos = perform(ts, g, &[s0], &needs[i]);
            } else {
                pos = next;
            }
        }
        best = best.min(walks);
    });
    Some(best)
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

pub fn check_leaf(ts: &LocalTs, g: &Graph, goal: &StateSet, m: usize) -> LeafReport {
    let s0 = ts.initial;
    let mut report = LeafReport {
        amenable: true,
        m,
        helpers: 0,
        cutoff: Some(m),
        via: None,
        needed: BTreeSet::new(),
        witness: None,
        warnings: Vec::new(),
    };
    let reachable = g.reach(&[s0], false, &BTreeSet::new());
    if !goal.iter().any(|&s| reachable[s].is_some()) {
        report.via = Some(Via::Vacuous);
        report.warnings.push("property is unfalsifiable".into());
        return report;
    }
    let deps = dependent_edges(g, s0, goal);
    if deps.is_empty() {
        report.via = Some(Via::AllIndependent);
        return report;
    }
    if let Some(paths) = independent_paths(g, s0, goal) {
        if returning_condition(g, &paths) {
            report.via = Some(Via::Returning);
            return report;
        }
    }
    let witness = deps.iter().find_map(|(_, p)| p.clone()).map(|path| {
        let dependent = path
            .windows(2)
            .enumerate()
            .filter(|(_, w)| g.edge(w[0], w[1]).map_or(false, |e| !e.indep))
            .map(|(i, _)| i)
            .collect();
        Witness { path, dependent }
    });
    let mut needs = BTreeSet::new();
    let mut missing = false;
    for ((u, v), _) in &deps {
        let e = g.edge(*u, *v).unwrap();
        let options: Vec<Label> = e.labels.iter().filter_map(|l| counterpart(ts, l)).collect();
        match options.iter().find(|n| !perform(ts, g, &[s0], n).is_empty()) {
            Some(n) => {
                needs.insert(*n);
            }
            None => missing = true,
        }
    }
    let helpers = if missing { None } else { helpers_needed(ts, g, s0, &needs) };
    match helpers {
        Some(h) => {
            report.helpers = h;
            report.cutoff = Some(m + h);
            report.via = Some(Via::Helpers);
            report.needed = needs;
        }
        None => {
            report.amenable = false;
            report.cutoff = None;
            report.witness = witness;
        }
    }
    report
}

/// States lying on independent simple paths from `s0` into `goal`. Past the
/// enumeration budget, every state both independently reachable and co-reachable.
pub fn path_states(g: &Graph, s0: usize, goal: &StateSet) -> StateSet {
    if let Some(paths) = independent_paths(g, s0, goal) {
        return paths.into_iter().flatten().collect();
    }
    let fwd = g.reach(&[s0], true, &BTreeSet::new());
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); g.succ.len()];
    for (u, es) in g.succ.iter().enumerate() {
        for e in es.iter().filter(|e| e.indep) {
            preds[e.dst].push(u);
        }
    }
    let mut bwd = goal.clone();
    let mut q: VecDeque<usize> = goal.iter().copied().collect();
    while let Some(x) = q.pop_front() {
        for &p in &preds[x] {
            if bwd.insert(p) {
                q.push_back(p);
            }
        }
    }
    bwd.into_iter().filter(|&s| fwd[s].is_some()).collect()
}
