use crate::diag::{DiagKind, Diagnostic, MercuryError};
use crate::frontend::ast::{BinOp, Expr, ExprKind, Mode};
use crate::lowering::{CoreKind, CoreProcess, Participants, Update};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, VecDeque};

pub const BOT: i64 = i64::MIN;
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalState {
    pub loc: usize,
    pub vals: Vec<i64>,
}

/// Extra valuation slots beyond the int variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Int { name: String, lo: i64, hi: i64 },
    /// Last role in partition `id`: 1 = win, 0 = lose.
    Role { id: usize },
    /// Decided set of consensus `id`, as a bitmask over its domain.
    Decided { id: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    Internal,
    SendBr { act: usize, payload: Option<i64> },
    RecvBr { act: usize, payload: Option<i64> },
    SendRz { act: usize, payload: Option<i64>, target: Option<usize> },
    RecvRz { act: usize, payload: Option<i64> },
    Crash,
    PartWin { id: usize },
    PartLose { id: usize },
    Cons { id: usize, decided: u64, acting: bool },
}

/// Globally-synchronizing or rendezvous event identity (payload variants merged).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventId {
    Act(usize),
    Agr(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Acting,
    Reacting,
    Neither,
}

impl Label {
    pub fn event(&self) -> Option<EventId> {
        match *self {
            Label::SendBr { act, .. } | Label::RecvBr { act, .. } | Label::SendRz { act, .. } | Label::RecvRz { act, .. } => {
                Some(EventId::Act(act))
            }
            Label::PartWin { id } | Label::PartLose { id } | Label::Cons { id, .. } => Some(EventId::Agr(id)),
            Label::Internal | Label::Crash => None,
        }
    }

    pub fn payload(&self) -> Option<i64> {
        match *self {
            Label::SendBr { payload, .. } | Label::RecvBr { payload, .. } | Label::SendRz { payload, .. } | Label::RecvRz { payload, .. } => {
                payload
            }
            _ => None,
        }
    }

    pub fn is_rz(&self) -> bool {
        matches!(self, Label::SendRz { .. } | Label::RecvRz { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub src: usize,
    pub label: Label,
    pub dst: usize,
}

#[derive(Clone, Debug)]
pub struct LocalTs {
    pub core: CoreProcess,
    pub slots: Vec<Slot>,
    pub states: Vec<LocalState>,
    pub index: HashMap<LocalState, usize>,
    pub initial: usize,
    /// Id of the crash state; equals `states.len()`.
    pub crash: usize,
    pub transitions: Vec<Transition>,
    pub out: Vec<Vec<usize>>,
    pub agr_names: Vec<String>,
    pub broadcast_sources: Vec<bool>,
}

fn mask_values(mask: u64, domain: &[i64]) -> Vec<i64> {
    domain.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| *v).collect()
}

struct Ctx<'a> {
    ts_slots: &'a [Slot],
    core: &'a CoreProcess,
    agr_names: &'a [String],
    vals: &'a [i64],
    recv: Option<(&'a str, Option<i64>)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum V {
    I(i64),
    B(bool),
}

impl<'a> Ctx<'a> {
    fn var(&self, name: &str) -> Option<i64> {
        let i = self.ts_slots.iter().position(|s| matches!(s, Slot::Int { name: n, .. } if n == name))?;
        Some(self.vals[i])
    }

    fn eval(&self, e: &Expr) -> Option<V> {
        Some(match &e.kind {
            ExprKind::Int(v) => V::I(*v),
            ExprKind::Bool(b) => V::B(*b),
            ExprKind::Var(v) => V::I(self.var(v)?),
            ExprKind::Payload(a) => match self.recv {
                Some((r, Some(p))) if r == a => V::I(p),
                _ => return None,
            },
            ExprKind::DecVar(c, i) => {
                let id = self.agr_names.iter().position(|n| n == c)?;
                let slot = self.ts_slots.iter().position(|s| *s == Slot::Decided { id })?;
                let mask = self.vals[slot];
                if mask == BOT {
                    return None;
                }
                let dom = &self.core.agreements[c].domain;
                let vs = mask_values(mask as u64, dom);
                V::I(*vs.get((*i as usize).checked_sub(1)?)?)
            }
            ExprKind::Not(x) => match self.eval(x)? {
                V::B(b) => V::B(!b),
                _ => return None,
            },
            ExprKind::Neg(x) => match self.eval(x)? {
                V::I(i) => V::I(i.checked_neg()?),
                _ => return None,
            },
            ExprKind::Bin(op, l, r) => {
                if let (ExprKind::Sender(_), ExprKind::SelfId) | (ExprKind::SelfId, ExprKind::Sender(_)) = (&l.kind, &r.kind) {
                    return Some(V::B(*op == BinOp::Ne));
                }
                let a = self.eval(l)?;
                let b = self.eval(r)?;
                match (op, a, b) {
                    (BinOp::And, V::B(x), V::B(y)) => V::B(x && y),
                    (BinOp::Or, V::B(x), V::B(y)) => V::B(x || y),
                    (BinOp::Eq, x, y) => V::B(x == y),
                    (BinOp::Ne, x, y) => V::B(x != y),
                    (_, V::I(x), V::I(y)) => match op {
                        BinOp::Lt => V::B(x < y),
                        BinOp::Le => V::B(x <= y),
                        BinOp::Gt => V::B(x > y),
                        BinOp::Ge => V::B(x >= y),
                        BinOp::Add => V::I(x.checked_add(y)?),
                        BinOp::Sub => V::I(x.checked_sub(y)?),
                        BinOp::Mul => V::I(x.checked_mul(y)?),
                        BinOp::Div => V::I(x.checked_div(y)?),
                        BinOp::Mod => V::I(x.checked_rem(y)?),
                        _ => return None,
                    },
                    _ => return None,
                }
            }
            _ => return None,
        })
    }

    fn guard(&self, e: &Expr) -> bool {
        matches!(self.eval(e), Some(V::B(true)))
    }
}

fn apply_updates(
    slots: &[Slot],
    core: &CoreProcess,
    agr_names: &[String],
    vals: &[i64],
    recv: Option<(&str, Option<i64>)>,
    updates: &[Update],
) -> Option<Vec<i64>> {
    let mut cur = vals.to_vec();
    for (var, e) in updates {
        let v = {
            let ctx = Ctx { ts_slots: slots, core, agr_names, vals: &cur, recv };
            match ctx.eval(e)? {
                V::I(i) => i,
                V::B(_) => return None,
            }
        };
        let idx = slots.iter().position(|s| matches!(s, Slot::Int { name, .. } if name == var))?;
        if let Slot::Int { lo, hi, .. } = &slots[idx] {
            cur[idx] = v.clamp(*lo, *hi);
        }
    }
    Some(cur)
}

fn referenced_agreements(core: &CoreProcess) -> (Vec<String>, Vec<String>) {
    let mut roles = Vec::new();
    let mut decided = Vec::new();
    for a in core.agreements.values() {
        match &a.participants {
            Participants::WinS(p) | Participants::LoseS(p) => roles.push(p.clone()),
            Participants::All => {}
        }
    }
    let mut see = |e: &Expr| {
        e.walk(&mut |x| match &x.kind {
            ExprKind::DecVar(c, _) => decided.push(c.clone()),
            ExprKind::WinS(p) | ExprKind::LoseS(p) => roles.push(p.clone()),
            _ => {}
        })
    };
    for h in &core.handlers {
        match &h.kind {
            CoreKind::Internal { guard, updates, .. }
            | CoreKind::Send { guard, updates, .. }
            | CoreKind::Recv { guard, updates, .. } => {
                see(guard);
                for (_, e) in updates {
                    see(e);
                }
            }
            _ => {}
        }
    }
    roles.sort();
    roles.dedup();
    decided.sort();
    decided.dedup();
    (roles, decided)
}

pub fn build_local_ts(core: &CoreProcess, cap: usize) -> Result<LocalTs, MercuryError> {
    let agr_names: Vec<String> = core.agreements.keys().cloned().collect();
    let (roles, decided) = referenced_agreements(core);
    let mut slots: Vec<Slot> =
        core.vars.iter().map(|v| Slot::Int { name: v.name.clone(), lo: v.lo, hi: v.hi }).collect();
    for r in &roles {
        slots.push(Slot::Role { id: agr_names.iter().position(|n| n == r).unwrap() });
    }
    for d in &decided {
        slots.push(Slot::Decided { id: agr_names.iter().position(|n| n == d).unwrap() });
    }
    let act_idx = |name: &str| core.acts.iter().position(|a| a.name.name == name).unwrap();
    let mut init_vals: Vec<i64> = core.vars.iter().map(|v| v.init).collect();
    init_vals.resize(slots.len(), BOT);
    let s0 = LocalState { loc: core.initial, vals: init_vals };

    let mut states = vec![s0.clone()];
    let mut index = HashMap::new();
    index.insert(s0, 0usize);
    let mut pending: Vec<(usize, Label, LocalState)> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    let mut diags = Vec::new();

    let subsets: BTreeMap<String, Vec<u64>> = core
        .agreements
        .iter()
        .filter(|(_, a)| !a.partition)
        .map(|(n, a)| {
            let d = a.domain.len().min(63);
            let masks = (1u64..(1u64 << d)).filter(|m| (m.count_ones() as usize) <= a.k).collect();
            (n.clone(), masks)
        })
        .collect();

    while let Some(si) = queue.pop_front() {
        let st = states[si].clone();
        let mut succ: Vec<(Label, LocalState)> = Vec::new();
        let mut recv_seen: HashMap<(usize, Option<i64>), usize> = HashMap::new();
        let mut agr_seen: HashMap<(usize, u64), LocalState> = HashMap::new();
        for h in core.handlers.iter().filter(|h| h.loc == st.loc) {
            let ctx = |recv| Ctx { ts_slots: &slots, core, agr_names: &agr_names, vals: &st.vals, recv };
            match &h.kind {
                CoreKind::Internal { guard, updates, target } => {
                    if ctx(None).guard(guard) {
                        if let Some(v) = apply_updates(&slots, core, &agr_names, &st.vals, None, updates) {
                            succ.push((Label::Internal, LocalState { loc: *target, vals: v }));
                        }
                    }
                }
                CoreKind::Send { guard, send, updates, target } => {
                    if !ctx(None).guard(guard) {
                        continue;
                    }
                    let payload = match &send.payload {
                        Some(p) => match ctx(None).var(p) {
                            Some(v) => Some(v),
                            None => continue,
                        },
                        None => None,
                    };
                    let Some(v) = apply_updates(&slots, core, &agr_names, &st.vals, None, updates) else { continue };
                    let act = act_idx(&send.act);
                    let label = if core.acts[act].mode == Mode::Broadcast {
                        Label::SendBr { act, payload }
                    } else {
                        Label::SendRz { act, payload, target: send.target.as_deref().map(act_idx) }
                    };
                    succ.push((label, LocalState { loc: *target, vals: v }));
                }
                CoreKind::Recv { act, guard, updates, target } => {
                    let ai = act_idx(act);
                    let decl = &core.acts[ai];
                    let payloads: Vec<Option<i64>> = match decl.payload {
                        Some((lo, hi)) => (lo..=hi).map(Some).collect(),
                        None => vec![None],
                    };
                    for p in payloads {
                        let c = ctx(Some((act.as_str(), p)));
                        if !c.guard(guard) {
                            continue;
                        }
                        let Some(v) = apply_updates(&slots, core, &agr_names, &st.vals, Some((act, p)), updates) else {
                            continue;
                        };
                        let n = recv_seen.entry((ai, p)).or_insert(0);
                        *n += 1;
                        if *n == 2 {
                            diags.push(Diagnostic::bare(
                                DiagKind::NondeterministicReceive,
                                format!(
                                    "state {} has more than one enabled recv of `{act}`{}",
                                    render_state_raw(core, &slots, &agr_names, &st),
                                    p.map(|x| format!(" with payload {x}")).unwrap_or_default()
                                ),
                            ));
                        }
                        let label = if decl.mode == Mode::Broadcast {
                            Label::RecvBr { act: ai, payload: p }
                        } else {
                            Label::RecvRz { act: ai, payload: p }
                        };
                        succ.push((label, LocalState { loc: *target, vals: v }));
                    }
                }
                CoreKind::Partition { id, win, lose } => {
                    let ai = agr_names.iter().position(|n| n == id).unwrap();
                    let role_slot = slots.iter().position(|s| *s == Slot::Role { id: ai });
                    let mut wv = st.vals.clone();
                    let mut lv = st.vals.clone();
                    if let Some(r) = role_slot {
                        wv[r] = 1;
                        lv[r] = 0;
                    }
                    let lose_state = LocalState { loc: *lose, vals: lv };
                    if let Some(prev) = agr_seen.insert((ai, 0), lose_state.clone()) {
                        if prev != lose_state {
                            diags.push(Diagnostic::bare(
                                DiagKind::NondeterministicReceive,
                                format!("location `{}` reacts to partition `{id}` in more than one way", core.locations[st.loc]),
                            ));
                        }
                    }
                    succ.push((Label::PartWin { id: ai }, LocalState { loc: *win, vals: wv }));
                    succ.push((Label::PartLose { id: ai }, lose_state));
                }
                CoreKind::Consensus { id, propose, target } => {
                    let ai = agr_names.iter().position(|n| n == id).unwrap();
                    let dom = &core.agreements[id].domain;
                    let dec_slot = slots.iter().position(|s| *s == Slot::Decided { id: ai });
                    let mine = propose.as_ref().and_then(|p| ctx(None).var(p));
                    for &mask in &subsets[id] {
                        let mut v = st.vals.clone();
                        if let Some(d) = dec_slot {
                            v[d] = mask as i64;
                        }
                        let acting = mine.map_or(false, |m| mask_values(mask, dom).contains(&m));
                        let dst = LocalState { loc: *target, vals: v };
                        if let Some(prev) = agr_seen.insert((ai, mask | 1 << 63), dst.clone()) {
                            if prev != dst {
                                diags.push(Diagnostic::bare(
                                    DiagKind::NondeterministicReceive,
                                    format!(
                                        "location `{}` reacts to consensus `{id}` in more than one way",
                                        core.locations[st.loc]
                                    ),
                                ));
                            }
                        }
                        succ.push((Label::Cons { id: ai, decided: mask, acting }, dst));
                    }
                }
            }
        }
        succ.sort();
        succ.dedup();
        for (label, dst) in succ {
            if !index.contains_key(&dst) {
                if states.len() >= cap {
                    return Err(MercuryError::StateSpace { limit: cap });
                }
                index.insert(dst.clone(), states.len());
                states.push(dst.clone());
                queue.push_back(states.len() - 1);
            }
            pending.push((si, label, dst));
        }
    }
    if !diags.is_empty() {
        diags.dedup();
        return Err(MercuryError::OutOfFragment(diags));
    }
    let crash = states.len();
    let mut transitions: Vec<Transition> =
        pending.into_iter().map(|(src, label, dst)| Transition { src, label, dst: index[&dst] }).collect();
    for s in 0..crash {
        transitions.push(Transition { src: s, label: Label::Crash, dst: crash });
    }
    transitions.sort_by_key(|t| (t.src, t.label, t.dst));
    let mut out = vec![Vec::new(); crash + 1];
    for (i, t) in transitions.iter().enumerate() {
        out[t.src].push(i);
    }
    let mut broadcast_sources = vec![false; crash];
    for t in &transitions {
        if matches!(t.label, Label::SendBr { .. } | Label::PartWin { .. } | Label::Cons { acting: true, .. }) {
            broadcast_sources[t.src] = true;
        }
    }
    Ok(LocalTs {
        core: core.clone(),
        slots,
        states,
        index,
        initial: 0,
        crash,
        transitions,
        out,
        agr_names,
        broadcast_sources,
    })
}

fn render_state_raw(core: &CoreProcess, slots: &[Slot], agr_names: &[String], s: &LocalState) -> String {
    let mut parts = Vec::new();
    for (slot, v) in slots.iter().zip(&s.vals) {
        let val = if *v == BOT { "_".to_string() } else { v.to_string() };
        match slot {
            Slot::Int { name, .. } => parts.push(format!("{name}={val}")),
            Slot::Role { id } => {
                let r = match *v {
                    BOT => "_",
                    1 => "win",
                    _ => "lose",
                };
                parts.push(format!("{}.role={r}", agr_names[*id]));
            }
            Slot::Decided { id } => {
                let name = &agr_names[*id];
                let txt = if *v == BOT {
                    "_".to_string()
                } else {
                    let vs = mask_values(*v as u64, &core.agreements[name].domain);
                    format!("{{{}}}", vs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
                };
                parts.push(format!("{name}.decVar={txt}"));
            }
        }
    }
    format!("({},{{{}}})", core.locations[s.loc], parts.join(","))
}

impl LocalTs {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn render_state(&self, s: usize) -> String {
        if s == self.crash {
            return "(crashed,{})".to_string();
        }
        render_state_raw(&self.core, &self.slots, &self.agr_names, &self.states[s])
    }

    pub fn loc_name(&self, s: usize) -> &str {
        if s == self.crash {
            "crashed"
        } else {
            &self.core.locations[self.states[s].loc]
        }
    }

    pub fn event_name(&self, e: EventId) -> &str {
        match e {
            EventId::Act(a) => &self.core.acts[a].name.name,
            EventId::Agr(a) => &self.agr_names[a],
        }
    }

    pub fn is_env_act(&self, act: usize) -> bool {
        self.core.acts[act].env
    }

    pub fn agreement(&self, id: usize) -> &crate::lowering::AgreementInfo {
        &self.core.agreements[&self.agr_names[id]]
    }

    pub fn decided_values(&self, id: usize, mask: u64) -> Vec<i64> {
        mask_values(mask, &self.agreement(id).domain)
    }

    /// Globally-synchronizing events: broadcast acts (system and env), partitions, consensus.
    pub fn sync_events(&self) -> Vec<EventId> {
        let mut v: Vec<EventId> = (0..self.core.acts.len())
            .filter(|&a| self.core.acts[a].mode == Mode::Broadcast)
            .map(EventId::Act)
            .collect();
        v.extend((0..self.agr_names.len()).map(EventId::Agr));
        v
    }

    pub fn is_sync(&self, e: EventId) -> bool {
        match e {
            EventId::Act(a) => self.core.acts[a].mode == Mode::Broadcast,
            EventId::Agr(_) => true,
        }
    }

    pub fn outgoing(&self, s: usize) -> impl Iterator<Item = &Transition> {
        self.out[s].iter().map(move |&i| &self.transitions[i])
    }

    pub fn state_of(&self, loc: &str, vals: &[i64]) -> Option<usize> {
        let l = self.core.loc_index(loc)?;
        self.index.get(&LocalState { loc: l, vals: vals.to_vec() }).copied()
    }

    /// Value of int variable `name` in state `s`.
    pub fn int_value(&self, s: usize, name: &str) -> Option<i64> {
        if s == self.crash {
            return None;
        }
        let i = self.slots.iter().position(|x| matches!(x, Slot::Int { name: n, .. } if n == name))?;
        Some(self.states[s].vals[i])
    }

    pub fn classify(&self, t: &Transition) -> (Role, bool) {
        classify(&t.label)
    }

    pub fn label_text(&self, l: &Label) -> String {
        let pay = |p: &Option<i64>| p.map(|x| format!("[{x}]")).unwrap_or_default();
        match l {
            Label::Internal => "tau".into(),
            Label::Crash => "crash".into(),
            Label::SendBr { act, payload } => format!("A({}{})", self.core.acts[*act].name.name, pay(payload)),
            Label::RecvBr { act, payload } => format!("R({}{})", self.core.acts[*act].name.name, pay(payload)),
            Label::SendRz { act, payload, .. } => format!("S({}{})", self.core.acts[*act].name.name, pay(payload)),
            Label::RecvRz { act, payload } => format!("R({}{})", self.core.acts[*act].name.name, pay(payload)),
            Label::PartWin { id } => format!("A({})", self.agr_names[*id]),
            Label::PartLose { id } => format!("R({})", self.agr_names[*id]),
            Label::Cons { id, acting, .. } => {
                format!("{}({})", if *acting { "A" } else { "R" }, self.agr_names[*id])
            }
        }
    }

    /// Debug dump as JSON: states, transitions with labels and classification.
    pub fn to_json(&self) -> serde_json::Value {
        let states: Vec<String> = (0..=self.crash).map(|s| self.render_state(s)).collect();
        let trans: Vec<serde_json::Value> = self
            .transitions
            .iter()
            .map(|t| {
                let (role, indep) = classify(&t.label);
                serde_json::json!({
                    "src": t.src, "dst": t.dst, "label": self.label_text(&t.label),
                    "role": role, "independent": indep,
                })
            })
            .collect();
        serde_json::json!({ "states": states, "initial": self.initial, "crash": self.crash, "transitions": trans })
    }
}

pub fn classify(l: &Label) -> (Role, bool) {
    match l {
        Label::SendBr { .. } | Label::PartWin { .. } | Label::Cons { acting: true, .. } => (Role::Acting, true),
        Label::RecvBr { .. } | Label::PartLose { .. } | Label::Cons { acting: false, .. } => (Role::Reacting, false),
        Label::Internal | Label::Crash => (Role::Neither, true),
        Label::SendRz { .. } | Label::RecvRz { .. } => (Role::Neither, false),
    }
}

impl LocalTs {
    /// Evaluate a boolean expression over the int variables of state `s`.
    /// Unset values and non-boolean results count as false.
    pub fn holds(&self, s: usize, e: &Expr) -> bool {
        if s == self.crash {
            return false;
        }
        let ctx = Ctx {
            ts_slots: &self.slots,
            core: &self.core,
            agr_names: &self.agr_names,
            vals: &self.states[s].vals,
            recv: None,
        };
        ctx.guard(e)
    }
}
