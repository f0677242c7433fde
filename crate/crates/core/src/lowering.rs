//! Sugar expansion and rewriting of handlers into the core fragment.

use crate::diag::{DiagKind, Diagnostic, MercuryError, Span};
use crate::frontend::ast::*;
use crate::frontend::pretty::{print_event, print_expr};
use crate::frontend::validate::agreement_decls;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

pub fn desugar(prog: &Program) -> Result<Program, MercuryError> {
    let decls = agreement_decls(prog);
    let mut diags = Vec::new();
    let mut out = prog.clone();
    for loc in &mut out.locations {
        let mut items = Vec::new();
        for it in std::mem::take(&mut loc.items) {
            match it {
                Item::Passive { events, span } => {
                    for e in events {
                        let goto = vec![Stmt { kind: StmtKind::Goto(loc.name.clone()), span }];
                        let handler = if prog.act(&e.name).is_some() {
                            Handler { event: Event::Recv(e.clone()), guard: None, body: Body::Do(goto), span }
                        } else if let Some(d) = decls.get(&e.name) {
                            let (event, body) = if d.partition {
                                (
                                    Event::Partition { id: e.clone(), participants: d.participants.clone(), k: d.k },
                                    Body::WinLose { win: goto.clone(), lose: goto },
                                )
                            } else {
                                (
                                    Event::Consensus {
                                        id: e.clone(),
                                        participants: d.participants.clone(),
                                        k: d.k,
                                        propose: None,
                                    },
                                    Body::Do(goto),
                                )
                            };
                            Handler { event, guard: None, body, span }
                        } else {
                            diags.push(Diagnostic::new(
                                DiagKind::Sugar,
                                format!("passive names undeclared event `{}`", e.name),
                                e.span,
                            ));
                            continue;
                        };
                        items.push(Item::Handler(handler));
                    }
                }
                Item::Handler(mut h) => {
                    let recv = match &h.event {
                        Event::Recv(a) => Some(a.name.clone()),
                        _ => None,
                    };
                    match &mut h.body {
                        Body::Do(b) => expand_reply(b, &recv, &mut diags),
                        Body::WinLose { win, lose } => {
                            expand_reply(win, &recv, &mut diags);
                            expand_reply(lose, &recv, &mut diags);
                        }
                    }
                    items.push(Item::Handler(h));
                }
            }
        }
        loc.items = items;
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(MercuryError::Invalid(diags))
    }
}

fn expand_reply(stmts: &mut [Stmt], recv: &Option<String>, diags: &mut Vec<Diagnostic>) {
    for s in stmts {
        match &mut s.kind {
            StmtKind::Reply { act, payload } => match recv {
                Some(r) => {
                    let target = Expr { kind: ExprKind::Sender(r.clone()), span: s.span };
                    s.kind = StmtKind::SendRz { act: act.clone(), payload: payload.clone(), target };
                }
                None => diags.push(Diagnostic::new(DiagKind::Sugar, "reply used outside a recv handler", s.span)),
            },
            StmtKind::If { then, els, .. } => {
                expand_reply(then, recv, diags);
                if let Some(e) = els {
                    expand_reply(e, recv, diags);
                }
            }
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Participants {
    All,
    WinS(String),
    LoseS(String),
}

impl Participants {
    pub fn text(&self) -> String {
        match self {
            Participants::All => "All".into(),
            Participants::WinS(p) => format!("{p}.winS"),
            Participants::LoseS(p) => format!("{p}.loseS"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgreementInfo {
    pub partition: bool,
    pub participants: Participants,
    pub k: usize,
    /// Union of the declared domains of every proposal variable.
    pub domain: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreVar {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub init: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreSend {
    pub act: String,
    pub payload: Option<String>,
    /// Action whose last sender is addressed; `None` for broadcasts.
    pub target: Option<String>,
}

pub type Update = (String, Expr);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoreKind {
    Internal { guard: Expr, updates: Vec<Update>, target: usize },
    Send { guard: Expr, send: CoreSend, updates: Vec<Update>, target: usize },
    Recv { act: String, guard: Expr, updates: Vec<Update>, target: usize },
    Partition { id: String, win: usize, lose: usize },
    Consensus { id: String, propose: Option<String>, target: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreHandler {
    pub loc: usize,
    pub kind: CoreKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreProcess {
    pub name: String,
    pub vars: Vec<CoreVar>,
    pub acts: Vec<ActDecl>,
    pub agreements: BTreeMap<String, AgreementInfo>,
    pub locations: Vec<String>,
    pub initial: usize,
    pub handlers: Vec<CoreHandler>,
}

impl CoreProcess {
    pub fn act(&self, name: &str) -> Option<&ActDecl> {
        self.acts.iter().find(|a| a.name.name == name)
    }

    pub fn loc_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l == name)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Update(String, Expr),
    Send(CoreSend, Span),
}

#[derive(Clone, Debug)]
struct PathState {
    conds: Vec<Expr>,
    ops: Vec<Op>,
    sym: HashMap<String, Expr>,
    goto: Option<String>,
}

fn subst(e: &Expr, sym: &HashMap<String, Expr>) -> Expr {
    let kind = match &e.kind {
        ExprKind::Var(v) => match sym.get(v) {
            Some(x) => return x.clone(),
            None => e.kind.clone(),
        },
        ExprKind::Not(x) => ExprKind::Not(Box::new(subst(x, sym))),
        ExprKind::Neg(x) => ExprKind::Neg(Box::new(subst(x, sym))),
        ExprKind::Bin(op, l, r) => ExprKind::Bin(*op, Box::new(subst(l, sym)), Box::new(subst(r, sym))),
        other => other.clone(),
    };
    Expr { kind, span: e.span }
}

fn exec(stmts: &[Stmt], states: Vec<PathState>) -> Vec<PathState> {
    let mut states = states;
    for s in stmts {
        let mut next = Vec::new();
        for mut st in states {
            if st.goto.is_some() {
                next.push(st);
                continue;
            }
            match &s.kind {
                StmtKind::Assign { var, value } => {
                    let v = subst(value, &st.sym);
                    st.sym.insert(var.name.clone(), v);
                    st.ops.push(Op::Update(var.name.clone(), value.clone()));
                    next.push(st);
                }
                StmtKind::SendRz { act, payload, target } => {
                    let target = match &target.kind {
                        ExprKind::Sender(a) => Some(a.clone()),
                        _ => None,
                    };
                    let send = CoreSend { act: act.name.clone(), payload: payload.as_ref().map(|p| p.name.clone()), target };
                    st.ops.push(Op::Send(send, s.span));
                    next.push(st);
                }
                StmtKind::SendBr { act, payload } => {
                    let send =
                        CoreSend { act: act.name.clone(), payload: payload.as_ref().map(|p| p.name.clone()), target: None };
                    st.ops.push(Op::Send(send, s.span));
                    next.push(st);
                }
                StmtKind::Goto(l) => {
                    st.goto = Some(l.name.clone());
                    next.push(st);
                }
                StmtKind::If { cond, then, els } => {
                    let c = subst(cond, &st.sym);
                    let mut t = st.clone();
                    t.conds.push(c.clone());
                    next.extend(exec(then, vec![t]));
                    let mut f = st;
                    f.conds.push(Expr::not(c));
                    match els {
                        Some(e) => next.extend(exec(e, vec![f])),
                        None => next.push(f),
                    }
                }
                StmtKind::Reply { .. } | StmtKind::SetAdd { .. } | StmtKind::SetRemove { .. } => next.push(st),
            }
        }
        states = next;
    }
    states
}

fn conj(conds: &[Expr]) -> Expr {
    conds.iter().cloned().fold(Expr::tt(), Expr::and)
}

fn reads_payload(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |x| {
        if matches!(x.kind, ExprKind::Payload(_)) {
            found = true;
        }
    });
    found
}

struct Lowerer<'a> {
    prog: &'a Program,
    locations: Vec<String>,
    handlers: Vec<CoreHandler>,
    continuations: HashMap<String, usize>,
    counters: HashMap<String, usize>,
    diags: Vec<Diagnostic>,
}

impl<'a> Lowerer<'a> {
    fn loc(&self, name: &str) -> usize {
        self.locations.iter().position(|l| l == name).expect("goto targets are resolved at parse time")
    }

    fn fresh(&mut self, base: &str) -> usize {
        loop {
            let n = self.counters.entry(base.to_string()).or_insert(0);
            *n += 1;
            let name = format!("{base}__{n}");
            if !self.locations.contains(&name) {
                self.locations.push(name);
                return self.locations.len() - 1;
            }
        }
    }

    /// Continuation location reached before running `key`-identified code; shared
    /// between paths whose remaining code is identical.
    fn continuation(&mut self, base: &str, key: String) -> (usize, bool) {
        if let Some(&l) = self.continuations.get(&key) {
            return (l, false);
        }
        let l = self.fresh(base);
        self.continuations.insert(key, l);
        (l, true)
    }

    fn emit_tail(&mut self, base: &str, home: usize, send: CoreSend, post: Vec<Update>, target: usize) -> usize {
        let mut key = format!("{base}|send {} {:?} {:?}|", send.act, send.payload, send.target);
        for (v, e) in &post {
            let _ = write!(key, "{v}:={};", print_expr(e));
        }
        let _ = write!(key, "->{target}");
        let (c, new) = self.continuation(base, key);
        if new {
            let _ = home;
            self.handlers.push(CoreHandler {
                loc: c,
                kind: CoreKind::Send { guard: Expr::tt(), send, updates: post, target },
            });
        }
        c
    }

    /// Lower the paths of a `_`/recv body located at `at`, with fall-through to `home`.
    fn lower_paths(&mut self, at: usize, home: usize, recv: Option<&str>, guard: Option<&Expr>, body: &[Stmt]) {
        let init = PathState { conds: guard.into_iter().cloned().collect(), ops: vec![], sym: HashMap::new(), goto: None };
        let base = self.locations[home].clone();
        for path in exec(body, vec![init]) {
            let target = path.goto.as_deref().map(|g| self.loc(g)).unwrap_or(home);
            let guard = conj(&path.conds);
            let sends: Vec<usize> =
                path.ops.iter().enumerate().filter(|(_, o)| matches!(o, Op::Send(..))).map(|(i, _)| i).collect();
            if sends.len() > 1 {
                let span = match &path.ops[sends[1]] {
                    Op::Send(_, sp) => *sp,
                    _ => unreachable!(),
                };
                self.diags.push(Diagnostic::new(
                    DiagKind::Lowering,
                    "a reaction path performs two sends, which the core fragment cannot express",
                    span,
                ));
                continue;
            }
            let updates = |ops: &[Op]| -> Vec<Update> {
                ops.iter()
                    .filter_map(|o| match o {
                        Op::Update(v, e) => Some((v.clone(), e.clone())),
                        Op::Send(..) => None,
                    })
                    .collect()
            };
            let Some(&si) = sends.first() else {
                let updates = updates(&path.ops);
                let kind = match recv {
                    Some(a) => CoreKind::Recv { act: a.to_string(), guard, updates, target },
                    None => CoreKind::Internal { guard, updates, target },
                };
                self.handlers.push(CoreHandler { loc: at, kind });
                continue;
            };
            let (send, span) = match &path.ops[si] {
                Op::Send(s, sp) => (s.clone(), *sp),
                _ => unreachable!(),
            };
            let pre = updates(&path.ops[..si]);
            let post = updates(&path.ops[si + 1..]);
            let hoistable = recv.is_none()
                && send.payload.as_ref().map_or(true, |p| pre.iter().all(|(v, _)| v != p));
            if hoistable {
                let mut all = pre;
                all.extend(post);
                self.handlers.push(CoreHandler { loc: at, kind: CoreKind::Send { guard, send, updates: all, target } });
                continue;
            }
            if post.iter().any(|(_, e)| reads_payload(e)) {
                self.diags.push(Diagnostic::new(
                    DiagKind::Lowering,
                    "updates after a send inside a recv handler may not read the received payload; copy it into a variable first",
                    span,
                ));
                continue;
            }
            let c = self.emit_tail(&base, home, send, post, target);
            let kind = match recv {
                Some(a) => CoreKind::Recv { act: a.to_string(), guard, updates: pre, target: c },
                None => CoreKind::Internal { guard, updates: pre, target: c },
            };
            self.handlers.push(CoreHandler { loc: at, kind });
        }
    }

    /// Target for an agreement branch: a direct goto, or a continuation running the body.
    fn branch_target(&mut self, home: usize, body: &[Stmt], tag: &str) -> usize {
        match body {
            [] => home,
            [Stmt { kind: StmtKind::Goto(l), .. }] => self.loc(&l.name),
            _ => {
                let base = self.locations[home].clone();
                let c = self.fresh(&base);
                let _ = tag;
                self.lower_paths(c, home, None, None, body);
                c
            }
        }
    }
}

pub fn lower_to_core(prog: &Program) -> Result<CoreProcess, MercuryError> {
    let decls = agreement_decls(prog);
    let mut agreements = BTreeMap::new();
    for (id, d) in &decls {
        let participants = match &d.participants.kind {
            ExprKind::WinS(p) => Participants::WinS(p.clone()),
            ExprKind::LoseS(p) => Participants::LoseS(p.clone()),
            _ => Participants::All,
        };
        let mut domain = BTreeSet::new();
        for (_, h) in prog.handlers() {
            if let Event::Consensus { id: hid, propose: Some(p), .. } = &h.event {
                if &hid.name == id {
                    if let Some(VarDecl { kind: VarKind::Int { lo, hi, .. }, .. }) = prog.var(&p.name) {
                        domain.extend(*lo..=*hi);
                    }
                }
            }
        }
        agreements.insert(
            id.clone(),
            AgreementInfo { partition: d.partition, participants, k: d.k.max(1) as usize, domain: domain.into_iter().collect() },
        );
    }
    let mut lw = Lowerer {
        prog,
        locations: prog.locations.iter().map(|l| l.name.name.clone()).collect(),
        handlers: Vec::new(),
        continuations: HashMap::new(),
        counters: HashMap::new(),
        diags: Vec::new(),
    };
    for (li, loc) in prog.locations.iter().enumerate() {
        for it in &loc.items {
            let Item::Handler(h) = it else { continue };
            match (&h.event, &h.body) {
                (Event::Empty, Body::Do(b)) => lw.lower_paths(li, li, None, h.guard.as_ref(), b),
                (Event::Recv(a), Body::Do(b)) => lw.lower_paths(li, li, Some(&a.name), h.guard.as_ref(), b),
                (Event::Partition { id, .. }, Body::WinLose { win, lose }) => {
                    let w = lw.branch_target(li, win, "win");
                    let l = lw.branch_target(li, lose, "lose");
                    lw.handlers.push(CoreHandler { loc: li, kind: CoreKind::Partition { id: id.name.clone(), win: w, lose: l } });
                }
                (Event::Consensus { id, propose, .. }, Body::Do(b)) => {
                    let t = lw.branch_target(li, b, "do");
                    lw.handlers.push(CoreHandler {
                        loc: li,
                        kind: CoreKind::Consensus { id: id.name.clone(), propose: propose.as_ref().map(|p| p.name.clone()), target: t },
                    });
                }
                _ => lw.diags.push(Diagnostic::new(DiagKind::Lowering, format!("malformed {} handler", print_event(&h.event)), h.span)),
            }
        }
    }
    let _ = lw.prog;
    if !lw.diags.is_empty() {
        return Err(MercuryError::Invalid(lw.diags));
    }
    let vars = prog
        .vars
        .iter()
        .filter_map(|v| match v.kind {
            VarKind::Int { lo, hi, init } => Some(CoreVar { name: v.name.name.clone(), lo, hi, init }),
            VarKind::IdSet => None,
        })
        .collect();
    let initial = prog.locations.iter().position(|l| l.initial).unwrap_or(0);
    Ok(CoreProcess {
        name: prog.name.name.clone(),
        vars,
        acts: prog.acts.clone(),
        agreements,
        locations: lw.locations,
        initial,
        handlers: lw.handlers,
    })
}

/// Render a core process as re-parseable Mercury source.
pub fn print_core(core: &CoreProcess) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "process {}", core.name);
    if !core.vars.is_empty() {
        out.push_str("variables\n");
        for v in &core.vars {
            let _ = writeln!(out, "  int[{},{}] {} := {}", v.lo, v.hi, v.name, v.init);
        }
    }
    if !core.acts.is_empty() {
        out.push_str("actions\n");
        let mut env_started = false;
        let mut acts: Vec<&ActDecl> = core.acts.iter().filter(|a| !a.env).collect();
        acts.extend(core.acts.iter().filter(|a| a.env));
        for a in acts {
            if a.env && !env_started {
                out.push_str("  env\n");
                env_started = true;
            }
            let mode = if a.mode == Mode::Broadcast { "br" } else { "rz" };
            let payload = a.payload.map(|(lo, hi)| format!("int[{lo},{hi}]")).unwrap_or_else(|| "unit".into());
            let _ = writeln!(out, "    {mode} {} : {payload}", a.name.name);
        }
    }
    let upd = |out: &mut String, updates: &[Update]| {
        for (v, e) in updates {
            let _ = write!(out, " {v} := {};", print_expr(e));
        }
    };
    for (li, name) in core.locations.iter().enumerate() {
        out.push('\n');
        if li == core.initial {
            out.push_str("initial ");
        }
        let _ = writeln!(out, "location {name}");
        for h in core.handlers.iter().filter(|h| h.loc == li) {
            match &h.kind {
                CoreKind::Internal { guard, updates, target } => {
                    let _ = write!(out, "  on _ where ({}) do", print_expr(guard));
                    upd(&mut out, updates);
                    let _ = writeln!(out, " goto {}", core.locations[*target]);
                }
                CoreKind::Send { guard, send, updates, target } => {
                    let _ = write!(out, "  on _ where ({}) do ", print_expr(guard));
                    let p = send.payload.clone().unwrap_or_else(|| "_".into());
                    match &send.target {
                        Some(t) => {
                            let _ = write!(out, "sendrz({}[{p}], {t}.sID);", send.act);
                        }
                        None => {
                            let _ = write!(out, "sendbr({}[{p}]);", send.act);
                        }
                    }
                    upd(&mut out, updates);
                    let _ = writeln!(out, " goto {}", core.locations[*target]);
                }
                CoreKind::Recv { act, guard, updates, target } => {
                    let _ = write!(out, "  on recv({act}) where ({}) do", print_expr(guard));
                    upd(&mut out, updates);
                    let _ = writeln!(out, " goto {}", core.locations[*target]);
                }
                CoreKind::Partition { id, win, lose } => {
                    let a = &core.agreements[id];
                    let _ = writeln!(
                        out,
                        "  on Partition<{id}>({}, {}) win: goto {} lose: goto {}",
                        a.participants.text(),
                        a.k,
                        core.locations[*win],
                        core.locations[*lose]
                    );
                }
                CoreKind::Consensus { id, propose, target } => {
                    let a = &core.agreements[id];
                    let _ = writeln!(
                        out,
                        "  on Consensus<{id}>({}, {}, {}) do goto {}",
                        a.participants.text(),
                        a.k,
                        propose.as_deref().unwrap_or("_"),
                        core.locations[*target]
                    );
                }
            }
        }
    }
    out
}
