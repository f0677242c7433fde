use super::ast::*;
use crate::diag::{DiagKind, Diagnostic, Span};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Id,
    Set,
}

fn is_id_form(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::SelfId | ExprKind::Sender(_))
}

pub fn validate_symmetry(prog: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let check_expr = |e: &Expr, diags: &mut Vec<Diagnostic>| {
        e.walk(&mut |x| {
            if let ExprKind::Bin(op, l, r) = &x.kind {
                let l_id = is_id_form(l);
                let r_id = is_id_form(r);
                if !(l_id || r_id) {
                    return;
                }
                if op.is_ordering() {
                    diags.push(Diagnostic::new(DiagKind::Symmetry, "ordering on PIDs forbidden", x.span));
                } else if op.is_comparison() {
                    let lit = |e: &Expr| matches!(e.kind, ExprKind::Int(_) | ExprKind::Neg(_));
                    if lit(l) || lit(r) {
                        diags.push(Diagnostic::new(DiagKind::Symmetry, "concrete PID literal forbidden", x.span));
                    }
                } else if !matches!(op, BinOp::And | BinOp::Or) {
                    diags.push(Diagnostic::new(DiagKind::Symmetry, "arithmetic on PIDs forbidden", x.span));
                }
            }
        });
    };
    for (_, h) in prog.handlers() {
        if let Some(g) = &h.guard {
            check_expr(g, &mut diags);
        }
        for block in h.body.blocks() {
            walk_stmts(block, &mut |s| match &s.kind {
                StmtKind::If { cond, .. } => check_expr(cond, &mut diags),
                StmtKind::Assign { value, .. } => check_expr(value, &mut diags),
                StmtKind::SetAdd { elem, .. } | StmtKind::SetRemove { elem, .. } => {
                    if matches!(elem.kind, ExprKind::Int(_)) {
                        diags.push(Diagnostic::new(DiagKind::Symmetry, "concrete PID literal forbidden", elem.span));
                    }
                    check_expr(elem, &mut diags);
                }
                StmtKind::SendRz { target, .. } => {
                    if !matches!(target.kind, ExprKind::Sender(_)) {
                        diags.push(Diagnostic::new(
                            DiagKind::Symmetry,
                            "rendezvous target must be a sender id of the form act.sID",
                            target.span,
                        ));
                    }
                }
                _ => {}
            });
        }
    }
    diags
}

#[derive(Clone, Debug)]
pub struct AgreementDecl {
    pub partition: bool,
    pub participants: Expr,
    pub k: i64,
    pub span: Span,
}

pub fn agreement_decls(prog: &Program) -> BTreeMap<String, AgreementDecl> {
    let mut out = BTreeMap::new();
    for (_, h) in prog.handlers() {
        let (id, participants, k, partition) = match &h.event {
            Event::Partition { id, participants, k } => (id, participants, *k, true),
            Event::Consensus { id, participants, k, .. } => (id, participants, *k, false),
            _ => continue,
        };
        out.entry(id.name.clone()).or_insert_with(|| AgreementDecl {
            partition,
            participants: participants.clone(),
            k,
            span: id.span,
        });
    }
    out
}

struct Checker<'a> {
    prog: &'a Program,
    agreements: BTreeMap<String, AgreementDecl>,
    diags: Vec<Diagnostic>,
    recv_act: Option<String>,
}

impl<'a> Checker<'a> {
    fn err(&mut self, kind: DiagKind, msg: impl Into<String>, span: Span) {
        self.diags.push(Diagnostic::new(kind, msg, span));
    }

    fn int_var(&self, name: &str) -> Option<(i64, i64)> {
        match self.prog.var(name)?.kind {
            VarKind::Int { lo, hi, .. } => Some((lo, hi)),
            VarKind::IdSet => None,
        }
    }

    fn ty(&mut self, e: &Expr) -> Option<Ty> {
        match &e.kind {
            ExprKind::Int(_) => Some(Ty::Int),
            ExprKind::Bool(_) => Some(Ty::Bool),
            ExprKind::Var(v) => match self.prog.var(v).map(|d| d.kind) {
                Some(VarKind::Int { .. }) => Some(Ty::Int),
                Some(VarKind::IdSet) => Some(Ty::Set),
                None => {
                    self.err(DiagKind::Type, format!("undeclared variable `{v}`"), e.span);
                    None
                }
            },
            ExprKind::Payload(a) => {
                match self.prog.act(a) {
                    None => self.err(DiagKind::Type, format!("undeclared action `{a}`"), e.span),
                    Some(d) if d.payload.is_none() => {
                        self.err(DiagKind::Type, format!("action `{a}` carries no payload"), e.span)
                    }
                    Some(_) if self.recv_act.as_deref() != Some(a.as_str()) => self.err(
                        DiagKind::Type,
                        format!("`{a}.payld` is only available in a recv({a}) handler"),
                        e.span,
                    ),
                    Some(_) => {}
                }
                Some(Ty::Int)
            }
            ExprKind::Sender(a) => {
                if self.prog.act(a).is_none() {
                    self.err(DiagKind::Type, format!("undeclared action `{a}`"), e.span);
                }
                Some(Ty::Id)
            }
            ExprKind::SelfId => Some(Ty::Id),
            ExprKind::DecVar(c, i) => {
                match self.agreements.get(c) {
                    Some(d) if !d.partition => {
                        if *i < 1 || *i > d.k {
                            self.err(
                                DiagKind::Type,
                                format!("decVar index {i} out of bounds for consensus `{c}` with k={}", d.k),
                                e.span,
                            );
                        }
                    }
                    _ => self.err(DiagKind::Type, format!("`{c}` is not a consensus id"), e.span),
                }
                Some(Ty::Int)
            }
            ExprKind::WinS(p) | ExprKind::LoseS(p) => {
                match self.agreements.get(p) {
                    Some(d) if d.partition => {}
                    _ => self.err(DiagKind::Type, format!("`{p}` is not a partition id"), e.span),
                }
                Some(Ty::Set)
            }
            ExprKind::All | ExprKind::Empty => Some(Ty::Set),
            ExprKind::Not(x) => {
                self.want(x, Ty::Bool);
                Some(Ty::Bool)
            }
            ExprKind::Neg(x) => {
                self.want(x, Ty::Int);
                Some(Ty::Int)
            }
            ExprKind::Bin(op, l, r) => match op {
                BinOp::And | BinOp::Or => {
                    self.want(l, Ty::Bool);
                    self.want(r, Ty::Bool);
                    Some(Ty::Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    let lt = self.ty(l);
                    let rt = self.ty(r);
                    if let (Some(lt), Some(rt)) = (lt, rt) {
                        if lt != rt {
                            self.err(DiagKind::Type, format!("cannot compare {lt:?} with {rt:?}"), e.span);
                        } else if lt == Ty::Set {
                            self.err(DiagKind::OutOfFragment, "comparison of participant sets is not supported", e.span);
                        } else if lt == Ty::Id {
                            self.check_id_compare(l, r, e.span);
                        }
                    }
                    Some(Ty::Bool)
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let lt = self.ty(l);
                    let rt = self.ty(r);
                    if lt == Some(Ty::Id) || rt == Some(Ty::Id) {
                        return Some(Ty::Bool);
                    }
                    if lt.is_some() && lt != Some(Ty::Int) {
                        self.err(DiagKind::Type, "expected an integer operand", l.span);
                    }
                    if rt.is_some() && rt != Some(Ty::Int) {
                        self.err(DiagKind::Type, "expected an integer operand", r.span);
                    }
                    Some(Ty::Bool)
                }
                _ => {
                    let lt = self.ty(l);
                    let rt = self.ty(r);
                    if lt == Some(Ty::Id) || rt == Some(Ty::Id) {
                        return Some(Ty::Int);
                    }
                    if lt.is_some() && lt != Some(Ty::Int) {
                        self.err(DiagKind::Type, "expected an integer operand", l.span);
                    }
                    if rt.is_some() && rt != Some(Ty::Int) {
                        self.err(DiagKind::Type, "expected an integer operand", r.span);
                    }
                    Some(Ty::Int)
                }
            },
        }
    }

    fn check_id_compare(&mut self, l: &Expr, r: &Expr, span: Span) {
        let ok = |a: &Expr, b: &Expr, cur: &Option<String>| {
            matches!((&a.kind, &b.kind), (ExprKind::Sender(x), ExprKind::SelfId) if cur.as_deref() == Some(x.as_str()))
        };
        if !(ok(l, r, &self.recv_act) || ok(r, l, &self.recv_act)) {
            self.err(
                DiagKind::OutOfFragment,
                "PID comparisons are supported only as `act.sID = self` or `act.sID != self` for the received action",
                span,
            );
        }
    }

    fn want(&mut self, e: &Expr, want: Ty) {
        if let Some(t) = self.ty(e) {
            if t != want {
                self.err(DiagKind::Type, format!("expected {want:?} expression, found {t:?}"), e.span);
            }
        }
    }

    fn participants(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::All => {}
            ExprKind::WinS(_) | ExprKind::LoseS(_) => {
                self.ty(e);
            }
            ExprKind::Empty | ExprKind::Var(_) => self.err(
                DiagKind::OutOfFragment,
                "participant sets must be All or a Partition result (dynamically built sets leave the decidable fragment)",
                e.span,
            ),
            _ => self.err(DiagKind::Type, "expected a participant set", e.span),
        }
    }

    fn payload(&mut self, act: &ActDecl, payload: &Option<Ident>, span: Span) {
        match (act.payload, payload) {
            (None, None) => {}
            (None, Some(p)) => {
                self.err(DiagKind::Type, format!("action `{}` carries no payload", act.name.name), p.span)
            }
            (Some(_), None) => {
                self.err(DiagKind::Type, format!("action `{}` requires a payload variable", act.name.name), span)
            }
            (Some((alo, ahi)), Some(p)) => match self.int_var(&p.name) {
                None => self.err(DiagKind::Type, format!("payload `{}` must be an int variable", p.name), p.span),
                Some((lo, hi)) => {
                    if lo < alo || hi > ahi {
                        self.err(
                            DiagKind::Type,
                            format!(
                                "range [{lo},{hi}] of `{}` exceeds payload range [{alo},{ahi}] of `{}`",
                                p.name, act.name.name
                            ),
                            p.span,
                        );
                    }
                }
            },
        }
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            match &s.kind {
                StmtKind::Assign { var, value } => {
                    match (self.int_var(&var.name), &value.kind) {
                        (None, _) => {
                            self.err(DiagKind::Type, format!("`{}` is not an int variable", var.name), var.span)
                        }
                        (Some((lo, hi)), ExprKind::Int(c)) if *c < lo || *c > hi => self.err(
                            DiagKind::Type,
                            format!("{c} is outside the range [{lo},{hi}] of `{}`", var.name),
                            value.span,
                        ),
                        _ => {}
                    }
                    self.want(value, Ty::Int);
                }
                StmtKind::SetAdd { .. } | StmtKind::SetRemove { .. } => self.err(
                    DiagKind::OutOfFragment,
                    "idSet add/remove builds participant sets dynamically; participant sets must be All or a Partition result",
                    s.span,
                ),
                StmtKind::SendRz { act, payload, target } => {
                    match self.prog.act(&act.name) {
                        Some(d) if d.mode == Mode::Rendezvous => {
                            let d = d.clone();
                            self.payload(&d, payload, s.span)
                        }
                        Some(_) => self.err(DiagKind::Type, format!("`{}` is a broadcast action; use sendbr", act.name), act.span),
                        None => self.err(DiagKind::Type, format!("undeclared action `{}`", act.name), act.span),
                    }
                    self.want(target, Ty::Id);
                }
                StmtKind::SendBr { act, payload } => match self.prog.act(&act.name) {
                    Some(d) if d.mode == Mode::Broadcast => {
                        let d = d.clone();
                        self.payload(&d, payload, s.span)
                    }
                    Some(_) => self.err(DiagKind::Type, format!("`{}` is a rendezvous action; use sendrz", act.name), act.span),
                    None => self.err(DiagKind::Type, format!("undeclared action `{}`", act.name), act.span),
                },
                StmtKind::Reply { act, payload } => {
                    if self.recv_act.is_none() {
                        self.err(DiagKind::Sugar, "reply used outside a recv handler", s.span);
                    }
                    match self.prog.act(&act.name) {
                        Some(d) if d.mode == Mode::Rendezvous => {
                            let d = d.clone();
                            self.payload(&d, payload, s.span)
                        }
                        Some(_) => self.err(DiagKind::Type, format!("reply needs a rendezvous action, `{}` is broadcast", act.name), act.span),
                        None => self.err(DiagKind::Type, format!("undeclared action `{}`", act.name), act.span),
                    }
                }
                StmtKind::If { cond, then, els } => {
                    self.want(cond, Ty::Bool);
                    self.stmts(then);
                    if let Some(e) = els {
                        self.stmts(e);
                    }
                }
                StmtKind::Goto(_) => {}
            }
        }
    }
}

pub fn validate_wellformed(prog: &Program) -> Vec<Diagnostic> {
    let mut c = Checker { prog, agreements: agreement_decls(prog), diags: Vec::new(), recv_act: None };
    for v in &prog.vars {
        if let VarKind::Int { lo, hi, init } = v.kind {
            if lo > hi || init < lo || init > hi {
                c.err(DiagKind::Type, format!("`{}` needs lo <= init <= hi", v.name.name), v.span);
            }
        }
    }
    for a in &prog.acts {
        if let Some((lo, hi)) = a.payload {
            if lo > hi {
                c.err(DiagKind::Type, format!("empty payload range for `{}`", a.name.name), a.span);
            }
        }
    }
    let names: Vec<String> = c.agreements.keys().cloned().collect();
    for n in &names {
        if prog.act(n).is_some() {
            let span = c.agreements[n].span;
            c.err(DiagKind::Duplicate, format!("agreement id `{n}` clashes with an action name"), span);
        }
    }
    for (loc, h) in prog.handlers() {
        let _ = loc;
        c.recv_act = None;
        match &h.event {
            Event::Empty => {}
            Event::Recv(a) => {
                if prog.act(&a.name).is_none() {
                    c.err(DiagKind::Type, format!("undeclared action `{}`", a.name), a.span);
                }
                c.recv_act = Some(a.name.clone());
            }
            Event::Partition { id, participants, k } | Event::Consensus { id, participants, k, .. } => {
                let first = c.agreements[&id.name].clone();
                let partition = matches!(h.event, Event::Partition { .. });
                if first.partition != partition || first.k != *k || first.participants != *participants {
                    c.err(
                        DiagKind::Type,
                        format!("agreement `{}` used with inconsistent kind, participants or arity", id.name),
                        id.span,
                    );
                }
                if *k < 1 {
                    c.err(DiagKind::Type, "agreement arity k must be at least 1", h.span);
                }
                c.participants(participants);
                if let Event::Consensus { propose: Some(p), .. } = &h.event {
                    if c.int_var(&p.name).is_none() {
                        c.err(DiagKind::Type, format!("proposal `{}` must be an int variable", p.name), p.span);
                    }
                }
                if h.guard.is_some() {
                    c.err(DiagKind::Type, "where guards are allowed only on `_` and recv events", h.span);
                }
            }
        }
        match (&h.event, &h.body) {
            (Event::Partition { .. }, Body::Do(_)) => {
                c.err(DiagKind::Syntax, "a Partition handler needs win: and lose: branches", h.span)
            }
            (Event::Partition { .. }, _) => {}
            (_, Body::WinLose { .. }) => c.err(DiagKind::Syntax, "win:/lose: branches belong to Partition handlers", h.span),
            _ => {}
        }
        if let Some(g) = &h.guard {
            c.want(g, Ty::Bool);
        }
        for b in h.body.blocks() {
            c.stmts(b);
        }
    }
    for l in &prog.locations {
        for it in &l.items {
            if let Item::Passive { events, .. } = it {
                for e in events {
                    if prog.act(&e.name).is_none() && !c.agreements.contains_key(&e.name) {
                        c.err(DiagKind::Sugar, format!("passive names undeclared event `{}`", e.name), e.span);
                    }
                }
            }
        }
    }
    c.diags
}
