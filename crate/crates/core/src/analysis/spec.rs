//! Safety properties: boolean combinations of `atmost(K, locations [: cond])`.

use crate::diag::{DiagKind, Diagnostic, MercuryError, Span};
use crate::frontend::ast::{Expr, ExprKind};
use crate::frontend::lexer::Tok;
use crate::frontend::{print_expr, Parser};
use crate::phases::StateSet;
use crate::semantics::LocalTs;

pub const MAX_CLAUSES: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    /// At most `bound` processes may be in the described states.
    pub bound: u32,
    pub locs: Vec<String>,
    pub cond: Option<Expr>,
    pub span: Span,
}

impl Leaf {
    /// Number of processes that witnesses a violation.
    pub fn m(&self) -> usize {
        self.bound as usize + 1
    }

    pub fn text(&self) -> String {
        let target = if self.locs.len() == 1 && self.cond.is_none() {
            self.locs[0].clone()
        } else {
            let cond = self.cond.as_ref().map(|c| format!(": {}", print_expr(c))).unwrap_or_default();
            if self.locs.len() == 1 {
                format!("{}{cond}", self.locs[0])
            } else {
                format!("{{{}{cond}}}", self.locs.join(", "))
            }
        };
        format!("atmost({}, {target})", self.bound)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Spec {
    Leaf(Leaf),
    And(Vec<Spec>),
    Or(Vec<Spec>),
}

impl Spec {
    pub fn text(&self) -> String {
        match self {
            Spec::Leaf(l) => l.text(),
            Spec::And(xs) => xs.iter().map(|x| x.paren_text()).collect::<Vec<_>>().join(" & "),
            Spec::Or(xs) => xs.iter().map(|x| x.paren_text()).collect::<Vec<_>>().join(" | "),
        }
    }

    fn paren_text(&self) -> String {
        match self {
            Spec::Leaf(_) => self.text(),
            _ => format!("({})", self.text()),
        }
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        fn go<'a>(s: &'a Spec, out: &mut Vec<&'a Leaf>) {
            match s {
                Spec::Leaf(l) => out.push(l),
                Spec::And(xs) | Spec::Or(xs) => xs.iter().for_each(|x| go(x, out)),
            }
        }
        go(self, &mut out);
        out
    }

    /// Conjunctive normal form as clauses of leaf indices.
    pub fn cnf(&self) -> Result<Vec<Vec<usize>>, MercuryError> {
        let mut next = 0;
        let clauses = self.cnf_from(&mut next)?;
        Ok(clauses)
    }

    fn cnf_from(&self, next: &mut usize) -> Result<Vec<Vec<usize>>, MercuryError> {
        match self {
            Spec::Leaf(_) => {
                *next += 1;
                Ok(vec![vec![*next - 1]])
            }
            Spec::And(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    out.extend(x.cnf_from(next)?);
                }
                check_size(out.len())?;
                Ok(out)
            }
            Spec::Or(xs) => {
                let mut acc: Vec<Vec<usize>> = vec![vec![]];
                for x in xs {
                    let cs = x.cnf_from(next)?;
                    check_size(acc.len() * cs.len())?;
                    let mut nacc = Vec::new();
                    for a in &acc {
                        for c in &cs {
                            let mut clause = a.clone();
                            clause.extend(c.iter().copied());
                            clause.sort();
                            clause.dedup();
                            nacc.push(clause);
                        }
                    }
                    acc = nacc;
                }
                Ok(acc)
            }
        }
    }

    /// Truth value given the per-leaf violation predicate.
    pub fn eval(&self, leaf_ok: &mut dyn FnMut(usize) -> bool) -> bool {
        let mut next = 0;
        self.eval_from(&mut next, leaf_ok)
    }

    fn eval_from(&self, next: &mut usize, leaf_ok: &mut dyn FnMut(usize) -> bool) -> bool {
        match self {
            Spec::Leaf(_) => {
                *next += 1;
                leaf_ok(*next - 1)
            }
            Spec::And(xs) => {
                let mut r = true;
                for x in xs {
                    r &= x.eval_from(next, leaf_ok);
                }
                r
            }
            Spec::Or(xs) => {
                let mut r = false;
                for x in xs {
                    r |= x.eval_from(next, leaf_ok);
                }
                r
            }
        }
    }
}

fn check_size(n: usize) -> Result<(), MercuryError> {
    if n > MAX_CLAUSES {
        return Err(MercuryError::Invalid(vec![Diagnostic::bare(
            DiagKind::Composition,
            format!("conjunctive normal form exceeds {MAX_CLAUSES} clauses"),
        )]));
    }
    Ok(())
}

fn syntax(d: Diagnostic) -> MercuryError {
    MercuryError::Spec(d.to_string())
}

/// Parse a spec file. Top-level specs (one per line, by convention) are conjoined.
pub fn parse_spec(src: &str) -> Result<Spec, MercuryError> {
    let mut p = Parser::new(src).map_err(syntax)?;
    let mut tops = Vec::new();
    while !p.at_eof() {
        tops.push(disj(&mut p).map_err(syntax)?);
    }
    match tops.len() {
        0 => Err(MercuryError::Spec("empty property".into())),
        1 => Ok(tops.pop().unwrap()),
        _ => Ok(Spec::And(tops)),
    }
}

type PResult<T> = Result<T, Diagnostic>;

fn disj(p: &mut Parser) -> PResult<Spec> {
    let mut xs = vec![conj(p)?];
    while p.eat(&Tok::Pipe) || p.eat(&Tok::OrOr) {
        xs.push(conj(p)?);
    }
    Ok(if xs.len() == 1 { xs.pop().unwrap() } else { Spec::Or(xs) })
}

fn conj(p: &mut Parser) -> PResult<Spec> {
    let mut xs = vec![atom(p)?];
    while p.eat(&Tok::Amp) || p.eat(&Tok::AndAnd) {
        xs.push(atom(p)?);
    }
    Ok(if xs.len() == 1 { xs.pop().unwrap() } else { Spec::And(xs) })
}

fn atom(p: &mut Parser) -> PResult<Spec> {
    if p.eat(&Tok::LParen) {
        let s = disj(p)?;
        p.expect(&Tok::RParen)?;
        return Ok(s);
    }
    let start = p.span();
    if !p.eat_kw("atmost") {
        return Err(p.error(&["`atmost`", "`(`"]));
    }
    p.expect(&Tok::LParen)?;
    let k = p.int()?;
    if k < 0 {
        return Err(Diagnostic::new(DiagKind::Spec, "bound must be non-negative", p.prev_span()));
    }
    p.expect(&Tok::Comma)?;
    let braced = p.eat(&Tok::LBrace);
    let mut locs = vec![p.ident()?.name];
    if braced {
        while p.eat(&Tok::Comma) {
            locs.push(p.ident()?.name);
        }
    }
    let mut cond = if p.eat(&Tok::Colon) { Some(p.expr()?) } else { None };
    if braced {
        p.expect(&Tok::RBrace)?;
        if cond.is_none() && p.eat(&Tok::Colon) {
            cond = Some(p.expr()?);
        }
    }
    let end = p.expect(&Tok::RParen)?;
    Ok(Spec::Leaf(Leaf { bound: k as u32, locs, cond, span: start.join(end) }))
}

fn check_cond(e: &Expr, ts: &LocalTs, errs: &mut Vec<String>) {
    e.walk(&mut |x| match &x.kind {
        ExprKind::Var(v) => {
            if ts.core.vars.iter().all(|c| &c.name != v) {
                errs.push(format!("unknown variable `{v}` in property"));
            }
        }
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Not(_) | ExprKind::Neg(_) | ExprKind::Bin(..) => {}
        _ => errs.push(format!("unsupported expression `{}` in property", print_expr(x))),
    });
}

/// States described by each leaf, in leaf order.
pub fn resolve(spec: &Spec, ts: &LocalTs) -> Result<Vec<StateSet>, MercuryError> {
    let mut errs = Vec::new();
    let mut out = Vec::new();
    for leaf in spec.leaves() {
        let mut locs = Vec::new();
        for l in &leaf.locs {
            match ts.core.loc_index(l) {
                Some(i) => locs.push(i),
                None => errs.push(format!("unknown location `{l}` in property")),
            }
        }
        if let Some(c) = &leaf.cond {
            check_cond(c, ts, &mut errs);
        }
        if !errs.is_empty() {
            continue;
        }
        let set: StateSet = (0..ts.crash)
            .filter(|&s| locs.contains(&ts.states[s].loc))
            .filter(|&s| leaf.cond.as_ref().map_or(true, |c| ts.holds(s, c)))
            .collect();
        out.push(set);
    }
    if !errs.is_empty() {
        return Err(MercuryError::Spec(errs.join("; ")));
    }
    Ok(out)
}
