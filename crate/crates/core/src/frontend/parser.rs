use super::ast::*;
use super::lexer::{lex, Tok, Token};
use crate::diag::{DiagKind, Diagnostic, MercuryError, Span};
use std::collections::HashSet;

const BLOCK_END: &[&str] = &["on", "location", "initial", "passive", "win", "lose", "else", "process"];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    pub(crate) fn new(src: &str) -> PResult<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    pub(crate) fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn error(&self, expected: &[&str]) -> Diagnostic {
        let found = self.peek().describe();
        let msg = if expected.len() == 1 {
            format!("expected {}, found {found}", expected[0])
        } else {
            format!("expected one of {}, found {found}", expected.join(", "))
        };
        Diagnostic::new(DiagKind::Syntax, msg, self.span())
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> PResult<Span> {
        if self.peek() == t {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[&format!("`{}`", t.text())]))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    pub(crate) fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    pub(crate) fn int(&mut self) -> PResult<i64> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    fn skip_semis(&mut self) {
        while self.eat(&Tok::Semi) {}
    }

    pub(crate) fn program(&mut self) -> PResult<Program> {
        let start = self.span();
        self.expect_kw("process")?;
        let name = self.ident()?;
        let mut vars = Vec::new();
        let mut acts = Vec::new();
        loop {
            self.skip_semis();
            if self.eat_kw("variables") {
                loop {
                    self.skip_semis();
                    if self.is_kw("int") || self.is_kw("idSet") {
                        vars.push(self.var_decl()?);
                    } else {
                        break;
                    }
                }
            } else if self.eat_kw("actions") {
                let mut env = false;
                loop {
                    self.skip_semis();
                    if self.is_kw("br") || self.is_kw("rz") {
                        acts.push(self.act_decl(env)?);
                    } else if self.eat_kw("env") {
                        env = true;
                    } else {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        let mut locations = Vec::new();
        loop {
            self.skip_semis();
            if self.at_eof() {
                break;
            }
            if self.is_kw("initial") || self.is_kw("location") {
                locations.push(self.location()?);
            } else {
                return Err(self.error(&["`location`", "`initial`", "end of input"]));
            }
        }
        Ok(Program { name, vars, acts, locations, span: start.join(self.prev_span()) })
    }

    fn var_decl(&mut self) -> PResult<VarDecl> {
        let start = self.span();
        if self.eat_kw("idSet") {
            let name = self.ident()?;
            return Ok(VarDecl { name, kind: VarKind::IdSet, span: start.join(self.prev_span()) });
        }
        self.expect_kw("int")?;
        self.expect(&Tok::LBrack)?;
        let lo = self.int()?;
        self.expect(&Tok::Comma)?;
        let hi = self.int()?;
        self.expect(&Tok::RBrack)?;
        let name = self.ident()?;
        self.expect(&Tok::Assign)?;
        let init = self.int()?;
        Ok(VarDecl { name, kind: VarKind::Int { lo, hi, init }, span: start.join(self.prev_span()) })
    }

    fn act_decl(&mut self, env: bool) -> PResult<ActDecl> {
        let start = self.span();
        let mode = if self.eat_kw("br") {
            Mode::Broadcast
        } else {
            self.expect_kw("rz")?;
            Mode::Rendezvous
        };
        let name = self.ident()?;
        self.expect(&Tok::Colon)?;
        let payload = if self.eat_kw("unit") {
            None
        } else if self.eat_kw("int") {
            self.expect(&Tok::LBrack)?;
            let lo = self.int()?;
            self.expect(&Tok::Comma)?;
            let hi = self.int()?;
            self.expect(&Tok::RBrack)?;
            Some((lo, hi))
        } else {
            return Err(self.error(&["`unit`", "`int`"]));
        };
        Ok(ActDecl { name, mode, payload, env, span: start.join(self.prev_span()) })
    }

    fn location(&mut self) -> PResult<Location> {
        let start = self.span();
        let initial = self.eat_kw("initial");
        self.expect_kw("location")?;
        let name = self.ident()?;
        let mut items = Vec::new();
        loop {
            self.skip_semis();
            if self.is_kw("on") {
                items.push(Item::Handler(self.handler()?));
            } else if self.is_kw("passive") {
                let ps = self.bump().span;
                let mut events = vec![self.ident()?];
                while self.eat(&Tok::Comma) {
                    events.push(self.ident()?);
                }
                items.push(Item::Passive { events, span: ps.join(self.prev_span()) });
            } else {
                break;
            }
        }
        Ok(Location { name, initial, items, span: start.join(self.prev_span()) })
    }

    fn handler(&mut self) -> PResult<Handler> {
        let start = self.expect_kw("on")?;
        let event = self.event()?;
        let guard = if self.eat_kw("where") {
            self.expect(&Tok::LParen)?;
            let g = self.expr()?;
            self.expect(&Tok::RParen)?;
            Some(g)
        } else {
            None
        };
        let body = if self.eat_kw("win") {
            self.expect(&Tok::Colon)?;
            let win = self.block()?;
            self.skip_semis();
            self.expect_kw("lose")?;
            self.expect(&Tok::Colon)?;
            let lose = self.block()?;
            Body::WinLose { win, lose }
        } else if self.eat_kw("do") {
            Body::Do(self.block()?)
        } else {
            return Err(self.error(&["`do`", "`win`", "`where`"]));
        };
        Ok(Handler { event, guard, body, span: start.join(self.prev_span()) })
    }

    fn event(&mut self) -> PResult<Event> {
        if self.eat(&Tok::Underscore) {
            return Ok(Event::Empty);
        }
        if self.eat_kw("recv") {
            self.expect(&Tok::LParen)?;
            let act = self.ident()?;
            self.expect(&Tok::RParen)?;
            return Ok(Event::Recv(act));
        }
        let partition = self.is_kw("Partition");
        if partition || self.is_kw("Consensus") {
            self.bump();
            self.expect(&Tok::Lt)?;
            let id = self.ident()?;
            self.expect(&Tok::Gt)?;
            self.expect(&Tok::LParen)?;
            let participants = self.expr()?;
            self.expect(&Tok::Comma)?;
            let k = self.int()?;
            if partition {
                self.expect(&Tok::RParen)?;
                return Ok(Event::Partition { id, participants, k });
            }
            self.expect(&Tok::Comma)?;
            let propose = if self.eat(&Tok::Underscore) { None } else { Some(self.ident()?) };
            self.expect(&Tok::RParen)?;
            return Ok(Event::Consensus { id, participants, k, propose });
        }
        Err(self.error(&["`_`", "`recv`", "`Partition`", "`Consensus`"]))
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            self.skip_semis();
            match self.peek().clone() {
                Tok::LBrace => {
                    self.bump();
                    out.extend(self.block()?);
                    self.skip_semis();
                    self.expect(&Tok::RBrace)?;
                }
                Tok::Ident(s) if !BLOCK_END.contains(&s.as_str()) => out.push(self.stmt()?),
                _ => break,
            }
        }
        Ok(out)
    }

    fn branch(&mut self) -> PResult<Vec<Stmt>> {
        self.skip_semis();
        if self.eat(&Tok::LBrace) {
            let b = self.block()?;
            self.skip_semis();
            self.expect(&Tok::RBrace)?;
            Ok(b)
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn payload_slot(&mut self) -> PResult<Option<Ident>> {
        if self.eat(&Tok::Underscore) {
            Ok(None)
        } else {
            Ok(Some(self.ident()?))
        }
    }

    fn act_ref(&mut self) -> PResult<(Ident, Option<Ident>, bool)> {
        let act = self.ident()?;
        if self.eat(&Tok::LBrack) {
            let p = self.payload_slot()?;
            self.expect(&Tok::RBrack)?;
            Ok((act, p, true))
        } else {
            Ok((act, None, false))
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.error(&["statement"])),
        };
        let kind = match kw.as_str() {
            "if" => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(&Tok::RParen)?;
                let then = self.branch()?;
                let save = self.pos;
                self.skip_semis();
                let els = if self.eat_kw("else") {
                    Some(self.branch()?)
                } else {
                    self.pos = save;
                    None
                };
                StmtKind::If { cond, then, els }
            }
            "goto" => {
                self.bump();
                StmtKind::Goto(self.ident()?)
            }
            "sendrz" => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let (act, mut payload, bracketed) = self.act_ref()?;
                self.expect(&Tok::Comma)?;
                let target;
                if bracketed {
                    target = self.expr()?;
                } else if self.eat(&Tok::Underscore) {
                    self.expect(&Tok::Comma)?;
                    target = self.expr()?;
                } else {
                    let first = self.expr()?;
                    if self.eat(&Tok::Comma) {
                        match first.kind {
                            ExprKind::Var(name) => payload = Some(Ident { name, span: first.span }),
                            _ => {
                                return Err(Diagnostic::new(
                                    DiagKind::Syntax,
                                    "payload of a send must be a variable",
                                    first.span,
                                ))
                            }
                        }
                        target = self.expr()?;
                    } else {
                        target = first;
                    }
                }
                self.expect(&Tok::RParen)?;
                StmtKind::SendRz { act, payload, target }
            }
            "sendbr" | "reply" => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let (act, mut payload, bracketed) = self.act_ref()?;
                if !bracketed && self.eat(&Tok::Comma) {
                    payload = self.payload_slot()?;
                }
                self.expect(&Tok::RParen)?;
                if kw == "sendbr" {
                    StmtKind::SendBr { act, payload }
                } else {
                    StmtKind::Reply { act, payload }
                }
            }
            _ => {
                let name = self.ident()?;
                if self.eat(&Tok::Assign) {
                    let value = self.expr()?;
                    StmtKind::Assign { var: name, value }
                } else if self.eat(&Tok::Dot) {
                    let op = self.ident()?;
                    self.expect(&Tok::LParen)?;
                    let elem = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    match op.name.as_str() {
                        "add" => StmtKind::SetAdd { set: name, elem },
                        "remove" => StmtKind::SetRemove { set: name, elem },
                        _ => {
                            return Err(Diagnostic::new(
                                DiagKind::Syntax,
                                format!("expected `add` or `remove`, found `{}`", op.name),
                                op.span,
                            ))
                        }
                    }
                } else {
                    return Err(self.error(&["`:=`", "`.`"]));
                }
            }
        };
        Ok(Stmt { kind, span: start.join(self.prev_span()) })
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::Eq | Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Mod,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.eat(&Tok::Bang) {
            let e = self.unary()?;
            return Ok(Expr { span: start.join(e.span), kind: ExprKind::Not(Box::new(e)) });
        }
        if self.eat(&Tok::Minus) {
            let e = self.unary()?;
            return Ok(Expr { span: start.join(e.span), kind: ExprKind::Neg(Box::new(e)) });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Int(v), span: start })
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                let kind = match name.as_str() {
                    "self" => ExprKind::SelfId,
                    "All" => ExprKind::All,
                    "Empty" => ExprKind::Empty,
                    "true" | "True" => ExprKind::Bool(true),
                    "false" | "False" => ExprKind::Bool(false),
                    _ if self.peek() == &Tok::Dot && matches!(self.peek_at(1), Tok::Ident(_)) => {
                        self.bump();
                        let field = self.ident()?;
                        match field.name.as_str() {
                            "payld" => ExprKind::Payload(name),
                            "sID" => ExprKind::Sender(name),
                            "winS" => ExprKind::WinS(name),
                            "loseS" => ExprKind::LoseS(name),
                            "decVar" => {
                                self.expect(&Tok::LBrack)?;
                                let i = self.int()?;
                                self.expect(&Tok::RBrack)?;
                                ExprKind::DecVar(name, i)
                            }
                            other => {
                                return Err(Diagnostic::new(
                                    DiagKind::Syntax,
                                    format!("unknown field `{other}` (expected payld, sID, winS, loseS or decVar)"),
                                    field.span,
                                ))
                            }
                        }
                    }
                    _ => ExprKind::Var(name),
                };
                Ok(Expr { kind, span: start.join(self.prev_span()) })
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

pub fn parse(src: &str) -> Result<Program, MercuryError> {
    let mut p = Parser::new(src).map_err(|d| MercuryError::Parse(vec![d]))?;
    let prog = p.program().map_err(|d| MercuryError::Parse(vec![d]))?;
    let diags = resolve(&prog);
    if diags.is_empty() {
        Ok(prog)
    } else {
        Err(MercuryError::Parse(diags))
    }
}

fn resolve(prog: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let dup = |seen: &mut HashSet<String>, id: &Ident, what: &str, diags: &mut Vec<Diagnostic>| {
        if !seen.insert(id.name.clone()) {
            diags.push(Diagnostic::new(DiagKind::Duplicate, format!("duplicate {what} `{}`", id.name), id.span));
        }
    };
    let mut seen = HashSet::new();
    for v in &prog.vars {
        dup(&mut seen, &v.name, "variable", &mut diags);
    }
    let mut seen = HashSet::new();
    for a in &prog.acts {
        dup(&mut seen, &a.name, "action", &mut diags);
    }
    let mut locs = HashSet::new();
    for l in &prog.locations {
        dup(&mut locs, &l.name, "location", &mut diags);
    }
    let initials: Vec<&Location> = prog.locations.iter().filter(|l| l.initial).collect();
    if initials.len() != 1 {
        let span = initials.get(1).map(|l| l.span).unwrap_or(prog.span);
        diags.push(Diagnostic::new(
            DiagKind::Syntax,
            format!("exactly one location must be marked initial, found {}", initials.len()),
            span,
        ));
    }
    for (_, h) in prog.handlers() {
        for block in h.body.blocks() {
            walk_stmts(block, &mut |s| {
                if let StmtKind::Goto(t) = &s.kind {
                    if !locs.contains(&t.name) {
                        diags.push(Diagnostic::new(
                            DiagKind::UnknownLocation,
                            format!("goto names undeclared location `{}`", t.name),
                            t.span,
                        ));
                    }
                }
            });
        }
    }
    diags
}
