use crate::diag::Span;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident { name: name.into(), span: Span::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: Ident,
    pub vars: Vec<VarDecl>,
    pub acts: Vec<ActDecl>,
    pub locations: Vec<Location>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: Ident,
    pub kind: VarKind,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Int { lo: i64, hi: i64, init: i64 },
    IdSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Broadcast,
    Rendezvous,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActDecl {
    pub name: Ident,
    pub mode: Mode,
    pub payload: Option<(i64, i64)>,
    pub env: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub name: Ident,
    pub initial: bool,
    pub items: Vec<Item>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Handler(Handler),
    Passive { events: Vec<Ident>, span: Span },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handler {
    pub event: Event,
    pub guard: Option<Expr>,
    pub body: Body,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Empty,
    Recv(Ident),
    Partition { id: Ident, participants: Expr, k: i64 },
    Consensus { id: Ident, participants: Expr, k: i64, propose: Option<Ident> },
}

impl Event {
    pub fn agreement_id(&self) -> Option<&Ident> {
        match self {
            Event::Partition { id, .. } | Event::Consensus { id, .. } => Some(id),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    Do(Vec<Stmt>),
    WinLose { win: Vec<Stmt>, lose: Vec<Stmt> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Assign { var: Ident, value: Expr },
    SetAdd { set: Ident, elem: Expr },
    SetRemove { set: Ident, elem: Expr },
    SendRz { act: Ident, payload: Option<Ident>, target: Expr },
    SendBr { act: Ident, payload: Option<Ident> },
    Reply { act: Ident, payload: Option<Ident> },
    If { cond: Expr, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
    Goto(Ident),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Var(String),
    Payload(String),
    Sender(String),
    DecVar(String, i64),
    WinS(String),
    LoseS(String),
    SelfId,
    All,
    Empty,
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Self {
        let span = l.span.join(r.span);
        Expr { kind: ExprKind::Bin(op, Box::new(l), Box::new(r)), span }
    }

    pub fn not(e: Expr) -> Self {
        let span = e.span;
        Expr { kind: ExprKind::Not(Box::new(e)), span }
    }

    pub fn tt() -> Self {
        Expr::new(ExprKind::Bool(true))
    }

    pub fn and(l: Expr, r: Expr) -> Self {
        match (&l.kind, &r.kind) {
            (ExprKind::Bool(true), _) => r,
            (_, ExprKind::Bool(true)) => l,
            _ => Expr::bin(BinOp::And, l, r),
        }
    }

    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Not(e) | ExprKind::Neg(e) => e.walk(f),
            ExprKind::Bin(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            _ => {}
        }
    }
}

impl Program {
    pub fn initial(&self) -> Option<&Location> {
        self.locations.iter().find(|l| l.initial)
    }

    pub fn act(&self, name: &str) -> Option<&ActDecl> {
        self.acts.iter().find(|a| a.name.name == name)
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name.name == name)
    }

    pub fn handlers(&self) -> impl Iterator<Item = (&Location, &Handler)> {
        self.locations.iter().flat_map(|l| {
            l.items.iter().filter_map(move |it| match it {
                Item::Handler(h) => Some((l, h)),
                Item::Passive { .. } => None,
            })
        })
    }
}

pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        if let StmtKind::If { then, els, .. } = &s.kind {
            walk_stmts(then, f);
            if let Some(e) = els {
                walk_stmts(e, f);
            }
        }
    }
}

impl Body {
    pub fn blocks(&self) -> Vec<&[Stmt]> {
        match self {
            Body::Do(b) => vec![b],
            Body::WinLose { win, lose } => vec![win, lose],
        }
    }
}
