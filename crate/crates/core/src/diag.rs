use serde::Serialize;
use std::fmt;

/// Byte range plus line/column of its start. Equality ignores position so
/// that trees parsed from different renderings compare structurally.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Span {
    pub fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line: if self.start <= other.start { self.line } else { other.line },
            col: if self.start <= other.start { self.col } else { other.col },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagKind {
    Syntax,
    Duplicate,
    UnknownLocation,
    Symmetry,
    Type,
    OutOfFragment,
    Sugar,
    Lowering,
    StateSpace,
    NondeterministicReceive,
    PhaseCompat,
    SideCondition,
    Amenability,
    Composition,
    Spec,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

impl Diagnostic {
    pub fn new(kind: DiagKind, message: impl Into<String>, span: Span) -> Self {
        Diagnostic { kind, message: message.into(), span: Some(span) }
    }

    pub fn bare(kind: DiagKind, message: impl Into<String>) -> Self {
        Diagnostic { kind, message: message.into(), span: None }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(sp) => write!(f, "{}:{}: {}", sp.line, sp.col, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MercuryError {
    #[error("parse error: {}", join_diags(.0))]
    Parse(Vec<Diagnostic>),
    #[error("invalid program: {}", join_diags(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("not in fragment: {}", join_diags(.0))]
    OutOfFragment(Vec<Diagnostic>),
    #[error("state space not fixed and finite: more than {limit} local states")]
    StateSpace { limit: usize },
    #[error("bad spec: {0}")]
    Spec(String),
    #[error("bad gsp input: {0}")]
    Gsp(String),
}

impl MercuryError {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            MercuryError::Parse(d) | MercuryError::Invalid(d) | MercuryError::OutOfFragment(d) => d.clone(),
            MercuryError::StateSpace { limit } => vec![Diagnostic::bare(
                DiagKind::StateSpace,
                format!("state space not fixed and finite (more than {limit} local states)"),
            )],
            MercuryError::Spec(m) => vec![Diagnostic::bare(DiagKind::Spec, m.clone())],
            MercuryError::Gsp(m) => vec![Diagnostic::bare(DiagKind::Syntax, m.clone())],
        }
    }
}

fn join_diags(d: &[Diagnostic]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
