use crate::diag::{DiagKind, Diagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Underscore,
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    EqEq,
    Ne,
    Assign,
    Comma,
    Semi,
    Colon,
    Dot,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
    Amp,
    Pipe,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::Underscore => "_",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Eq => "=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Assign => ":=",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    let byte_at = |i: usize| if i < chars.len() { chars[i].0 } else { src.len() };

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if i < chars.len() {
                    if chars[i].1 == '\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                    i += 1;
                }
            }
        };
    }

    while i < chars.len() {
        let c = chars[i].1;
        let next = chars.get(i + 1).map(|x| x.1);
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i].1 != '\n' {
                advance!(1);
            }
            continue;
        }
        if c == '/' && next == Some('*') {
            let (sl, sc, sb) = (line, col, byte_at(i));
            advance!(2);
            loop {
                if i >= chars.len() {
                    return Err(Diagnostic::new(
                        DiagKind::Syntax,
                        "unterminated block comment",
                        Span { start: sb, end: src.len(), line: sl, col: sc },
                    ));
                }
                if chars[i].1 == '*' && chars.get(i + 1).map(|x| x.1) == Some('/') {
                    advance!(2);
                    break;
                }
                advance!(1);
            }
            continue;
        }
        let (sl, sc, sb) = (line, col, byte_at(i));
        let tok;
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].1.is_ascii_digit() {
                j += 1;
            }
            let text = &src[sb..byte_at(j)];
            let v: i64 = text.parse().map_err(|_| {
                Diagnostic::new(
                    DiagKind::Syntax,
                    format!("integer literal `{text}` out of range"),
                    Span { start: sb, end: byte_at(j), line: sl, col: sc },
                )
            })?;
            advance!(j - i);
            tok = Tok::Int(v);
        } else if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                j += 1;
            }
            let text = &src[sb..byte_at(j)];
            advance!(j - i);
            tok = if text == "_" { Tok::Underscore } else { Tok::Ident(text.to_string()) };
        } else {
            let two: Option<Tok> = match (c, next) {
                ('<', Some('=')) => Some(Tok::Le),
                ('>', Some('=')) => Some(Tok::Ge),
                ('=', Some('=')) => Some(Tok::EqEq),
                ('!', Some('=')) => Some(Tok::Ne),
                (':', Some('=')) => Some(Tok::Assign),
                ('&', Some('&')) => Some(Tok::AndAnd),
                ('|', Some('|')) => Some(Tok::OrOr),
                _ => None,
            };
            if let Some(t) = two {
                advance!(2);
                tok = t;
            } else {
                tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBrack,
                    ']' => Tok::RBrack,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    '=' => Tok::Eq,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    '.' => Tok::Dot,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '%' => Tok::Percent,
                    '!' => Tok::Bang,
                    '&' => Tok::Amp,
                    '|' => Tok::Pipe,
                    '≔' => Tok::Assign,
                    '≤' => Tok::Le,
                    '≥' => Tok::Ge,
                    '≠' => Tok::Ne,
                    other => {
                        return Err(Diagnostic::new(
                            DiagKind::Syntax,
                            format!("unexpected character `{other}`"),
                            Span { start: sb, end: sb + other.len_utf8(), line: sl, col: sc },
                        ))
                    }
                };
                advance!(1);
            }
        }
        out.push(Token { tok, span: Span { start: sb, end: byte_at(i), line: sl, col: sc } });
    }
    out.push(Token { tok: Tok::Eof, span: Span { start: src.len(), end: src.len(), line, col } });
    Ok(out)
}
