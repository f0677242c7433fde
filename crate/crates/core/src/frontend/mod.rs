//! Lexing, parsing and validation of Mercury source.

pub mod ast;
pub mod lexer;
mod parser;
pub mod pretty;
pub mod validate;

#[allow(unused_imports)]
pub(crate) use parser::Parser;
pub use parser::parse;
pub use pretty::{print_expr, print_program};
pub use validate::{validate_symmetry, validate_wellformed};

use crate::diag::{DiagKind, MercuryError};

/// Parse and run both validators. Out-of-fragment findings are reported
/// separately from ordinary type errors.
pub fn load(src: &str) -> Result<ast::Program, MercuryError> {
    let prog = parse(src)?;
    let mut diags = validate_wellformed(&prog);
    diags.extend(validate_symmetry(&prog));
    if diags.is_empty() {
        return Ok(prog);
    }
    if diags.iter().all(|d| matches!(d.kind, DiagKind::OutOfFragment | DiagKind::Symmetry)) {
        Err(MercuryError::OutOfFragment(diags))
    } else {
        Err(MercuryError::Invalid(diags))
    }
}
