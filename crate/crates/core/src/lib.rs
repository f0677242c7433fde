//! Parameterized verification of Mercury agreement-based systems.

pub mod analysis;
pub mod diag;
pub mod frontend;
pub mod gspcore;
pub mod lowering;
pub mod phases;
pub mod pipeline;
pub mod semantics;
pub mod verifier;
pub mod wsts;

pub use diag::{DiagKind, Diagnostic, MercuryError};
