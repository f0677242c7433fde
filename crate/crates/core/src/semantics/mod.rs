//! Local transition systems and the indexed global semantics.

pub mod indexed;
pub mod localts;

pub use indexed::{reachable_indexed, IndexedState, Oracle, StepLabel};
pub use localts::{build_local_ts, classify, EventId, Label, LocalTs, Role, Transition, BOT, DEFAULT_STATE_CAP};
