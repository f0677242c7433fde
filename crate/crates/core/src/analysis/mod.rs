//! Fragment membership, cutoff amenability and repair feedback.

pub mod amenability;
pub mod compat;
pub mod compose;
pub mod spec;

pub use amenability::{check_leaf, Graph, LeafReport, Witness};
pub use compat::{check_compat, CompatReport, Violation};
pub use compose::{compose_cutoff, ClauseReport, CutoffReport};
pub use spec::{parse_spec, resolve, Leaf, Spec};

use crate::phases::PhaseSet;
use crate::semantics::LocalTs;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct SideConditions {
    pub finite_state: bool,
    pub one_rz_recv_per_phase: bool,
    pub symmetric: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FragmentReport {
    pub phase_compatible: bool,
    pub side_conditions: SideConditions,
    pub violations: Vec<Violation>,
    pub rz_conflicts: Vec<String>,
}

impl FragmentReport {
    pub fn in_fragment(&self) -> bool {
        self.phase_compatible
            && self.side_conditions.finite_state
            && self.side_conditions.one_rz_recv_per_phase
            && self.side_conditions.symmetric
    }

    /// Feedback text, one block per violation.
    pub fn render(&self) -> String {
        let mut blocks: Vec<String> = self.violations.iter().map(|v| v.render()).collect();
        blocks.extend(self.rz_conflicts.iter().cloned());
        blocks.join("\n\n")
    }
}

/// Phase compatibility plus the remaining decidability side conditions. The
/// local TS exists and the source passed symmetry validation, so those two hold.
pub fn check_fragment(ts: &LocalTs, ph: &PhaseSet) -> FragmentReport {
    let compat = check_compat(ts, ph);
    let rz_conflicts = compat::rz_receive_conflicts(ts, ph);
    FragmentReport {
        phase_compatible: compat.compatible,
        side_conditions: SideConditions {
            finite_state: true,
            one_rz_recv_per_phase: rz_conflicts.is_empty(),
            symmetric: true,
        },
        violations: compat.violations,
        rz_conflicts,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Edit {
    pub rank: usize,
    pub state: String,
    pub event: String,
    pub text: String,
}

/// Ranked edits for each violation, in report order.
pub fn suggest_fixes(report: &FragmentReport) -> Vec<Edit> {
    let mut out = Vec::new();
    for v in &report.violations {
        for (i, s) in v.suggestions.iter().enumerate() {
            out.push(Edit { rank: i + 1, state: v.state.clone(), event: v.event.clone(), text: s.clone() });
        }
    }
    out
}
