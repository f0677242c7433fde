//! End-to-end construction of the analysis artifacts for one model.

use crate::analysis::{self, CutoffReport, FragmentReport, Spec};
use crate::diag::MercuryError;
use crate::frontend::{self, ast::Program};
use crate::gspcore::{self, GspSystem};
use crate::verifier::{self, Limits, Outcome, Verdict};
use crate::lowering::{self, CoreProcess};
use crate::phases::{compute_phases, PhaseSet, StateSet};
use crate::semantics::{build_local_ts, LocalTs};

#[derive(Clone, Debug)]
pub struct Model {
    pub program: Program,
    pub core: CoreProcess,
    pub ts: LocalTs,
    pub phases: PhaseSet,
}

impl Model {
    pub fn build(src: &str, max_local_states: usize) -> Result<Model, MercuryError> {
        let program = frontend::load(src)?;
        let desugared = lowering::desugar(&program)?;
        let core = lowering::lower_to_core(&desugared)?;
        let ts = build_local_ts(&core, max_local_states)?;
        let phases = compute_phases(&ts);
        Ok(Model { program, core, ts, phases })
    }

    pub fn fragment(&self) -> FragmentReport {
        analysis::check_fragment(&self.ts, &self.phases)
    }

    /// Per-leaf target states of `spec`.
    pub fn targets(&self, spec: &Spec) -> Result<Vec<StateSet>, MercuryError> {
        analysis::resolve(spec, &self.ts)
    }

    pub fn cutoff(&self, spec: &Spec) -> Result<CutoffReport, MercuryError> {
        let sets = self.targets(spec)?;
        analysis::compose_cutoff(&self.ts, spec, &sets)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Verified at the cutoff: holds for every number of processes.
    Parameterized,
    /// Holds only for the size that was checked.
    BoundedOnly,
}

impl Scope {
    pub fn text(self) -> &'static str {
        match self {
            Scope::Parameterized => "parameterized",
            Scope::BoundedOnly => "bounded only",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Run {
    pub fragment: FragmentReport,
    pub cutoff: Option<CutoffReport>,
    pub verdict: Verdict,
    pub scope: Scope,
}

impl Model {
    pub fn gsp(&self) -> Result<GspSystem, MercuryError> {
        gspcore::rewrite(&self.ts, &self.phases)
    }

    /// Fragment check, cutoff, then verification at the cutoff. With `n` given,
    /// or when the checks fail, the verdict covers that size only (default: the largest leaf m).
    pub fn verify(&self, spec: &Spec, n: Option<u32>, limits: &Limits) -> Result<Run, MercuryError> {
        let fragment = self.fragment();
        let sets = self.targets(spec)?;
        let cutoff = if fragment.in_fragment() { Some(analysis::compose_cutoff(&self.ts, spec, &sets)?) } else { None };
        let cut = cutoff.as_ref().filter(|c| c.amenable).and_then(|c| c.cutoff).map(|c| c as u32);
        let (size, scope) = match (n, cut) {
            (Some(n), _) => (n, Scope::BoundedOnly),
            (None, Some(c)) => (c, Scope::Parameterized),
            (None, None) => (spec.leaves().iter().map(|l| l.m() as u32).max().unwrap_or(1), Scope::BoundedOnly),
        };
        let sys = self.gsp()?;
        let verdict = verifier::verify(&sys, spec, &verifier::targets(spec, &sets), size, limits);
        let scope = if verdict.result == Outcome::Safe { scope } else { Scope::BoundedOnly };
        Ok(Run { fragment, cutoff, verdict, scope })
    }
}
