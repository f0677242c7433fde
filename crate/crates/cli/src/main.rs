use clap::{Args, Parser, Subcommand, ValueEnum};
use mercury_core::analysis::{self, CutoffReport, FragmentReport, Graph, Spec};
use mercury_core::gspcore::{self, GspSystem};
use mercury_core::pipeline::{Model, Scope};
use mercury_core::semantics::DEFAULT_STATE_CAP;
use mercury_core::verifier::{self, Limits, Outcome, Targets};
use mercury_core::wsts::{self, CoverLimits};
use mercury_core::{lowering, MercuryError};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

// Stdout writes that tolerate a closed pipe (e.g. `| head`).
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

mod explain;

const EXIT_SAFE: u8 = 0;
const EXIT_UNSAFE: u8 = 1;
const EXIT_NOT_IN_FRAGMENT: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

#[derive(Parser)]
#[command(name = "mercury", version, about = "Parameterized verification of agreement-based distributed protocols")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fragment membership, phase compatibility and cutoff amenability.
    Check(Common),
    /// List the phases of the local transition system.
    Phases(Common),
    /// Cutoff for the property.
    Cutoff(Common),
    /// Check the property at the cutoff (or at --n).
    Verify(VerifyArgs),
    /// Emit the desugared core program or the GSP system as JSON.
    Translate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gsp")]
        emit: Emit,
    },
    /// Backward coverability of the property's violations, for any number of processes.
    Cover(CoverArgs),
    /// Explain a diagnostic kind and how the tool handles it.
    Explain {
        /// Diagnostic kind, e.g. phase_compat or amenability. Omit to list all.
        topic: Option<String>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Model file (.mer); `cover` also accepts a .gsp.json system.
    model: PathBuf,
    /// Property file; defaults to the model's sidecar .spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Inline property, e.g. "atmost(1, Leader)".
    #[arg(long, conflicts_with = "spec")]
    prop: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Cap on the number of local states.
    #[arg(long, env = "MERCURY_MAX_LOCAL_STATES", default_value_t = DEFAULT_STATE_CAP)]
    max_local_states: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Number of processes; overrides the cutoff and makes the verdict bounded.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, env = "MERCURY_MAX_STATES", default_value_t = verifier::DEFAULT_MAX_STATES)]
    max_states: usize,
    #[arg(long, env = "MERCURY_MAX_SECONDS")]
    max_seconds: Option<f64>,
    /// Counterexample trace format.
    #[arg(long, value_enum, default_value = "text")]
    trace: Format,
}

#[derive(Args)]
struct CoverArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, env = "MERCURY_MAX_EXPANSIONS", default_value_t = wsts::DEFAULT_MAX_EXPANSIONS)]
    max_expansions: usize,
    #[arg(long, env = "MERCURY_MAX_SECONDS")]
    max_seconds: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Core,
    Gsp,
}

fn positive(name: &str, v: usize) -> Result<(), MercuryError> {
    if v == 0 {
        return Err(MercuryError::Spec(format!("--{name} must be positive")));
    }
    Ok(())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<MercuryError> for Failure {
    fn from(e: MercuryError) -> Self {
        let code = match e {
            MercuryError::OutOfFragment(_) | MercuryError::StateSpace { .. } => EXIT_NOT_IN_FRAGMENT,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: String) -> Failure {
    Failure { code: EXIT_INPUT, message }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn load_model(c: &Common) -> Result<Model, Failure> {
    positive("max-local-states", c.max_local_states)?;
    let src = read(&c.model)?;
    Ok(Model::build(&src, c.max_local_states)?)
}

fn load_spec(c: &Common) -> Result<Spec, Failure> {
    if let Some(p) = &c.prop {
        return Ok(analysis::parse_spec(p)?);
    }
    let path = match &c.spec {
        Some(p) => p.clone(),
        None => {
            let name = c.model.to_string_lossy();
            let stem = name.strip_suffix(".gsp.json").or_else(|| name.strip_suffix(".mer")).unwrap_or(&name);
            PathBuf::from(format!("{stem}.spec"))
        }
    };
    if !path.exists() {
        return Err(input_error(format!("no property file: {} not found (use --spec or --prop)", path.display())));
    }
    Ok(analysis::parse_spec(&read(&path)?)?)
}

fn print_json(v: &Value) {
    outln!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Check(c) => cmd_check(&c),
        Cmd::Phases(c) => cmd_phases(&c),
        Cmd::Cutoff(c) => cmd_cutoff(&c),
        Cmd::Verify(v) => cmd_verify(&v),
        Cmd::Translate { common, emit } => cmd_translate(&common, emit),
        Cmd::Cover(c) => cmd_cover(&c),
        Cmd::Explain { topic } => explain::run(topic.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn fragment_json(m: &Model, rep: &FragmentReport) -> Value {
    let state_index = |name: &str| (0..m.ts.crash).find(|&s| m.ts.render_state(s) == name);
    let mut diags: Vec<Value> = rep
        .violations
        .iter()
        .map(|v| {
            let phases = state_index(&v.state).map(|s| m.phases.membership[s].clone()).unwrap_or_default();
            json!({
                "kind": "phase_compat",
                "condition": v.condition,
                "message": v.message,
                "phase": phases,
                "states": [v.state],
                "events": [v.event],
                "suggestions": v.suggestions,
                "witness_path": [],
            })
        })
        .collect();
    diags.extend(rep.rz_conflicts.iter().map(|c| {
        json!({"kind": "side_condition", "message": c, "phase": [], "states": [], "events": [], "suggestions": [], "witness_path": []})
    }));
    json!({
        "in_fragment": rep.in_fragment(),
        "phase_compatible": rep.phase_compatible,
        "side_conditions": rep.side_conditions,
        "diagnostics": diags,
    })
}

fn cutoff_json(m: &Model, g: &Graph, spec: &Spec, rep: &CutoffReport) -> Value {
    let leaves: Vec<Value> = spec
        .leaves()
        .iter()
        .zip(&rep.leaves)
        .map(|(l, r)| {
            json!({
                "spec": l.text(),
                "amenable": r.amenable,
                "m": r.m,
                "helpers": r.helpers,
                "cutoff": r.cutoff,
                "via": r.via,
                "witness_path": r.witness.as_ref().map(|w| w.to_json(&m.ts, g)).unwrap_or(json!([])),
                "warnings": r.warnings,
            })
        })
        .collect();
    json!({
        "amenable": rep.amenable,
        "cutoff": rep.cutoff,
        "leaves": leaves,
        "clauses": rep.clauses,
        "warnings": rep.warnings,
    })
}

fn render_cutoff(m: &Model, g: &Graph, spec: &Spec, rep: &CutoffReport) -> String {
    let mut out = Vec::new();
    for w in &rep.warnings {
        out.push(format!("warning: {w}"));
    }
    for (l, r) in spec.leaves().iter().zip(&rep.leaves) {
        if let Some(w) = &r.witness {
            out.push(format!("{}:\n{}", l.text(), w.render(&m.ts, g)));
        }
    }
    for c in &rep.clauses {
        if let Some(conflict) = &c.conflict {
            out.push(format!("disjunction rejected: {conflict}"));
        }
    }
    match rep.cutoff {
        Some(c) if rep.amenable => out.push(format!("cutoff = {c}")),
        _ => out.push("the system is not cutoff-amenable".into()),
    }
    out.join("\n")
}

fn cmd_check(c: &Common) -> Result<u8, Failure> {
    let m = load_model(c)?;
    let spec = load_spec(c)?;
    let frag = m.fragment();
    let g = Graph::new(&m.ts);
    let cut = if frag.in_fragment() {
        let sets = m.targets(&spec)?;
        Some(analysis::compose::compose_with(&m.ts, &g, &spec, &sets)?)
    } else {
        None
    };
    let ok = frag.in_fragment() && cut.as_ref().map_or(false, |r| r.amenable);
    if c.format == Format::Json {
        print_json(&json!({
            "phases": m.phases.count(),
            "fragment": fragment_json(&m, &frag),
            "cutoff": cut.as_ref().map(|r| cutoff_json(&m, &g, &spec, r)),
        }));
    } else {
        outln!("phases: {}", m.phases.count());
        if frag.in_fragment() {
            outln!("phase-compatible: yes");
        } else {
            outln!("{}", frag.render());
            outln!("not in the decidable fragment");
        }
        if let Some(r) = &cut {
            outln!("{}", render_cutoff(&m, &g, &spec, r));
        }
    }
    Ok(if ok { EXIT_SAFE } else { EXIT_NOT_IN_FRAGMENT })
}

fn cmd_phases(c: &Common) -> Result<u8, Failure> {
    let m = load_model(c)?;
    if c.format == Format::Json {
        print_json(&json!({"count": m.phases.count(), "detail": m.phases.to_json(&m.ts)}));
        return Ok(EXIT_SAFE);
    }
    outln!("phases: {}", m.phases.count());
    for (i, p) in m.phases.phases.iter().enumerate() {
        let states: Vec<String> = p.iter().map(|&s| m.ts.render_state(s)).collect();
        outln!("phase {i}: {}", states.join(", "));
    }
    Ok(EXIT_SAFE)
}

fn cmd_cutoff(c: &Common) -> Result<u8, Failure> {
    let m = load_model(c)?;
    let spec = load_spec(c)?;
    let sets = m.targets(&spec)?;
    let g = Graph::new(&m.ts);
    let rep = analysis::compose::compose_with(&m.ts, &g, &spec, &sets)?;
    if c.format == Format::Json {
        print_json(&cutoff_json(&m, &g, &spec, &rep));
    } else {
        outln!("{}", render_cutoff(&m, &g, &spec, &rep));
    }
    Ok(if rep.amenable { EXIT_SAFE } else { EXIT_NOT_IN_FRAGMENT })
}

fn cmd_verify(v: &VerifyArgs) -> Result<u8, Failure> {
    positive("max-states", v.max_states)?;
    if v.n == Some(0) {
        return Err(input_error("--n must be positive".into()));
    }
    let m = load_model(&v.common)?;
    let spec = load_spec(&v.common)?;
    let limits = Limits { max_states: v.max_states, max_seconds: v.max_seconds };
    let run = m.verify(&spec, v.n, &limits)?;
    let verdict = &run.verdict;
    let checks_failed = v.n.is_none() && run.scope == Scope::BoundedOnly && verdict.result == Outcome::Safe;
    let code = match verdict.result {
        Outcome::Unsafe => EXIT_UNSAFE,
        Outcome::ResourceExceeded => EXIT_RESOURCE,
        Outcome::Safe if checks_failed => EXIT_NOT_IN_FRAGMENT,
        Outcome::Safe => EXIT_SAFE,
    };
    let g = Graph::new(&m.ts);
    let cutoff_text = run.cutoff.as_ref().and_then(|c| c.cutoff).map_or("none".to_string(), |c| c.to_string());
    if v.common.format == Format::Json {
        print_json(&json!({
            "phases": m.phases.count(),
            "in_fragment": run.fragment.in_fragment(),
            "cutoff": run.cutoff.as_ref().map(|r| cutoff_json(&m, &g, &spec, r)),
            "result": verdict.result,
            "scope": run.scope,
            "n": verdict.n,
            "states": verdict.states,
            "depth": verdict.depth,
            "seconds": verdict.seconds,
            "trace": verdict.trace,
        }));
        return Ok(code);
    }
    if !run.fragment.in_fragment() {
        outln!("{}", run.fragment.render());
        outln!("not in the decidable fragment");
    } else if let Some(r) = run.cutoff.as_ref().filter(|r| !r.amenable) {
        outln!("{}", render_cutoff(&m, &g, &spec, r));
    }
    let label = match verdict.result {
        Outcome::Safe => format!("{} ({})", verdict.result.text(), run.scope.text()),
        _ => verdict.result.text().to_string(),
    };
    outln!("phases: {}, cutoff: {cutoff_text}, result: {label}", m.phases.count());
    outln!("n: {}, states explored: {}, time: {:.3}s", verdict.n, verdict.states, verdict.seconds);
    if let Some(trace) = &verdict.trace {
        match v.trace {
            Format::Text => out!("trace:\n{}", verifier::render_trace(trace)),
            Format::Json => print_json(&json!(trace)),
        }
    }
    Ok(code)
}

fn cmd_translate(c: &Common, emit: Emit) -> Result<u8, Failure> {
    let m = load_model(c)?;
    match emit {
        Emit::Core => {
            if c.format == Format::Json {
                print_json(&m.ts.to_json());
            } else {
                out!("{}", lowering::print_core(&m.core));
            }
        }
        Emit::Gsp => print_json(&m.gsp()?.to_json()),
    }
    Ok(EXIT_SAFE)
}

/// Location name of a rendered GSP state such as `(Leader,{x=1})`.
fn location_of(state: &str) -> &str {
    let inner = state.strip_prefix('(').unwrap_or(state);
    inner.split(',').next().unwrap_or(inner)
}

fn gsp_targets(sys: &GspSystem, spec: &Spec) -> Result<Targets, Failure> {
    let mut out = Vec::new();
    for leaf in spec.leaves() {
        if leaf.cond.is_some() {
            return Err(input_error(format!("`{}`: conditions are not supported on GSP input", leaf.text())));
        }
        let states: Vec<usize> = (0..sys.dims())
            .filter(|&s| s != sys.crash && Some(s) != sys.env && leaf.locs.iter().any(|l| l == location_of(&sys.states[s])))
            .collect();
        out.push((leaf.m(), states));
    }
    Ok(out)
}

fn cmd_cover(c: &CoverArgs) -> Result<u8, Failure> {
    positive("max-expansions", c.max_expansions)?;
    let spec = load_spec(&c.common)?;
    let is_json = c.common.model.to_string_lossy().ends_with(".json");
    let (sys, targets) = if is_json {
        let sys = GspSystem::from_json(&read(&c.common.model)?)?;
        let t = gsp_targets(&sys, &spec)?;
        (sys, t)
    } else {
        let m = load_model(&c.common)?;
        let sets = m.targets(&spec)?;
        (m.gsp()?, verifier::targets(&spec, &sets))
    };
    let cond = gspcore::check_conditions(&sys);
    if !cond.well_behaved() {
        eprintln!(
            "warning: the system violates the guard conditions on {} action pair(s); the answer may be unsound",
            cond.violations
        );
        for e in &cond.examples {
            eprintln!("  {e}");
        }
    }
    let limits = CoverLimits { max_expansions: c.max_expansions, max_seconds: c.max_seconds };
    let res = wsts::coverable(&sys, &spec, &targets, &limits)?;
    let (word, code) = if res.coverable {
        ("COVERABLE", EXIT_UNSAFE)
    } else if res.resource_exceeded {
        ("RESOURCE EXCEEDED", EXIT_RESOURCE)
    } else {
        ("UNCOVERABLE", EXIT_SAFE)
    };
    if c.common.format == Format::Json {
        print_json(&json!({
            "result": word.to_lowercase().replace(' ', "_"),
            "well_behaved": cond.well_behaved(),
            "basis_size": res.basis_size,
            "expansions": res.expansions,
            "seconds": res.seconds,
            "chain": res.chain,
        }));
    } else {
        outln!("{word}");
        outln!("basis: {}, expansions: {}, time: {:.3}s", res.basis_size, res.expansions, res.seconds);
        if res.coverable {
            out!("chain:\n{}", wsts::render_chain(&res.chain));
        }
    }
    Ok(code)
}
