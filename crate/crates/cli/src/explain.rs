use crate::Failure;

const TOPICS: &[(&str, &str)] = &[
    (
        "syntax",
        "The model or property does not parse. Positions are line:column of the offending token.",
    ),
    ("duplicate", "A variable, action, agreement or location is declared twice."),
    ("unknown_location", "A `goto` or property names a location that is not declared."),
    (
        "symmetry",
        "Process ids may only be compared for equality against ids received from messages; \
         anything else breaks the symmetry the counter abstraction relies on.",
    ),
    ("type", "An expression mixes ints and booleans, or assigns outside a variable's declared range."),
    (
        "out_of_fragment",
        "The construct cannot be expressed over a fixed, finite local state space, for example \
         participant sets that change at run time (`idSet`).",
    ),
    ("sugar", "A `win:`/`lose:` block or `where` clause could not be desugared into plain handlers."),
    ("lowering", "Handler bodies could not be flattened into single-step transitions."),
    (
        "state_space",
        "Local state enumeration exceeded --max-local-states. Narrow variable ranges or raise the cap.",
    ),
    (
        "nondeterministic_receive",
        "A state has two different reactions to the same message or agreement outcome. \
         Reactions must be deterministic so that every process can be moved by a single map.",
    ),
    (
        "phase_compat",
        "Phase compatibility: every state that can start a global event must also be able to react to it, \
         internal moves must not strand other processes of the phase away from a pending reaction, and \
         after an event all participants must be able to react to the events it enables. \
         Suggestions list the missing transitions, best guess first; `(Anywhere!,{})` asks you to pick the target.",
    ),
    (
        "side_condition",
        "Each phase may receive a given rendezvous at only one location, so that a single receiver map exists.",
    ),
    (
        "amenability",
        "Cutoff amenability: every transition on a path from the initial state into the property's \
         states must be independent of other processes, or return to an independent path, or be enabled by a \
         bounded number of helper processes. The witness path marks the transitions that are not; \
         no edit is suggested, since removing the dependency is a design decision.",
    ),
    (
        "composition",
        "Conjunctions take the largest clause cutoff; a disjunction of leaves sums their sizes plus helpers, \
         and is rejected when a non-internal transition joins the states used by different leaves.",
    ),
    ("spec", "The property is malformed or names unknown locations or variables."),
    ("warning", "Informational: the result holds but deserves attention, e.g. an unfalsifiable property."),
    (
        "exit_codes",
        "0 safe or check passed, 1 unsafe or coverable, 2 not in the fragment or not cutoff-amenable, \
         3 input error, 4 resource limit exceeded.",
    ),
    (
        "crash",
        "Every process may crash in any state. Crashed processes never block a broadcast or an agreement and \
         count towards neither winners nor losers.",
    ),
    (
        "env",
        "The environment is generated from the `env` actions: it can send any of them at any time. It is not \
         counted in n and never crashes.",
    ),
];

pub fn run(topic: Option<&str>) -> Result<u8, Failure> {
    match topic {
        None => {
            for (k, _) in TOPICS {
                outln!("{k}");
            }
            Ok(0)
        }
        Some(t) => {
            let key = t.replace('-', "_").to_lowercase();
            match TOPICS.iter().find(|(k, _)| *k == key) {
                Some((_, text)) => {
                    outln!("{text}");
                    Ok(0)
                }
                None => Err(Failure { code: 3, message: format!("unknown topic `{t}`; run `mercury explain` for the list") }),
            }
        }
    }
}
