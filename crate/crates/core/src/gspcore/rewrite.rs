use super::{ActionKind, GspAction, GspSystem, Origin, FORMAT};
use crate::diag::MercuryError;
use crate::frontend::ast::Mode;
use crate::lowering::Participants;
use crate::phases::{PhaseSet, StateSet};
use crate::semantics::localts::Slot;
use crate::semantics::{Label, LocalTs, Transition};
use std::collections::{BTreeMap, BTreeSet};

struct Ctx<'a> {
    ts: &'a LocalTs,
    ph: &'a PhaseSet,
    cr: usize,
    env: Option<usize>,
    actions: Vec<GspAction>,
}

impl Ctx<'_> {
    fn always(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.cr).chain(self.env)
    }

    fn phase_guard(&self, states: &[usize]) -> Vec<usize> {
        let mut g: StateSet = states.iter().flat_map(|&s| self.ph.phase_union(self.ts, s)).collect();
        g.extend(self.always());
        g.into_iter().collect()
    }

    fn with_always(&self, set: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut g: StateSet = set.into_iter().collect();
        g.extend(self.always());
        g.into_iter().collect()
    }

    fn fixed(&self) -> Vec<(usize, usize)> {
        self.always().map(|s| (s, s)).collect()
    }

    fn local(&mut self, name: String, origin: Origin, slots: Vec<Vec<(usize, usize)>>, guard: Vec<usize>) {
        self.actions.push(GspAction {
            name,
            kind: ActionKind::Sender,
            arity: slots.len(),
            origin,
            guard,
            slots,
            recv_map: Vec::new(),
            identity: true,
        });
    }
}

fn payload_tag(p: Option<i64>) -> String {
    p.map(|x| format!("[{x}]")).unwrap_or_default()
}

fn mask_text(ts: &LocalTs, id: usize, mask: u64) -> String {
    let vs: Vec<String> = ts.decided_values(id, mask).iter().map(|v| v.to_string()).collect();
    format!("{{{}}}", vs.join(","))
}

/// States taking part in agreement `id`, or `None` when every process does.
fn participants(ts: &LocalTs, id: usize) -> Option<StateSet> {
    let (p, want) = match &ts.agreement(id).participants {
        Participants::All => return None,
        Participants::WinS(p) => (p, 1),
        Participants::LoseS(p) => (p, 0),
    };
    let pid = ts.agr_names.iter().position(|x| x == p)?;
    let slot = ts.slots.iter().position(|s| *s == Slot::Role { id: pid })?;
    Some((0..ts.crash).filter(|&s| ts.states[s].vals[slot] == want).collect())
}

/// Rewrite a local TS into a GSP-Core system over its states plus crash and env.
pub fn rewrite(ts: &LocalTs, ph: &PhaseSet) -> Result<GspSystem, MercuryError> {
    let cr = ts.crash;
    let has_env = ts.core.acts.iter().any(|a| a.env);
    let env = has_env.then_some(cr + 1);
    let mut states: Vec<String> = (0..=cr).map(|s| ts.render_state(s)).collect();
    if has_env {
        states.push("(env,{})".into());
    }
    let mut cx = Ctx { ts, ph, cr, env, actions: Vec::new() };
    let sd = crate::phases::src_dst_sets(ts);

    let mut by_label: BTreeMap<Label, Vec<&Transition>> = BTreeMap::new();
    for t in &ts.transitions {
        if t.src == cr {
            continue;
        }
        match t.label {
            Label::Internal => {
                if t.src != t.dst {
                    let g = cx.phase_guard(&[t.src]);
                    cx.local(format!("tau#{}->{}", t.src, t.dst), Origin::Internal, vec![vec![(t.src, t.dst)]], g);
                }
            }
            Label::Crash => {}
            l => by_label.entry(l).or_default().push(t),
        }
    }
    for s in 0..cr {
        let g = cx.phase_guard(&[s]);
        cx.local(format!("crash#{s}"), Origin::Crash, vec![vec![(s, cr)]], g);
    }

    let recv_of = |act: usize, payload: Option<i64>, bro: bool| -> Vec<(usize, usize)> {
        let l = if bro { Label::RecvBr { act, payload } } else { Label::RecvRz { act, payload } };
        by_label.get(&l).map(|v| v.iter().map(|t| (t.src, t.dst)).collect()).unwrap_or_default()
    };

    for (ai, decl) in ts.core.acts.iter().enumerate() {
        let name = &decl.name.name;
        let payloads: Vec<Option<i64>> = match decl.payload {
            Some((lo, hi)) => (lo..=hi).map(Some).collect(),
            None => vec![None],
        };
        let src_act: StateSet = sd[&crate::semantics::EventId::Act(ai)].0.clone();
        for p in payloads {
            let tag = format!("{name}{}", payload_tag(p));
            match decl.mode {
                Mode::Broadcast => {
                    let mut recv = recv_of(ai, p, true);
                    recv.extend(cx.fixed());
                    let guard = cx.with_always(src_act.iter().copied());
                    let sends: Vec<(usize, usize)> = by_label
                        .get(&Label::SendBr { act: ai, payload: p })
                        .map(|v| v.iter().map(|t| (t.src, t.dst)).collect())
                        .unwrap_or_default();
                    if !sends.is_empty() {
                        cx.actions.push(GspAction {
                            name: tag.clone(),
                            kind: ActionKind::Sender,
                            arity: 1,
                            origin: Origin::Broadcast,
                            guard: guard.clone(),
                            slots: vec![sends],
                            recv_map: recv.clone(),
                            identity: false,
                        });
                    }
                    if let (true, Some(e)) = (decl.env, env) {
                        cx.actions.push(GspAction {
                            name: format!("env:{tag}"),
                            kind: ActionKind::Sender,
                            arity: 1,
                            origin: Origin::EnvBroadcast,
                            guard,
                            slots: vec![vec![(e, e)]],
                            recv_map: recv,
                            identity: false,
                        });
                    }
                }
                Mode::Rendezvous => {
                    let sends: Vec<(usize, usize)> = by_label
                        .iter()
                        .filter(|(l, _)| matches!(l, Label::SendRz { act, payload, .. } if *act == ai && *payload == p))
                        .flat_map(|(_, v)| v.iter().map(|t| (t.src, t.dst)))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let recvs = recv_of(ai, p, false);
                    if decl.env {
                        for &(s, d) in &sends {
                            let g = cx.phase_guard(&[s]);
                            cx.local(format!("send:{tag}#{s}->{d}"), Origin::EnvSend, vec![vec![(s, d)]], g);
                        }
                        for &(u, v) in &recvs {
                            let g = cx.phase_guard(&[u]);
                            cx.local(format!("env:{tag}#{u}->{v}"), Origin::EnvReceive, vec![vec![(u, v)]], g);
                        }
                    } else {
                        for &(s, d) in &sends {
                            for &(u, v) in &recvs {
                                let g = cx.phase_guard(&[s, u]);
                                cx.local(
                                    format!("rz:{tag}#{s}->{d},{u}->{v}"),
                                    Origin::Rendezvous,
                                    vec![vec![(s, d)], vec![(u, v)]],
                                    g,
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    for id in 0..ts.agr_names.len() {
        let info = ts.agreement(id);
        let name = ts.agr_names[id].clone();
        let part = participants(ts, id);
        let trans: Vec<&Transition> = by_label
            .iter()
            .filter(|(l, _)| l.event() == Some(crate::semantics::EventId::Agr(id)))
            .flat_map(|(_, v)| v.iter().copied())
            .filter(|t| part.as_ref().map_or(true, |p| p.contains(&t.src)))
            .collect();
        let handled: StateSet = trans.iter().map(|t| t.src).collect();
        // Participants without a handler block the agreement; everyone else is a bystander.
        let guard: Vec<usize> = match &part {
            None => cx.with_always(handled.iter().copied()),
            Some(p) => cx.with_always((0..cr).filter(|s| !p.contains(s) || handled.contains(s))),
        };
        let identity = part.is_some();
        if info.partition {
            let wins: Vec<(usize, usize)> =
                trans.iter().filter(|t| matches!(t.label, Label::PartWin { .. })).map(|t| (t.src, t.dst)).collect();
            let mut recv: Vec<(usize, usize)> =
                trans.iter().filter(|t| matches!(t.label, Label::PartLose { .. })).map(|t| (t.src, t.dst)).collect();
            recv.extend(cx.fixed());
            if wins.is_empty() {
                continue;
            }
            cx.actions.push(GspAction {
                name,
                kind: ActionKind::Maximal,
                arity: info.k,
                origin: Origin::Partition,
                guard,
                slots: vec![wins],
                recv_map: recv,
                identity,
            });
        } else {
            let mut proposes: BTreeMap<i64, StateSet> = BTreeMap::new();
            let mut masks = BTreeSet::new();
            for t in &trans {
                if let Label::Cons { decided, acting, .. } = t.label {
                    masks.insert(decided);
                    if acting && decided.count_ones() == 1 {
                        proposes.entry(ts.decided_values(id, decided)[0]).or_default().insert(t.src);
                    }
                }
            }
            for mask in masks {
                let vals = ts.decided_values(id, mask);
                let of_mask: Vec<&&Transition> =
                    trans.iter().filter(|t| matches!(t.label, Label::Cons { decided, .. } if decided == mask)).collect();
                let slots: Vec<Vec<(usize, usize)>> = vals
                    .iter()
                    .map(|v| {
                        let from = proposes.get(v).cloned().unwrap_or_default();
                        of_mask
                            .iter()
                            .filter(|t| from.contains(&t.src) && matches!(t.label, Label::Cons { acting: true, .. }))
                            .map(|t| (t.src, t.dst))
                            .collect()
                    })
                    .collect();
                let mut recv: Vec<(usize, usize)> = of_mask.iter().map(|t| (t.src, t.dst)).collect();
                recv.extend(cx.fixed());
                cx.actions.push(GspAction {
                    name: format!("{name}#w={}", mask_text(ts, id, mask)),
                    kind: ActionKind::Sender,
                    arity: slots.len(),
                    origin: Origin::Consensus,
                    guard: guard.clone(),
                    slots,
                    recv_map: recv,
                    identity,
                });
            }
        }
    }

    for a in &mut cx.actions {
        a.recv_map.sort();
        a.recv_map.dedup();
        for s in &mut a.slots {
            s.sort();
            s.dedup();
        }
    }
    cx.actions.sort_by(|a, b| a.name.cmp(&b.name));
    let sys = GspSystem { format: FORMAT.into(), states, initial: ts.initial, crash: cr, env, actions: cx.actions };
    sys.validate()?;
    Ok(sys)
}
