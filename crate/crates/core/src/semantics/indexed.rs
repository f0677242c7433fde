use super::localts::{Label, LocalTs};
use crate::diag::MercuryError;
use crate::frontend::ast::Mode;
use crate::lowering::{CoreKind, Participants};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// Sender record for `act.sID` resolution.
pub const NO_SENDER: u8 = 0;
pub const ENV_SENDER: u8 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexedState {
    /// Local state id of each system process (`ts.crash` when crashed).
    pub procs: Vec<usize>,
    /// Per process and tracked action: `NO_SENDER`, `ENV_SENDER`, or `2 + pid`.
    pub senders: Vec<u8>,
    /// Per tracked partition: last (winners, losers) as pid bitmasks.
    pub parts: Vec<Option<(u64, u64)>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepLabel {
    Internal { pid: usize },
    Crash { pid: usize },
    Broadcast { act: usize, payload: Option<i64>, sender: Option<usize> },
    Rendezvous { act: usize, payload: Option<i64>, sender: Option<usize>, receiver: Option<usize> },
    Partition { id: usize, gamma: u64, failed: u64, winners: u64 },
    Consensus { id: usize, gamma: u64, failed: u64, decided: u64, proposals: Vec<i64> },
}

/// Transitions of one local state, grouped for the global step rules.
#[derive(Default, Clone, Debug)]
struct StateIndex {
    internal: Vec<usize>,
    send_br: Vec<(usize, Option<i64>, usize)>,
    send_rz: Vec<(usize, Option<i64>, Option<usize>, usize)>,
    recv: HashMap<(usize, Option<i64>), usize>,
    win: HashMap<usize, Vec<usize>>,
    lose: HashMap<usize, usize>,
    cons: HashMap<(usize, u64), usize>,
    proposal: HashMap<usize, i64>,
}

pub struct Oracle<'a> {
    pub ts: &'a LocalTs,
    pub n: usize,
    tracked_acts: Vec<usize>,
    tracked_parts: Vec<usize>,
    idx: Vec<StateIndex>,
    env_acts: Vec<(usize, Option<i64>)>,
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

fn submasks(mask: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut s = mask;
    loop {
        out.push(s);
        if s == 0 {
            break;
        }
        s = (s - 1) & mask;
    }
    out
}

impl<'a> Oracle<'a> {
    pub fn new(ts: &'a LocalTs, n: usize) -> Self {
        let core = &ts.core;
        let act_idx = |name: &str| core.acts.iter().position(|a| a.name.name == name).unwrap();
        let mut tracked_acts = BTreeSet::new();
        for h in &core.handlers {
            if let CoreKind::Send { send, .. } = &h.kind {
                if let Some(t) = &send.target {
                    if !core.act(&send.act).map_or(false, |a| a.env) {
                        tracked_acts.insert(act_idx(t));
                    }
                }
            }
        }
        let mut tracked_parts = BTreeSet::new();
        for a in core.agreements.values() {
            if let Participants::WinS(p) | Participants::LoseS(p) = &a.participants {
                tracked_parts.insert(ts.agr_names.iter().position(|x| x == p).unwrap());
            }
        }
        let mut idx = vec![StateIndex::default(); ts.crash];
        for t in &ts.transitions {
            if t.src == ts.crash {
                continue;
            }
            let e = &mut idx[t.src];
            match t.label {
                Label::Internal => e.internal.push(t.dst),
                Label::SendBr { act, payload } => e.send_br.push((act, payload, t.dst)),
                Label::SendRz { act, payload, target } => e.send_rz.push((act, payload, target, t.dst)),
                Label::RecvBr { act, payload } | Label::RecvRz { act, payload } => {
                    e.recv.insert((act, payload), t.dst);
                }
                Label::PartWin { id } => e.win.entry(id).or_default().push(t.dst),
                Label::PartLose { id } => {
                    e.lose.insert(id, t.dst);
                }
                Label::Cons { id, decided, acting } => {
                    e.cons.insert((id, decided), t.dst);
                    if acting && decided.count_ones() == 1 {
                        let v = ts.decided_values(id, decided)[0];
                        e.proposal.insert(id, v);
                    }
                }
                Label::Crash => {}
            }
        }
        let mut env_acts = Vec::new();
        for (ai, a) in core.acts.iter().enumerate() {
            if !a.env {
                continue;
            }
            match a.payload {
                Some((lo, hi)) => env_acts.extend((lo..=hi).map(|p| (ai, Some(p)))),
                None => env_acts.push((ai, None)),
            }
        }
        Oracle {
            ts,
            n,
            tracked_acts: tracked_acts.into_iter().collect(),
            tracked_parts: tracked_parts.into_iter().collect(),
            idx,
            env_acts,
        }
    }

    pub fn initial(&self) -> IndexedState {
        IndexedState {
            procs: vec![self.ts.initial; self.n],
            senders: vec![NO_SENDER; self.n * self.tracked_acts.len()],
            parts: vec![None; self.tracked_parts.len()],
        }
    }

    fn live(&self, q: &IndexedState, i: usize) -> bool {
        q.procs[i] != self.ts.crash
    }

    fn record_sender(&self, q: &mut IndexedState, receiver: usize, act: usize, code: u8) {
        if let Some(k) = self.tracked_acts.iter().position(|&a| a == act) {
            q.senders[receiver * self.tracked_acts.len() + k] = code;
        }
    }

    fn sender_of(&self, q: &IndexedState, pid: usize, act: usize) -> u8 {
        match self.tracked_acts.iter().position(|&a| a == act) {
            Some(k) => q.senders[pid * self.tracked_acts.len() + k],
            None => NO_SENDER,
        }
    }

    /// Live participant set of an agreement, or `None` when its token is unset.
    fn gamma(&self, q: &IndexedState, id: usize) -> Option<u64> {
        let live: u64 = (0..self.n).filter(|&i| self.live(q, i)).fold(0, |m, i| m | 1 << i);
        match &self.ts.agreement(id).participants {
            Participants::All => Some(live),
            Participants::WinS(p) | Participants::LoseS(p) => {
                let pid = self.ts.agr_names.iter().position(|x| x == p).unwrap();
                let k = self.tracked_parts.iter().position(|&x| x == pid).unwrap();
                let (w, l) = q.parts[k]?;
                let set = if matches!(self.ts.agreement(id).participants, Participants::WinS(_)) { w } else { l };
                Some(set & live)
            }
        }
    }

    /// Receivers of a broadcast of `(act, payload)` from `sender`; `None` if some live process cannot receive.
    fn broadcast_moves(&self, q: &IndexedState, act: usize, payload: Option<i64>, sender: Option<usize>) -> Option<Vec<(usize, usize)>> {
        let mut moves = Vec::new();
        for j in 0..self.n {
            if Some(j) == sender || !self.live(q, j) {
                continue;
            }
            let d = *self.idx[q.procs[j]].recv.get(&(act, payload))?;
            moves.push((j, d));
        }
        Some(moves)
    }

    pub fn step(&self, q: &IndexedState) -> Vec<(StepLabel, IndexedState)> {
        let mut out = Vec::new();
        let crash = self.ts.crash;
        for i in 0..self.n {
            if !self.live(q, i) {
                continue;
            }
            let si = &self.idx[q.procs[i]];
            for &d in &si.internal {
                let mut nq = q.clone();
                nq.procs[i] = d;
                out.push((StepLabel::Internal { pid: i }, nq));
            }
            let mut nq = q.clone();
            nq.procs[i] = crash;
            out.push((StepLabel::Crash { pid: i }, nq));
            for &(act, payload, d) in &si.send_br {
                let Some(moves) = self.broadcast_moves(q, act, payload, Some(i)) else { continue };
                let mut nq = q.clone();
                nq.procs[i] = d;
                for (j, dj) in moves {
                    nq.procs[j] = dj;
                    self.record_sender(&mut nq, j, act, 2 + i as u8);
                }
                out.push((StepLabel::Broadcast { act, payload, sender: Some(i) }, nq));
            }
            for &(act, payload, target, d) in &si.send_rz {
                if self.ts.core.acts[act].env {
                    let mut nq = q.clone();
                    nq.procs[i] = d;
                    out.push((StepLabel::Rendezvous { act, payload, sender: Some(i), receiver: None }, nq));
                    continue;
                }
                let candidates: Vec<usize> = match target {
                    Some(t) => {
                        let code = self.sender_of(q, i, t);
                        if code < 2 {
                            continue;
                        }
                        vec![(code - 2) as usize]
                    }
                    None => (0..self.n).collect(),
                };
                for j in candidates {
                    if j == i || !self.live(q, j) {
                        continue;
                    }
                    let Some(&dj) = self.idx[q.procs[j]].recv.get(&(act, payload)) else { continue };
                    let mut nq = q.clone();
                    nq.procs[i] = d;
                    nq.procs[j] = dj;
                    self.record_sender(&mut nq, j, act, 2 + i as u8);
                    out.push((StepLabel::Rendezvous { act, payload, sender: Some(i), receiver: Some(j) }, nq));
                }
            }
        }
        for &(act, payload) in &self.env_acts {
            match self.ts.core.acts[act].mode {
                Mode::Broadcast => {
                    let Some(moves) = self.broadcast_moves(q, act, payload, None) else { continue };
                    if moves.is_empty() {
                        continue;
                    }
                    let mut nq = q.clone();
                    for (j, dj) in moves {
                        nq.procs[j] = dj;
                        self.record_sender(&mut nq, j, act, ENV_SENDER);
                    }
                    out.push((StepLabel::Broadcast { act, payload, sender: None }, nq));
                }
                Mode::Rendezvous => {
                    for j in 0..self.n {
                        if !self.live(q, j) {
                            continue;
                        }
                        let Some(&dj) = self.idx[q.procs[j]].recv.get(&(act, payload)) else { continue };
                        let mut nq = q.clone();
                        nq.procs[j] = dj;
                        self.record_sender(&mut nq, j, act, ENV_SENDER);
                        out.push((StepLabel::Rendezvous { act, payload, sender: None, receiver: Some(j) }, nq));
                    }
                }
            }
        }
        for id in 0..self.ts.agr_names.len() {
            if self.ts.agreement(id).partition {
                self.partition_steps(q, id, &mut out);
            } else {
                self.consensus_steps(q, id, &mut out);
            }
        }
        out
    }

    fn partition_steps(&self, q: &IndexedState, id: usize, out: &mut Vec<(StepLabel, IndexedState)>) {
        let Some(gamma) = self.gamma(q, id) else { return };
        if gamma == 0 || bits(gamma).any(|i| !self.idx[q.procs[i]].lose.contains_key(&id)) {
            return;
        }
        let k = self.ts.agreement(id).k;
        let track = self.tracked_parts.iter().position(|&x| x == id);
        for failed in submasks(gamma) {
            if failed == gamma {
                continue;
            }
            let alive = gamma & !failed;
            let want = k.min(alive.count_ones() as usize);
            for winners in submasks(alive) {
                if winners.count_ones() as usize != want {
                    continue;
                }
                // Each winner may pick any of its win transitions.
                let mut partial: Vec<IndexedState> = vec![q.clone()];
                for i in bits(winners) {
                    let opts = &self.idx[q.procs[i]].win[&id];
                    partial = partial
                        .into_iter()
                        .flat_map(|p| {
                            opts.iter().map(move |&d| {
                                let mut p = p.clone();
                                p.procs[i] = d;
                                p
                            })
                        })
                        .collect();
                }
                for mut nq in partial {
                    for i in bits(alive & !winners) {
                        nq.procs[i] = self.idx[q.procs[i]].lose[&id];
                    }
                    for i in bits(failed) {
                        nq.procs[i] = self.ts.crash;
                    }
                    if let Some(k) = track {
                        nq.parts[k] = Some((winners, alive & !winners));
                    }
                    out.push((StepLabel::Partition { id, gamma, failed, winners }, nq));
                }
            }
        }
    }

    fn consensus_steps(&self, q: &IndexedState, id: usize, out: &mut Vec<(StepLabel, IndexedState)>) {
        let Some(gamma) = self.gamma(q, id) else { return };
        if gamma == 0 {
            return;
        }
        let info = self.ts.agreement(id);
        for i in bits(gamma) {
            let si = &self.idx[q.procs[i]];
            if !si.cons.keys().any(|(c, _)| *c == id) {
                return;
            }
        }
        let proposals: Vec<i64> = bits(gamma).filter_map(|i| self.idx[q.procs[i]].proposal.get(&id).copied()).collect();
        for failed in submasks(gamma) {
            let alive = gamma & !failed;
            if alive.count_ones() <= failed.count_ones() {
                continue;
            }
            let proposed: BTreeSet<i64> = bits(gamma).filter_map(|i| self.idx[q.procs[i]].proposal.get(&id).copied()).collect();
            let pmask: u64 = info
                .domain
                .iter()
                .enumerate()
                .filter(|(_, v)| proposed.contains(v))
                .fold(0, |m, (i, _)| m | 1 << i);
            for decided in submasks(pmask) {
                if decided == 0 || decided.count_ones() as usize > info.k {
                    continue;
                }
                let mut nq = q.clone();
                for i in bits(alive) {
                    nq.procs[i] = self.idx[q.procs[i]].cons[&(id, decided)];
                }
                for i in bits(failed) {
                    nq.procs[i] = self.ts.crash;
                }
                out.push((StepLabel::Consensus { id, gamma, failed, decided, proposals: proposals.clone() }, nq));
            }
        }
    }
}

pub fn reachable_indexed(ts: &LocalTs, n: usize, cap: usize) -> Result<BTreeSet<IndexedState>, MercuryError> {
    let oracle = Oracle::new(ts, n);
    let q0 = oracle.initial();
    let mut seen: HashMap<IndexedState, ()> = HashMap::new();
    seen.insert(q0.clone(), ());
    let mut queue = VecDeque::from([q0]);
    while let Some(q) = queue.pop_front() {
        for (_, nq) in oracle.step(&q) {
            if !seen.contains_key(&nq) {
                if seen.len() >= cap {
                    return Err(MercuryError::StateSpace { limit: cap });
                }
                seen.insert(nq.clone(), ());
                queue.push_back(nq);
            }
        }
    }
    Ok(seen.into_keys().collect())
}

/// Occurrence count of each local state (crash included).
pub fn local_counts(ts: &LocalTs, q: &IndexedState) -> BTreeMap<usize, u32> {
    let mut m = BTreeMap::new();
    for &s in &q.procs {
        *m.entry(s).or_insert(0) += 1;
    }
    let _ = ts;
    m
}
