use super::{Bits, GspSystem, Origin};
use serde::Serialize;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConditionReport {
    pub pairs_checked: usize,
    /// Action pairs violating the guard-preservation condition.
    pub c1r_violations: usize,
    /// Pairs violating both guard preservation and its internal-path relaxation.
    pub violations: usize,
    pub examples: Vec<String>,
}

impl ConditionReport {
    pub fn well_behaved(&self) -> bool {
        self.violations == 0
    }
}

const MAX_EXAMPLES: usize = 5;

/// Check every pair of actions for guard preservation, falling back to the
/// relaxation where receivers may continue along internal moves into the other guard.
pub fn check_conditions(sys: &GspSystem) -> ConditionReport {
    let n = sys.dims();
    let eng = sys.compile();
    let acts = &sys.actions;

    // Reflexive-transitive closure of internal moves.
    let mut reach: Vec<Bits> = (0..n).map(|s| Bits::from_iter(n, [s])).collect();
    let internal: Vec<(usize, usize)> =
        acts.iter().filter(|a| a.origin == Origin::Internal).flat_map(|a| a.slots.iter().flatten().copied()).collect();
    loop {
        let mut changed = false;
        for &(s, d) in &internal {
            let add = reach[d].clone();
            if !add.is_subset(&reach[s]) {
                reach[s].union_with(&add);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // The env and crash dimensions are not process states a guard has to keep.
    let process = |s: &usize| *s != sys.crash && Some(*s) != sys.env;
    let src: Vec<Bits> = acts.iter().map(|a| Bits::from_iter(n, a.sources().into_iter().filter(process))).collect();
    let dst: Vec<Bits> = acts.iter().map(|a| Bits::from_iter(n, a.targets().into_iter().filter(process))).collect();
    // Image of the guard under the explicit receive map; identity fill-in is not a move.
    let image: Vec<Vec<(usize, usize)>> = acts
        .iter()
        .enumerate()
        .map(|(a, act)| act.recv_map.iter().copied().filter(|&(s, _)| eng.guard[a].contains(s)).collect())
        .collect();
    let image_set: Vec<Bits> = image.iter().map(|v| Bits::from_iter(n, v.iter().map(|p| p.1))).collect();

    let mut rep = ConditionReport::default();
    for a1 in 0..acts.len() {
        let mut moved = dst[a1].clone();
        moved.union_with(&image_set[a1]);
        for a2 in 0..acts.len() {
            rep.pairs_checked += 1;
            let g2 = &eng.guard[a2];
            if !moved.intersects(&src[a2]) {
                continue;
            }
            let inside = dst[a1].is_subset(g2);
            let preserved = image[a1].iter().all(|&(_, t)| g2.contains(t));
            let c1r = !inside || preserved;
            if !c1r {
                rep.c1r_violations += 1;
            }
            let relaxed = !dst[a1].intersects(g2) || (inside && image[a1].iter().all(|&(_, t)| reach[t].intersects(g2)));
            if c1r || relaxed {
                continue;
            }
            rep.violations += 1;
            if rep.examples.len() < MAX_EXAMPLES {
                rep.examples.push(format!("`{}` may leave processes outside the guard of `{}`", acts[a1].name, acts[a2].name));
            }
        }
    }
    rep
}
