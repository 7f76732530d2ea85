use itertools::Itertools;
use rustc_hash::FxHashSet;

use crate::relation::{Elem, Relation, Tuple};

/// All tuples over the domains of `r` whose every `k`-coordinate projection lies in the
/// matching projection of `r`. Always contains `r`.
pub fn star_closure(r: &Relation, k: usize) -> Relation {
    let arity = r.arity();
    if r.is_empty() || k >= arity {
        return r.clone();
    }
    // subsets grouped by their largest coordinate, checked as soon as it is assigned
    let mut by_last: Vec<Vec<(Vec<usize>, FxHashSet<Tuple>)>> = vec![Vec::new(); arity];
    if k > 0 {
        for subset in (0..arity).combinations(k) {
            let proj = r.iter().map(|t| subset.iter().map(|&c| t[c]).collect()).collect();
            let last = *subset.last().unwrap();
            by_last[last].push((subset, proj));
        }
    }
    let mut out = Vec::new();
    let mut current = vec![0 as Elem; arity];
    extend(r.domains(), &by_last, 0, &mut current, &mut out);
    Relation::new(r.domains().to_vec(), out).expect("tuples respect domains")
}

fn extend(
    domains: &[usize],
    by_last: &[Vec<(Vec<usize>, FxHashSet<Tuple>)>],
    c: usize,
    current: &mut Tuple,
    out: &mut Vec<Tuple>,
) {
    if c == domains.len() {
        out.push(current.clone());
        return;
    }
    let mut key = Vec::new();
    for v in 0..domains[c] as Elem {
        current[c] = v;
        let ok = by_last[c].iter().all(|(subset, proj)| {
            key.clear();
            key.extend(subset.iter().map(|&i| current[i]));
            proj.contains(&key)
        });
        if ok {
            extend(domains, by_last, c + 1, current, out);
        }
    }
}

/// Whether `r` equals its star closure over `k`-projections.
pub fn determined_by_projections(r: &Relation, k: usize) -> bool {
    star_closure(r, k).len() == r.len()
}
