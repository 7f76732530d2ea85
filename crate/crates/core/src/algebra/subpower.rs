use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::closure::{close, ClosureLimits};
use super::term::eval_unchecked;
use super::{Algebra, AlgebraError, Term};
use crate::relation::{Elem, Relation, Tuple};

/// A subuniverse of a (possibly multi-sorted) finite power, optionally with a generating
/// term for every tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subpower {
    pub relation: Relation,
    /// Tuple → term over the generator indices producing it.
    pub witnesses: Option<BTreeMap<Tuple, Term>>,
}

impl Subpower {
    /// Checks every witness against the generators. `sorts[c]` interprets coordinate `c`.
    pub fn witnesses_sound(&self, sorts: &[&Algebra], gens: &[Tuple]) -> bool {
        let Some(w) = &self.witnesses else {
            return true;
        };
        w.len() == self.relation.len()
            && w.iter().all(|(tuple, term)| {
                sorts.iter().enumerate().all(|(c, alg)| {
                    let column: Vec<Elem> = gens.iter().map(|g| g[c]).collect();
                    term.check(alg).is_ok() && eval_unchecked(alg, term, &column) == tuple[c]
                })
            })
    }
}

/// The subpower of `alg^r` generated by `gens`.
pub fn generate_subpower(alg: &Algebra, gens: &[Tuple], with_witnesses: bool) -> Result<Subpower, AlgebraError> {
    generate_subpower_bounded(alg, gens, with_witnesses, ClosureLimits { max_tuples: usize::MAX })
}

pub fn generate_subpower_bounded(
    alg: &Algebra,
    gens: &[Tuple],
    with_witnesses: bool,
    limits: ClosureLimits,
) -> Result<Subpower, AlgebraError> {
    let width = gens.first().map(Vec::len).ok_or(AlgebraError::BadGenerators)?;
    let sorts = vec![alg; width];
    generate_subpower_multi(&sorts, gens, with_witnesses, limits)
}

/// Multi-sorted generation: coordinate `c` lives in `sorts[c]`.
pub fn generate_subpower_multi(
    sorts: &[&Algebra],
    gens: &[Tuple],
    with_witnesses: bool,
    limits: ClosureLimits,
) -> Result<Subpower, AlgebraError> {
    let run = close(sorts, gens, with_witnesses, limits, |_, _| false)?;
    if !run.complete {
        return Err(AlgebraError::ResourceLimit(limits.max_tuples));
    }
    let domains: Vec<usize> = sorts.iter().map(|s| s.domain()).collect();
    let full: Vec<Tuple> = run.tuples.iter().map(|t| run.expand(t)).collect();
    let witnesses = with_witnesses.then(|| {
        let base = sorts[0];
        full.iter().enumerate().map(|(i, t)| (t.clone(), run.term(base, i).expect("derivations recorded"))).collect()
    });
    let relation = Relation::new(domains, full)?;
    Ok(Subpower { relation, witnesses })
}

/// Every subuniverse of `alg^arity`, the empty one included, ordered by size and then
/// lexicographically. Fails once more than `limit` are found.
pub fn subuniverses(alg: &Algebra, arity: usize, limit: usize) -> Result<Vec<Relation>, AlgebraError> {
    let domains = vec![alg.domain(); arity];
    let all: Vec<Tuple> = crate::relation::ProductIter::new(&domains).collect();
    let sorts = vec![alg; arity];
    let generate = |gens: &[Tuple]| -> Result<BTreeSet<Tuple>, AlgebraError> {
        let run = close(&sorts, gens, false, ClosureLimits { max_tuples: usize::MAX }, |_, _| false)?;
        Ok(run.tuples.iter().map(|t| run.expand(t)).collect())
    };

    let mut found: HashSet<BTreeSet<Tuple>> = HashSet::new();
    let mut frontier: Vec<BTreeSet<Tuple>> = vec![BTreeSet::new()];
    found.insert(BTreeSet::new());
    while let Some(u) = frontier.pop() {
        for t in &all {
            if u.contains(t) {
                continue;
            }
            let mut gens: Vec<Tuple> = u.iter().cloned().collect();
            gens.push(t.clone());
            let v = generate(&gens)?;
            if found.insert(v.clone()) {
                if found.len() > limit {
                    return Err(AlgebraError::ResourceLimit(limit));
                }
                frontier.push(v);
            }
        }
    }
    let mut out: Vec<Relation> =
        found.into_iter().map(|s| Relation::from_set_unchecked(domains.clone(), s)).collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.tuples().cmp(b.tuples())));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras;

    #[test]
    fn majority_keeps_two_antipodal_tuples() {
        let maj = algebras::majority();
        let s = generate_subpower(&maj, &[vec![0, 1], vec![1, 0]], true).unwrap();
        assert_eq!(s.relation.len(), 2);
        assert!(s.witnesses_sound(&[&maj, &maj], &[vec![0, 1], vec![1, 0]]));
    }

    #[test]
    fn min_adds_the_meet() {
        let min = algebras::binary_min();
        let gens = vec![vec![0, 1], vec![1, 0]];
        let s = generate_subpower(&min, &gens, true).unwrap();
        let expected: BTreeSet<Tuple> = [vec![0, 1], vec![1, 0], vec![0, 0]].into_iter().collect();
        assert_eq!(s.relation.tuples(), &expected);
        assert!(s.witnesses_sound(&[&min, &min], &gens));
        let w = s.witnesses.unwrap();
        assert_eq!(w[&vec![0, 0]], Term::node("min", vec![Term::Leaf(0), Term::Leaf(1)]));
    }

    #[test]
    fn idempotent_singleton() {
        let t = algebras::threshold_2_of_4();
        let s = generate_subpower(&t, &[vec![1, 0, 1]], false).unwrap();
        assert_eq!(s.relation.len(), 1);
    }

    #[test]
    fn guard_is_reported() {
        let min = algebras::binary_min();
        let gens = vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
        let err = generate_subpower_bounded(&min, &gens, false, ClosureLimits { max_tuples: 4 }).unwrap_err();
        assert_eq!(err, AlgebraError::ResourceLimit(4));
    }

    #[test]
    fn subuniverses_of_min_squared() {
        let min = algebras::binary_min();
        let subs = subuniverses(&min, 1, 100).unwrap();
        // every subset of a chain is closed under min
        assert_eq!(subs.len(), 4);
        let subs2 = subuniverses(&min, 2, 1000).unwrap();
        let brute = crate::relation::ProductIter::new(&[2; 4])
            .filter(|mask| {
                let r = Relation::new(
                    vec![2, 2],
                    crate::relation::ProductIter::new(&[2, 2]).zip(mask).filter(|(_, &b)| b == 1).map(|(t, _)| t),
                )
                .unwrap();
                min.preserves(&r)
            })
            .count();
        assert_eq!(subs2.len(), brute);
    }
}
