use super::closure::{close, ClosureLimits};
use super::term::eval_unchecked;
use super::{Algebra, AlgebraError, Term};
use crate::relation::{Elem, Tuple};

/// Outcome of a bounded NU search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NuSearch {
    Found(Term),
    Absent,
    /// The tuple limit was reached before a fixed point.
    Unknown,
}

/// Whether `t`, read as an `m`-ary term, satisfies `t(a,…,a,b,a,…,a) = a` for every position
/// of `b`.
pub fn is_nu(alg: &Algebra, t: &Term, m: usize) -> bool {
    if t.check(alg).is_err() || t.arity_lower_bound() > m {
        return false;
    }
    let n = alg.domain();
    let mut args = vec![0 as Elem; m];
    for a in 0..n as Elem {
        for b in 0..n as Elem {
            if a == b {
                continue;
            }
            for i in 0..m {
                args.fill(a);
                args[i] = b;
                if eval_unchecked(alg, t, &args) != a {
                    return false;
                }
            }
        }
    }
    // with all arguments equal the identity is about idempotency only
    (0..n as Elem).all(|a| {
        args.fill(a);
        eval_unchecked(alg, t, &args) == a
    })
}

/// Generators and target of the NU encoding over the index set `A² × [m]`. Coordinate
/// `((a,b), i)` sits at `(a·n + b)·m + i`; generator `j` holds `b` there if `j = i` and `a`
/// otherwise, the target holds `a`.
pub fn nu_indicator_generators(n: usize, m: usize) -> (Vec<Tuple>, Tuple) {
    let coords: Vec<(Elem, Elem, usize)> = (0..n)
        .flat_map(|a| (0..n).flat_map(move |b| (0..m).map(move |i| (a as Elem, b as Elem, i))))
        .collect();
    let gens = (0..m).map(|j| coords.iter().map(|&(a, b, i)| if i == j { b } else { a }).collect()).collect();
    let target = coords.iter().map(|&(a, _, _)| a).collect();
    (gens, target)
}

/// An `m`-ary near-unanimity term of `alg`, if one exists.
pub fn find_nu_term(alg: &Algebra, m: usize) -> Option<Term> {
    match find_nu_term_bounded(alg, m, ClosureLimits { max_tuples: usize::MAX }) {
        Ok(NuSearch::Found(t)) => Some(t),
        _ => None,
    }
}

pub fn find_nu_term_bounded(alg: &Algebra, m: usize, limits: ClosureLimits) -> Result<NuSearch, AlgebraError> {
    if m == 0 {
        return Ok(NuSearch::Absent);
    }
    if alg.domain() == 1 {
        return Ok(NuSearch::Found(Term::Leaf(0)));
    }
    let (gens, target) = nu_indicator_generators(alg.domain(), m);
    let sorts = vec![alg; target.len()];
    let mut target_red: Option<Tuple> = None;
    let run = close(&sorts, &gens, true, limits, |t, col_map| {
        let red = target_red.get_or_insert_with(|| {
            super::closure::reduce_with(col_map, col_map.iter().map(|c| c + 1).max().unwrap_or(0), &target)
                .unwrap_or_default()
        });
        !red.is_empty() && t == red.as_slice()
    })?;
    if let Some(idx) = run.stopped_at {
        let term = run.term(alg, idx).expect("derivations recorded");
        debug_assert!(is_nu(alg, &term, m));
        return Ok(NuSearch::Found(term));
    }
    Ok(if run.complete { NuSearch::Absent } else { NuSearch::Unknown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras;

    #[test]
    fn majority_is_its_own_witness() {
        let maj = algebras::majority();
        let t = find_nu_term(&maj, 3).unwrap();
        assert_eq!(t, Term::node("maj", vec![Term::Leaf(0), Term::Leaf(1), Term::Leaf(2)]));
        assert!(is_nu(&maj, &t, 3));
    }

    #[test]
    fn threshold_has_four_but_not_three() {
        let th = algebras::threshold_2_of_4();
        assert_eq!(find_nu_term(&th, 3), None);
        let t = find_nu_term(&th, 4).unwrap();
        assert!(is_nu(&th, &t, 4));
        let basic = Term::node("t", (0..4).map(Term::Leaf).collect());
        assert!(is_nu(&th, &basic, 4));
    }

    #[test]
    fn min_has_none() {
        let min = algebras::binary_min();
        assert_eq!(find_nu_term(&min, 3), None);
        assert_eq!(find_nu_term(&min, 4), None);
        let t = Term::node("min", vec![Term::Leaf(0), Term::node("min", vec![Term::Leaf(1), Term::Leaf(2)])]);
        assert!(!is_nu(&min, &t, 3));
    }

    #[test]
    fn trivial_carrier() {
        let one = Algebra::new(1, vec![super::super::Operation::new("f", 2, vec![0])]).unwrap();
        assert_eq!(find_nu_term(&one, 3), Some(Term::Leaf(0)));
    }

    #[test]
    fn indicator_layout() {
        let (gens, target) = nu_indicator_generators(2, 3);
        assert_eq!(gens.len(), 3);
        assert_eq!(target.len(), 12);
        // coordinate ((0,1), 2) is (0·2+1)·3+2 = 5
        assert_eq!(gens[2][5], 1);
        assert_eq!(gens[0][5], 0);
        assert_eq!(target[5], 0);
    }
}
