use kwidth::algebra::{
    determined_by_projections, eval_term, find_nu_term, find_nu_term_bounded, generate_subpower, is_nu, star_closure,
    subuniverses, Algebra, ClosureLimits, NuSearch, Term,
};
use kwidth::algebras;
use kwidth::corpus;
use kwidth::relation::{Relation, Tuple};
use kwidth_oracles as oracle;
use proptest::prelude::*;

fn ops(alg: &Algebra) -> Vec<oracle::Op> {
    alg.operations().iter().map(|o| (o.arity(), o.table().to_vec())).collect()
}

fn small_algebras() -> Vec<Algebra> {
    vec![algebras::majority(), algebras::binary_min(), algebras::threshold_2_of_4(), algebras::second_largest_of_4()]
}

fn gens_strategy(domain: u16, arity: usize) -> impl Strategy<Value = Vec<Tuple>> {
    prop::collection::vec(prop::collection::vec(0..domain, arity), 1..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_subpowers_are_closed_and_witnessed(which in 0usize..4, arity in 1usize..=3, raw in gens_strategy(3, 3)) {
        let alg = &small_algebras()[which];
        let gens: Vec<Tuple> =
            raw.into_iter().map(|t| t[..arity].iter().map(|x| x % alg.domain() as u16).collect()).collect();
        let sub = generate_subpower(alg, &gens, true).unwrap();
        let tuples: Vec<Tuple> = sub.relation.iter().cloned().collect();
        for op in ops(alg) {
            prop_assert!(oracle::preserves(alg.domain(), &op, &tuples));
        }
        for g in &gens {
            prop_assert!(sub.relation.contains(g));
        }
        prop_assert!(sub.witnesses_sound(&vec![alg; arity], &gens));
    }

    #[test]
    fn star_closure_matches_brute_force(which in 0usize..4, gens in gens_strategy(2, 4), k in 1usize..=4) {
        let alg = &small_algebras()[which];
        let gens: Vec<Tuple> = gens.into_iter().map(|t| t.into_iter().map(|x| x % alg.domain() as u16).collect()).collect();
        let r = generate_subpower(alg, &gens, false).unwrap().relation;
        let tuples: Vec<Tuple> = r.iter().cloned().collect();
        let expected = oracle::star_closure(r.domains(), &tuples, k);
        let star = star_closure(&r, k);
        prop_assert_eq!(star.tuples(), &expected);
        prop_assert_eq!(determined_by_projections(&r, k), expected.len() == tuples.len());
    }

    /// With a 3-ary NU every subpower is determined by its 2-projections.
    #[test]
    fn majority_subpowers_are_determined(gens in gens_strategy(2, 4)) {
        let r = generate_subpower(&algebras::majority(), &gens, false).unwrap().relation;
        prop_assert!(determined_by_projections(&r, 2));
    }

    #[test]
    fn term_json_round_trips(which in 0usize..4, gens in gens_strategy(2, 3)) {
        let alg = &small_algebras()[which];
        let gens: Vec<Tuple> = gens.into_iter().map(|t| t.into_iter().map(|x| x % alg.domain() as u16).collect()).collect();
        let sub = generate_subpower(alg, &gens, true).unwrap();
        for (t, term) in sub.witnesses.unwrap() {
            let json = serde_json::to_string(&term).unwrap();
            let back: Term = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &term);
            for (c, &v) in t.iter().enumerate() {
                let args: Vec<u16> = gens.iter().map(|g| g[c]).collect();
                prop_assert_eq!(eval_term(alg, &term, &args).unwrap(), v);
            }
        }
    }
}

#[test]
fn nu_detection_agrees_with_clone_enumeration() {
    let cases = [
        (algebras::majority(), 3, true),
        (algebras::threshold_2_of_4(), 3, false),
        (algebras::threshold_2_of_4(), 4, true),
        (algebras::binary_min(), 3, false),
        (algebras::binary_min(), 4, false),
    ];
    for (alg, m, expected) in cases {
        let found = find_nu_term(&alg, m);
        assert_eq!(found.is_some(), expected, "arity {m}");
        if let Some(t) = &found {
            assert!(is_nu(&alg, t, m));
        }
        let clone = oracle::clone_to_depth(alg.domain(), &ops(&alg), m, 3, 1 << 20).expect("small clone");
        let brute = clone.iter().any(|t| oracle::is_nu_table(alg.domain(), t, m));
        assert_eq!(brute, expected, "arity {m}");
    }
}

#[test]
fn nu_search_reports_unknown_under_a_tight_guard() {
    let th = algebras::threshold_2_of_4();
    assert_eq!(find_nu_term_bounded(&th, 4, ClosureLimits { max_tuples: 2 }).unwrap(), NuSearch::Unknown);
    let chain = algebras::second_largest_of_4();
    assert!(find_nu_term(&chain, 3).is_none());
    assert!(find_nu_term(&chain, 4).is_some());
}

#[test]
fn slupecki_binary_subpowers_are_partition_relations() {
    let s3 = corpus::algebra("slupecki3").unwrap();
    assert_eq!(s3, algebras::slupecki3());
    let subs: Vec<Relation> = subuniverses(&s3, 2, 64).unwrap().into_iter().filter(|r| !r.is_empty()).collect();
    assert_eq!(subs, vec![Relation::equality(3), Relation::full(vec![3, 3]).unwrap()]);
}

#[test]
fn bundled_algebras() {
    assert!(corpus::algebra("min-horn").unwrap().is_idempotent());
    let th = corpus::algebra("threshold24").unwrap();
    assert!(is_nu(&th, &Term::node("t", (0..4).map(Term::Leaf).collect()), 4));
    assert!(corpus::algebra("maj").unwrap().is_idempotent());
    assert!(corpus::algebra("triangle").is_none());
}

#[test]
fn threshold_has_undetermined_ternary_relations() {
    let th = algebras::threshold_2_of_4();
    let found = kwidth::constructions::search_undetermined_relation(&th, 3, 2, 4, 0..500).unwrap();
    assert!(found.is_some());
    for seed in 0..100 {
        let r = kwidth::constructions::seeded_subpower(&th, 4, 4, seed).unwrap();
        assert!(determined_by_projections(&r, 3));
    }
}
