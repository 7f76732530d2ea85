use kwidth::algebra::Algebra;
use kwidth::algebras;
use kwidth::consistency::{enforce_kl, Status};
use kwidth::corpus;
use kwidth::instance::{random_instance, Instance, PartialAssignment, RandomConfig};
use kwidth::patterns::{
    build_complete_ltree, least_sufficient_quality, quality, quality_by_tree, quality_realizations,
    quality_realizations_closed, realizations, tree_realizable, Pattern, QualityEngine,
};
use kwidth::relation::{Elem, ProductIter};
use kwidth::solver::SolverLimits;
use kwidth_oracles as oracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Face check written out directly: equal labels carry equal values and every constraint
/// whose scope lies inside the labels holds.
fn face_ok(inst: &Instance, labels: &[usize], vals: &[Elem]) -> bool {
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == labels[j] && vals[i] != vals[j] {
                return false;
            }
        }
    }
    inst.constraints().all(|(scope, rel)| {
        let mut t = Vec::new();
        for v in scope {
            match labels.iter().position(|l| l == v) {
                Some(p) => t.push(vals[p]),
                None => return true,
            }
        }
        rel.contains(&t)
    })
}

fn brute_realizations(inst: &Instance, pat: &Pattern) -> Vec<Vec<Elem>> {
    let doms: Vec<usize> = pat.labels().iter().map(|&l| inst.domain(l)).collect();
    let faces: Vec<Vec<usize>> = pat.faces().cloned().collect();
    oracle::realizations(&doms, &faces, |f, vals| {
        let labels: Vec<usize> = f.iter().map(|&p| pat.labels()[p]).collect();
        face_ok(inst, &labels, vals)
    })
}

/// Pads an arbitrary k-uniform instance with full relations below arity k.
fn weak(inst: &Instance, k: usize) -> Instance {
    inst.with_full_small_constraints(k).unwrap()
}

/// Adds the projections of the k-ary constraints, which agree on a (k,k+1)-instance.
fn projected(inst: &Instance, k: usize) -> Instance {
    inst.small_arity_closure(k).unwrap()
}

fn enforced_random(alg: &Algebra, n_vars: usize, seed: u64) -> Option<Instance> {
    let cfg = RandomConfig { plant_solution: true, ..RandomConfig::default() };
    let inst = random_instance(alg, &cfg, n_vars, 2, seed).unwrap();
    let res = enforce_kl(&inst, 2, 3).unwrap();
    (res.status == Status::Enforced).then(|| projected(&res.instance.unwrap(), 2))
}

#[test]
fn tree_sizes_match_the_counting_recurrence() {
    for (base, k, l, depth, m) in [(1, 1, 1, 3, 3), (1, 2, 1, 3, 4), (2, 2, 2, 2, 3), (2, 2, 2, 3, 3), (1, 2, 2, 3, 4), (2, 3, 2, 2, 4), (3, 3, 3, 2, 4)] {
        let labels: Vec<usize> = (0..base).collect();
        let tree = build_complete_ltree(&labels, k, l, depth, m, 1 << 20).unwrap();
        let (v, f) = oracle::complete_tree_counts(base, k, l, depth, m);
        assert_eq!(tree.num_vertices() as u128, v, "{base} {k} {l} {depth} {m}");
        assert_eq!(tree.num_faces() as u128, f, "{base} {k} {l} {depth} {m}");
        let check = Pattern::new(k, tree.labels().to_vec(), tree.faces().cloned());
        assert!(check.is_ok());
    }
}

#[test]
fn tree_dynamic_programme_matches_brute_force() {
    let mut checked = 0;
    for seed in 0..40 {
        let alg = if seed % 2 == 0 { algebras::majority() } else { algebras::binary_min() };
        let cfg = RandomConfig { plant_solution: seed % 3 != 0, ..RandomConfig::default() };
        let inst = weak(&random_instance(&alg, &cfg, 3, 2, seed).unwrap(), 2);
        for (base, l, depth) in [(vec![0], 1, 3), (vec![0, 1], 2, 2), (vec![2], 2, 2), (vec![1, 1], 2, 2)] {
            let tree = build_complete_ltree(&base, 2, l, depth, 3, 18).unwrap();
            let all = brute_realizations(&inst, &tree);
            for vals in ProductIter::new(&vec![2; base.len()]) {
                let brute = all.iter().any(|a| base.iter().enumerate().all(|(i, _)| a[tree.base()[i]] == vals[i]));
                assert_eq!(tree_realizable(&inst, &tree, &vals).unwrap(), brute, "seed {seed} base {base:?} {vals:?}");
                checked += 1;
            }
            let mut got = realizations(&inst, &tree, 1 << 20).unwrap();
            got.sort();
            assert_eq!(got, all);
        }
    }
    assert!(checked > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Quality computed by recursion over faces agrees with realizing the explicit tree.
    #[test]
    fn propagation_matches_explicit_trees(which in 0usize..3, n in 2usize..=4, seed in any::<u64>(), x in 0usize..4, y in 0usize..4, a in 0u16..3, b in 0u16..3) {
        let alg = [algebras::majority(), algebras::binary_min(), algebras::second_largest_of_4()][which].clone();
        let cfg = RandomConfig { plant_solution: seed % 2 == 0, ..RandomConfig::default() };
        let inst = weak(&random_instance(&alg, &cfg, n, 2, seed).unwrap(), 2);
        let d_max = if alg.domain() == 3 { 2 } else { 3 };
        let bindings = if x % n == y % n { vec![(x % n, a % alg.domain() as u16)] } else {
            vec![(x % n, a % alg.domain() as u16), (y % n, b % alg.domain() as u16)]
        };
        let phi = PartialAssignment::from_bindings(&inst, bindings).unwrap();
        for d in 1..=d_max {
            prop_assert_eq!(quality(&inst, 2, &phi, d).unwrap(), quality_by_tree(&inst, 2, &phi, d, 1 << 22).unwrap(), "d = {}", d);
        }
    }
}

/// Every satisfied base of a 2-tree of depth at most 3 extends to a realization in an enforced
/// (2,3)-instance, including bases whose two vertices carry the same variable.
#[test]
fn enforced_instances_realize_every_tree() {
    let mut trees = 0;
    for name in ["four-cycle-enforced", "maj-square-enforced", "threshold-square-enforced"] {
        let inst = projected(&corpus::instance(name).unwrap(), 2);
        let n = inst.num_vars();
        let mut bases: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
        bases.extend((0..n).flat_map(|x| (0..n).map(move |y| vec![x, y])));
        for base in bases {
            let doms: Vec<usize> = base.iter().map(|&x| inst.domain(x)).collect();
            for depth in 1..=3 {
                let tree = build_complete_ltree(&base, 2, 2, depth, n, 1 << 22).unwrap();
                trees += 1;
                for vals in ProductIter::new(&doms) {
                    if face_ok(&inst, &base, &vals) {
                        assert!(tree_realizable(&inst, &tree, &vals).unwrap(), "{name} {base:?} {vals:?} depth {depth}");
                    }
                }
            }
        }
    }
    assert!(trees > 100);
}

fn random_pattern(rng: &mut ChaCha8Rng, n_vars: usize, k: usize) -> Pattern {
    let size = rng.gen_range(1..=4);
    let labels: Vec<usize> = (0..size).map(|_| rng.gen_range(0..n_vars)).collect();
    let mut faces: Vec<Vec<usize>> = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let f: Vec<usize> = (0..size).filter(|_| rng.gen_bool(0.5)).take(k).collect();
        faces.push(f);
    }
    // close under nonempty subsets
    let mut closed: Vec<Vec<usize>> = Vec::new();
    for f in faces {
        for mask in 1u32..(1 << f.len()) {
            closed.push((0..f.len()).filter(|i| mask >> i & 1 == 1).map(|i| f[i]).collect());
        }
    }
    Pattern::new(k, labels, closed).unwrap()
}

/// Quality-d realizations of a fixed pattern form a subuniverse.
#[test]
fn quality_realizations_are_subuniverses() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let algs = [algebras::majority(), algebras::threshold_2_of_4(), algebras::second_largest_of_4()];
    let mut checked = 0;
    let mut nonempty = 0;
    let mut seed = 0;
    while checked < 50 {
        let alg = &algs[checked % algs.len()];
        seed += 1;
        let Some(inst) = enforced_random(alg, 4, seed) else { continue };
        let sorts = vec![alg; inst.num_vars()];
        let mut engine = QualityEngine::new(&inst, 2).unwrap();
        let pat = random_pattern(&mut rng, inst.num_vars(), 2);
        for d in 1..=2 {
            assert!(quality_realizations_closed(&mut engine, &sorts, &pat, d, 1 << 16).unwrap());
            nonempty += usize::from(!quality_realizations(&mut engine, &pat, d, 1 << 16).unwrap().is_empty());
        }
        checked += 1;
    }
    assert!(nonempty > 50);
}

/// Over algebras with a 4-ary near-unanimity term, some quality d ≤ 4 suffices for every small
/// instance: every evaluation on at most 2 variables with that quality extends to a solution.
#[test]
fn some_quality_suffices_with_a_four_ary_nu() {
    let mut worst = 0;
    for (i, alg) in [algebras::threshold_2_of_4(), algebras::second_largest_of_4(), algebras::majority()].iter().enumerate() {
        for seed in 0..20u64 {
            let n = if alg.domain() == 3 { 5 } else { 6 };
            let cfg = RandomConfig { plant_solution: seed % 2 == 0, ..RandomConfig::default() };
            let inst = weak(&random_instance(alg, &cfg, n, 2, 1000 * i as u64 + seed).unwrap(), 2);
            let report = least_sufficient_quality(&inst, 2, 4, SolverLimits::default()).unwrap();
            let d = report.least_d.unwrap_or_else(|| panic!("seed {seed}: {report:?}"));
            worst = worst.max(d);
        }
    }
    assert!(worst >= 1);
}
