//! Gadget instances built from a relation, and the generators whose closure contains a
//! near-unanimity term.
//!
//! Pair variables range over `A × A` with `(a, b)` encoded as `a·n + b`.

use itertools::Itertools;
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{generate_subpower, nu_indicator_generators, star_closure, Algebra, AlgebraError};
use crate::instance::{Instance, InstanceError};
use crate::relation::{Elem, Relation, Tuple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("relation must have arity {expected}, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("relation must use one domain on every coordinate")]
    MixedDomains,
    #[error("k must be at least {0}")]
    SmallK(usize),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Encodes the pair `(a, b)` over a carrier of size `n`.
pub fn encode_pair(n: usize, a: Elem, b: Elem) -> Elem {
    (a as usize * n + b as usize) as Elem
}

pub fn decode_pair(n: usize, v: Elem) -> (Elem, Elem) {
    ((v as usize / n) as Elem, (v as usize % n) as Elem)
}

fn carrier(r: &Relation, arity: usize) -> Result<usize, ConstructionError> {
    if r.arity() != arity {
        return Err(ConstructionError::Arity { expected: arity, found: r.arity() });
    }
    let n = r.domains()[0];
    if r.domains().iter().any(|&d| d != n) {
        return Err(ConstructionError::MixedDomains);
    }
    Ok(n)
}

/// A gadget variable: a coordinate of the source relation or a pair of coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    X(usize),
    Y(usize, usize),
}

impl Slot {
    fn read(self, n: usize, a: &[Elem]) -> Elem {
        match self {
            Slot::X(i) => a[i],
            Slot::Y(i, j) => encode_pair(n, a[i], a[j]),
        }
    }

    fn name(self) -> String {
        match self {
            Slot::X(i) => format!("x{}", i + 1),
            Slot::Y(i, j) => format!("y{}{}", i + 1, j + 1),
        }
    }

    fn domain(self, n: usize) -> usize {
        match self {
            Slot::X(_) => n,
            Slot::Y(..) => n * n,
        }
    }
}

fn gadget_variables(slots: &[Slot], n: usize) -> Result<Instance, InstanceError> {
    Instance::with_variables(slots.iter().map(|s| (s.name(), s.domain(n))))
}

/// `{(slot(a))_{slot ∈ scope} : a ∈ source}`.
fn image(source: &Relation, scope: &[Slot], n: usize) -> Result<Relation, InstanceError> {
    let domains = scope.iter().map(|s| s.domain(n)).collect();
    let tuples = source.iter().map(|a| scope.iter().map(|s| s.read(n, a)).collect::<Tuple>());
    Ok(Relation::new(domains, tuples)?)
}

/// The strict-width gadget on `x1, …, x(k+1), y12` for `R ≤ A^{k+1}`: each k-set of x's carries
/// the projection of `R`, and each (k−1)-set `U` of x's carries `{(a_U, (a1, a2)) : a ∈ R}` on
/// `U ∪ {y12}`.
pub fn build_prop_sw(r: &Relation, k: usize) -> Result<Instance, ConstructionError> {
    if k < 1 {
        return Err(ConstructionError::SmallK(1));
    }
    let n = carrier(r, k + 1)?;
    let mut slots: Vec<Slot> = (0..=k).map(Slot::X).collect();
    slots.push(Slot::Y(0, 1));
    let y = k + 1;
    let mut inst = gadget_variables(&slots, n)?;
    for u in (0..=k).combinations(k) {
        let scope: Vec<Slot> = u.iter().map(|&i| slots[i]).collect();
        inst.add_constraint(&u, image(r, &scope, n)?)?;
    }
    for u in (0..=k).combinations(k - 1) {
        let mut vars = u.clone();
        vars.push(y);
        let scope: Vec<Slot> = vars.iter().map(|&i| slots[i]).collect();
        inst.add_constraint(&vars, image(r, &scope, n)?)?;
    }
    Ok(inst)
}

/// The sensitivity gadget on `y12, y34, y13, y24, x5, …, x(k+2)` for `R ≤ A^{k+2}`. The set
/// `{y12, y34, x5, …}` carries the image of the star closure of `R` over (k+1)-projections; every
/// other k-set carries the image of `R`.
pub fn build_prop_sens(r: &Relation, k: usize) -> Result<Instance, ConstructionError> {
    if k < 2 {
        return Err(ConstructionError::SmallK(2));
    }
    let n = carrier(r, k + 2)?;
    let mut slots = vec![Slot::Y(0, 1), Slot::Y(2, 3), Slot::Y(0, 2), Slot::Y(1, 3)];
    slots.extend((4..k + 2).map(Slot::X));
    let mut inst = gadget_variables(&slots, n)?;
    let special = prop_sens_special_scope(k);
    let r_star = star_closure(r, k + 1);
    for s in (0..slots.len()).combinations(k) {
        let scope: Vec<Slot> = s.iter().map(|&i| slots[i]).collect();
        let source = if s == special { &r_star } else { r };
        inst.add_constraint(&s, image(source, &scope, n)?)?;
    }
    Ok(inst)
}

/// Variable indices of the special set `{y12, y34, x5, …}` of [`build_prop_sens`].
pub fn prop_sens_special_scope(k: usize) -> Vec<usize> {
    [0, 1].into_iter().chain(4..k + 2).collect()
}

/// The first seed in `seeds` whose generated subpower `R ≤ A^arity` (from `1..=max_generators`
/// random tuples) differs from its star closure over `k`-projections.
pub fn search_undetermined_relation(
    alg: &Algebra,
    arity: usize,
    k: usize,
    max_generators: usize,
    seeds: std::ops::Range<u64>,
) -> Result<Option<(u64, Relation)>, AlgebraError> {
    for seed in seeds {
        let r = seeded_subpower(alg, arity, max_generators, seed)?;
        if star_closure(&r, k).len() != r.len() {
            return Ok(Some((seed, r)));
        }
    }
    Ok(None)
}

/// The subpower of `alg^arity` generated by `1..=max_generators` tuples drawn from `seed`.
pub fn seeded_subpower(alg: &Algebra, arity: usize, max_generators: usize, seed: u64) -> Result<Relation, AlgebraError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = alg.domain();
    let count = rng.gen_range(1..=max_generators.max(1));
    let gens: Vec<Tuple> = (0..count).map(|_| (0..arity).map(|_| rng.gen_range(0..n) as Elem).collect()).collect();
    Ok(generate_subpower(alg, &gens, false)?.relation)
}

/// Symbols of the abstract generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NuGenerators {
    /// Generator `j` has `Y` at position `j` and `X` elsewhere.
    pub generators: Vec<Vec<Symbol>>,
    /// The all-`X` tuple.
    pub target: Vec<Symbol>,
}

impl NuGenerators {
    pub fn substitute(&self, x: Elem, y: Elem) -> (Vec<Tuple>, Tuple) {
        let f = |s: &Symbol| if *s == Symbol::X { x } else { y };
        (self.generators.iter().map(|g| g.iter().map(f).collect()).collect(), self.target.iter().map(f).collect())
    }

    /// The generators over the free encoding: one coordinate block per pair `(x, y) ∈ A²`,
    /// laid out as `(x·n + y)·m + i`.
    pub fn free_encoding(&self, n: usize) -> (Vec<Tuple>, Tuple) {
        let m = self.target.len();
        let mut gens = vec![Vec::with_capacity(n * n * m); m];
        let mut target = Vec::with_capacity(n * n * m);
        for x in 0..n as Elem {
            for y in 0..n as Elem {
                let (g, t) = self.substitute(x, y);
                for (acc, row) in gens.iter_mut().zip(g) {
                    acc.extend(row);
                }
                target.extend(t);
            }
        }
        (gens, target)
    }
}

/// The `k + 2` one-`Y`-in-`X` tuples of length `k + 2` and the all-`X` target.
pub fn nu_generator_tuples(k: usize) -> NuGenerators {
    let m = k + 2;
    let generators = (0..m).map(|j| (0..m).map(|i| if i == j { Symbol::Y } else { Symbol::X }).collect()).collect();
    NuGenerators { generators, target: vec![Symbol::X; m] }
}

/// Same as [`NuGenerators::free_encoding`], produced by the NU search encoding.
pub fn nu_free_generators(n: usize, k: usize) -> (Vec<Tuple>, Tuple) {
    nu_indicator_generators(n, k + 2)
}
