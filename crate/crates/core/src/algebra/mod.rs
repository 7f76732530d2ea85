//! Finite algebras given by operation tables, their term operations, and the subpowers they
//! generate.
//!
//! The carrier is always `{0, …, n−1}`. An operation of arity `r` is stored as a row-major
//! table of length `n^r` in which the last argument varies fastest.

mod closure;
mod nu;
mod projection;
mod subpower;
mod term;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relation::{Elem, Relation, RelationError};

pub use closure::ClosureLimits;
pub use nu::{find_nu_term, find_nu_term_bounded, is_nu, nu_indicator_generators, NuSearch};
pub use projection::{determined_by_projections, star_closure};
pub use subpower::{generate_subpower, generate_subpower_bounded, generate_subpower_multi, subuniverses, Subpower};
pub use term::{eval_term, Term};

pub(crate) use closure::{close, ClosureRun};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("carrier size must be at least 1 and at most 65536, got {0}")]
    BadDomain(usize),
    #[error("operation `{0}` must have positive arity")]
    ZeroArity(String),
    #[error("operation `{name}` has a table of length {len}, expected {expected}")]
    TableLength { name: String, len: usize, expected: usize },
    #[error("operation `{name}` maps to {value}, outside the carrier of size {domain}")]
    TableValue { name: String, value: Elem, domain: usize },
    #[error("operation name `{0}` is used twice")]
    DuplicateName(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("operation `{name}` has arity {expected}, but the term applies it to {found} arguments")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("term uses variable {index} but only {available} arguments were supplied")]
    MissingArgument { index: usize, available: usize },
    #[error("argument {value} is outside the carrier of size {domain}")]
    ArgumentOutOfCarrier { value: Elem, domain: usize },
    #[error("generators must be a nonempty list of tuples of equal length")]
    BadGenerators,
    #[error("algebras used on different coordinates must share a signature")]
    SignatureMismatch,
    #[error("closure exceeded the limit of {0} tuples")]
    ResourceLimit(usize),
    #[error("table of `{0}` is too large")]
    TableTooLarge(String),
    #[error(transparent)]
    Relation(#[from] RelationError),
}

/// A basic operation: a name, an arity and a total table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    name: String,
    arity: usize,
    table: Vec<Elem>,
}

impl Operation {
    pub fn new(name: impl Into<String>, arity: usize, table: Vec<Elem>) -> Self {
        Operation { name: name.into(), arity, table }
    }

    /// Tabulates `f` over all argument tuples.
    pub fn from_fn(name: impl Into<String>, domain: usize, arity: usize, mut f: impl FnMut(&[Elem]) -> Elem) -> Self {
        let table = crate::relation::ProductIter::new(&vec![domain; arity]).map(|args| f(&args)).collect();
        Operation { name: name.into(), arity, table }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self) -> &[Elem] {
        &self.table
    }
}

#[derive(Clone, Debug)]
pub struct Algebra {
    domain: usize,
    operations: Vec<Operation>,
    by_name: HashMap<String, usize>,
}

impl PartialEq for Algebra {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.operations == other.operations
    }
}

impl Eq for Algebra {}

impl Algebra {
    pub fn new(domain: usize, operations: Vec<Operation>) -> Result<Self, AlgebraError> {
        if domain == 0 || domain > Elem::MAX as usize + 1 {
            return Err(AlgebraError::BadDomain(domain));
        }
        let mut by_name = HashMap::new();
        for (i, op) in operations.iter().enumerate() {
            if op.arity == 0 {
                return Err(AlgebraError::ZeroArity(op.name.clone()));
            }
            let expected = u32::try_from(op.arity)
                .ok()
                .and_then(|a| domain.checked_pow(a))
                .ok_or_else(|| AlgebraError::TableTooLarge(op.name.clone()))?;
            if op.table.len() != expected {
                return Err(AlgebraError::TableLength { name: op.name.clone(), len: op.table.len(), expected });
            }
            if let Some(&value) = op.table.iter().find(|&&v| v as usize >= domain) {
                return Err(AlgebraError::TableValue { name: op.name.clone(), value, domain });
            }
            if by_name.insert(op.name.clone(), i).is_some() {
                return Err(AlgebraError::DuplicateName(op.name.clone()));
            }
        }
        Ok(Algebra { domain, operations, by_name })
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn operations(&self) -> &[Operation] {
        &self.operations
    }

    pub fn operation_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn operation(&self, name: &str) -> Option<&Operation> {
        self.operation_index(name).map(|i| &self.operations[i])
    }

    /// Applies operation `op` to `args`. Arguments must be in the carrier.
    pub fn apply(&self, op: usize, args: &[Elem]) -> Elem {
        let o = &self.operations[op];
        debug_assert_eq!(args.len(), o.arity);
        let idx = args.iter().fold(0usize, |acc, &a| acc * self.domain + a as usize);
        o.table[idx]
    }

    /// True iff every basic operation satisfies `f(a, …, a) = a`.
    pub fn is_idempotent(&self) -> bool {
        self.operations.iter().all(|op| {
            (0..self.domain).all(|a| {
                // index of (a, a, …, a)
                let idx = (0..op.arity).fold(0usize, |acc, _| acc * self.domain + a);
                op.table[idx] as usize == a
            })
        })
    }

    /// Whether operation `op` is invariant under every permutation of its arguments.
    pub fn is_symmetric(&self, op: usize) -> bool {
        let o = &self.operations[op];
        if o.arity < 2 {
            return true;
        }
        let n = self.domain;
        // adjacent transpositions generate the symmetric group
        (0..o.arity - 1).all(|p| {
            crate::relation::ProductIter::new(&vec![n; o.arity]).all(|mut args| {
                let before = self.apply(op, &args);
                args.swap(p, p + 1);
                before == self.apply(op, &args)
            })
        })
    }

    /// Same signature (names and arities, in order).
    pub fn same_signature(&self, other: &Algebra) -> bool {
        self.operations.len() == other.operations.len()
            && self
                .operations
                .iter()
                .zip(&other.operations)
                .all(|(a, b)| a.name == b.name && a.arity == b.arity)
    }

    /// The square `A²` with operations acting coordinate-wise. The pair `(a, b)` is encoded
    /// as `a·n + b`.
    pub fn square(&self) -> Result<Algebra, AlgebraError> {
        let n = self.domain;
        let n2 = n.checked_mul(n).ok_or(AlgebraError::BadDomain(usize::MAX))?;
        let ops = self
            .operations
            .iter()
            .enumerate()
            .map(|(i, op)| {
                let mut firsts = vec![0 as Elem; op.arity];
                let mut seconds = vec![0 as Elem; op.arity];
                Operation::from_fn(op.name.clone(), n2, op.arity, |args| {
                    for (j, &v) in args.iter().enumerate() {
                        firsts[j] = (v as usize / n) as Elem;
                        seconds[j] = (v as usize % n) as Elem;
                    }
                    let a = self.apply(i, &firsts) as usize;
                    let b = self.apply(i, &seconds) as usize;
                    (a * n + b) as Elem
                })
            })
            .collect();
        Algebra::new(n2, ops)
    }

    /// Whether `r` (over this carrier on every coordinate) is closed under all basic
    /// operations applied coordinate-wise.
    pub fn preserves(&self, r: &Relation) -> bool {
        let sorts = vec![self; r.arity()];
        is_invariant_multi(&sorts, r).unwrap_or(false)
    }
}

/// Closure check for a relation whose coordinate `i` lives in algebra `sorts[i]`.
pub fn is_invariant_multi(sorts: &[&Algebra], r: &Relation) -> Result<bool, AlgebraError> {
    if sorts.len() != r.arity() {
        return Err(AlgebraError::BadGenerators);
    }
    for (alg, &d) in sorts.iter().zip(r.domains()) {
        if alg.domain() != d {
            return Ok(false);
        }
    }
    if r.is_empty() {
        return Ok(true);
    }
    let gens: Vec<_> = r.iter().cloned().collect();
    let run = close(sorts, &gens, false, ClosureLimits { max_tuples: gens.len() }, |_, _| false)?;
    Ok(run.complete && run.tuples.len() == gens.len())
}

#[derive(Serialize, Deserialize)]
struct OperationFile {
    name: String,
    arity: usize,
    table: Vec<Elem>,
}

#[derive(Serialize, Deserialize)]
struct AlgebraFile {
    domain: usize,
    operations: Vec<OperationFile>,
}

impl Serialize for Algebra {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AlgebraFile {
            domain: self.domain,
            operations: self
                .operations
                .iter()
                .map(|o| OperationFile { name: o.name.clone(), arity: o.arity, table: o.table.clone() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Algebra {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = AlgebraFile::deserialize(d)?;
        let ops = file.operations.into_iter().map(|o| Operation::new(o.name, o.arity, o.table)).collect();
        Algebra::new(file.domain, ops).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras;

    #[test]
    fn rejects_malformed_tables() {
        let short = Operation::new("f", 2, vec![0, 1, 1]);
        assert!(matches!(Algebra::new(2, vec![short]), Err(AlgebraError::TableLength { .. })));
        let big = Operation::new("f", 1, vec![0, 2]);
        assert!(matches!(Algebra::new(2, vec![big]), Err(AlgebraError::TableValue { .. })));
        let dup = vec![Operation::new("f", 1, vec![0, 1]), Operation::new("f", 1, vec![1, 0])];
        assert!(matches!(Algebra::new(2, dup), Err(AlgebraError::DuplicateName(_))));
        assert!(matches!(Algebra::new(2, vec![Operation::new("c", 0, vec![0])]), Err(AlgebraError::ZeroArity(_))));
    }

    #[test]
    fn idempotency() {
        assert!(algebras::majority().is_idempotent());
        assert!(algebras::threshold_2_of_4().is_idempotent());
        let constant = Algebra::new(2, vec![Operation::new("zero", 1, vec![0, 0])]).unwrap();
        assert!(!constant.is_idempotent());
    }

    #[test]
    fn square_acts_coordinatewise() {
        let min = algebras::binary_min();
        let sq = min.square().unwrap();
        assert_eq!(sq.domain(), 4);
        // (0,1) ∧ (1,1) = (0,1); (1,0) ∧ (0,1) = (0,0)
        assert_eq!(sq.apply(0, &[1, 3]), 1);
        assert_eq!(sq.apply(0, &[2, 1]), 0);
        assert!(sq.is_idempotent());
    }

    #[test]
    fn symmetric_detection() {
        assert!(algebras::majority().is_symmetric(0));
        let proj = Algebra::new(2, vec![Operation::from_fn("p", 2, 2, |a| a[0])]).unwrap();
        assert!(!proj.is_symmetric(0));
    }

    #[test]
    fn json_layout_is_row_major() {
        let json = r#"{"domain": 2, "operations": [{"name": "min", "arity": 2, "table": [0, 0, 0, 1]}]}"#;
        let a: Algebra = serde_json::from_str(json).unwrap();
        assert_eq!(a.apply(0, &[1, 0]), 0);
        assert_eq!(a.apply(0, &[1, 1]), 1);
        let back: Algebra = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn invariance_checks() {
        let maj = algebras::majority();
        let neq = Relation::new(vec![2, 2], vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(maj.preserves(&neq));
        let min = algebras::binary_min();
        assert!(!min.preserves(&neq));
        assert!(min.preserves(&Relation::equality(2)));
    }
}
