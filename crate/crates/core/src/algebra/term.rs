use std::fmt;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Algebra, AlgebraError};
use crate::relation::Elem;

/// A term over the operation symbols of an algebra. Leaves are 0-based variable indices.
///
/// Serialized as nested arrays: `["maj", 0, ["min", 1, 2], 2]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Leaf(usize),
    Node(String, Vec<Term>),
}

impl Term {
    pub fn node(op: impl Into<String>, children: Vec<Term>) -> Self {
        Term::Node(op.into(), children)
    }

    /// One more than the largest variable index, or 0 for a variable-free term.
    pub fn arity_lower_bound(&self) -> usize {
        match self {
            Term::Leaf(i) => i + 1,
            Term::Node(_, ch) => ch.iter().map(Term::arity_lower_bound).max().unwrap_or(0),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Leaf(_) => 0,
            Term::Node(_, ch) => 1 + ch.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Leaf(_) => 1,
            Term::Node(_, ch) => 1 + ch.iter().map(Term::size).sum::<usize>(),
        }
    }

    /// Replaces every leaf `i` by `subst[i]`.
    pub fn substitute(&self, subst: &[Term]) -> Term {
        match self {
            Term::Leaf(i) => subst[*i].clone(),
            Term::Node(op, ch) => Term::Node(op.clone(), ch.iter().map(|c| c.substitute(subst)).collect()),
        }
    }

    /// Checks every node against the signature of `alg`.
    pub fn check(&self, alg: &Algebra) -> Result<(), AlgebraError> {
        match self {
            Term::Leaf(_) => Ok(()),
            Term::Node(op, ch) => {
                let o = alg.operation(op).ok_or_else(|| AlgebraError::UnknownOperation(op.clone()))?;
                if o.arity() != ch.len() {
                    return Err(AlgebraError::ArityMismatch { name: op.clone(), expected: o.arity(), found: ch.len() });
                }
                ch.iter().try_for_each(|c| c.check(alg))
            }
        }
    }
}

/// Evaluates `t` in `alg` at `args`.
pub fn eval_term(alg: &Algebra, t: &Term, args: &[Elem]) -> Result<Elem, AlgebraError> {
    if let Some(&value) = args.iter().find(|&&a| a as usize >= alg.domain()) {
        return Err(AlgebraError::ArgumentOutOfCarrier { value, domain: alg.domain() });
    }
    t.check(alg)?;
    let needed = t.arity_lower_bound();
    if needed > args.len() {
        return Err(AlgebraError::MissingArgument { index: needed - 1, available: args.len() });
    }
    Ok(eval_unchecked(alg, t, args))
}

/// Evaluation without validation; the term must already have passed [`Term::check`].
pub(crate) fn eval_unchecked(alg: &Algebra, t: &Term, args: &[Elem]) -> Elem {
    match t {
        Term::Leaf(i) => args[*i],
        Term::Node(op, ch) => {
            let idx = alg.operation_index(op).expect("checked term");
            let vals: Vec<Elem> = ch.iter().map(|c| eval_unchecked(alg, c, args)).collect();
            alg.apply(idx, &vals)
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Leaf(i) => write!(f, "x{i}"),
            Term::Node(op, ch) => {
                write!(f, "{op}(")?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Term::Leaf(i) => s.serialize_u64(*i as u64),
            Term::Node(op, ch) => {
                let mut seq = s.serialize_seq(Some(ch.len() + 1))?;
                seq.serialize_element(op)?;
                for c in ch {
                    seq.serialize_element(c)?;
                }
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(TermVisitor)
    }
}

struct TermVisitor;

impl<'de> Visitor<'de> for TermVisitor {
    type Value = Term;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a variable index or an array [op, child, ...]")
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Term, E> {
        usize::try_from(v).map(Term::Leaf).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Term, E> {
        usize::try_from(v).map(Term::Leaf).map_err(|_| E::custom("variable index must be non-negative"))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Term, A::Error> {
        let op: String = seq.next_element()?.ok_or_else(|| de::Error::custom("empty term array"))?;
        let mut children = Vec::new();
        while let Some(c) = seq.next_element::<Term>()? {
            children.push(c);
        }
        Ok(Term::Node(op, children))
    }
}
