//! Finite relations over per-coordinate carriers `{0, …, n_i − 1}`.

use std::collections::BTreeSet;

use thiserror::Error;

/// A carrier element. Carriers are always `{0, …, n−1}`.
pub type Elem = u16;

/// A tuple of carrier elements, one per coordinate.
pub type Tuple = Vec<Elem>;

/// Largest dense product (number of cells) we are willing to materialize.
pub const MAX_DENSE_CELLS: usize = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelationError {
    #[error("tuple {tuple:?} has length {len}, expected {arity}")]
    ArityMismatch { tuple: Tuple, len: usize, arity: usize },
    #[error("value {value} at coordinate {coord} is outside its domain of size {domain}")]
    OutOfDomain { coord: usize, value: Elem, domain: usize },
    #[error("domain size {0} is not supported (must be between 1 and 65536)")]
    BadDomain(usize),
    #[error("product of domains {0:?} is too large to enumerate")]
    ProductTooLarge(Vec<usize>),
}

/// A set of tuples over the given coordinate domains, kept in canonical sorted order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    domains: Vec<usize>,
    tuples: BTreeSet<Tuple>,
}

impl Relation {
    pub fn new<I>(domains: Vec<usize>, tuples: I) -> Result<Self, RelationError>
    where
        I: IntoIterator<Item = Tuple>,
    {
        for &d in &domains {
            if d == 0 || d > (Elem::MAX as usize) + 1 {
                return Err(RelationError::BadDomain(d));
            }
        }
        let mut set = BTreeSet::new();
        for t in tuples {
            check_tuple(&domains, &t)?;
            set.insert(t);
        }
        Ok(Relation { domains, tuples: set })
    }

    pub(crate) fn from_set_unchecked(domains: Vec<usize>, tuples: BTreeSet<Tuple>) -> Self {
        Relation { domains, tuples }
    }

    pub fn empty(domains: Vec<usize>) -> Self {
        Relation { domains, tuples: BTreeSet::new() }
    }

    /// The full product of the domains.
    pub fn full(domains: Vec<usize>) -> Result<Self, RelationError> {
        let size = product_size(&domains).ok_or_else(|| RelationError::ProductTooLarge(domains.clone()))?;
        if size > MAX_DENSE_CELLS {
            return Err(RelationError::ProductTooLarge(domains));
        }
        let tuples = ProductIter::new(&domains).collect();
        Ok(Relation { domains, tuples })
    }

    /// `{(a, a) | a < n}`.
    pub fn equality(n: usize) -> Self {
        let tuples = (0..n).map(|a| vec![a as Elem, a as Elem]).collect();
        Relation { domains: vec![n, n], tuples }
    }

    pub fn arity(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        self.tuples.contains(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> + '_ {
        self.tuples.iter()
    }

    pub fn tuples(&self) -> &BTreeSet<Tuple> {
        &self.tuples
    }

    pub fn into_tuples(self) -> BTreeSet<Tuple> {
        self.tuples
    }

    /// Whether this relation is the whole product of its domains.
    pub fn is_full(&self) -> bool {
        product_size(&self.domains) == Some(self.tuples.len())
    }

    /// Projection onto the listed coordinates, in the listed order.
    pub fn project(&self, coords: &[usize]) -> Relation {
        let domains = coords.iter().map(|&c| self.domains[c]).collect();
        let tuples = self
            .tuples
            .iter()
            .map(|t| coords.iter().map(|&c| t[c]).collect())
            .collect();
        Relation { domains, tuples }
    }

    /// Reorders coordinates: coordinate `i` of the result is coordinate `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Relation {
        debug_assert_eq!(order.len(), self.arity());
        self.project(order)
    }

    pub fn intersect(&self, other: &Relation) -> Relation {
        debug_assert_eq!(self.domains, other.domains);
        let tuples = self.tuples.intersection(&other.tuples).cloned().collect();
        Relation { domains: self.domains.clone(), tuples }
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.tuples.is_subset(&other.tuples)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Tuple) -> bool) {
        self.tuples.retain(|t| keep(t));
    }

    pub fn insert(&mut self, t: Tuple) -> Result<bool, RelationError> {
        check_tuple(&self.domains, &t)?;
        Ok(self.tuples.insert(t))
    }
}

fn check_tuple(domains: &[usize], t: &[Elem]) -> Result<(), RelationError> {
    if t.len() != domains.len() {
        return Err(RelationError::ArityMismatch { tuple: t.to_vec(), len: t.len(), arity: domains.len() });
    }
    for (coord, (&v, &d)) in t.iter().zip(domains).enumerate() {
        if v as usize >= d {
            return Err(RelationError::OutOfDomain { coord, value: v, domain: d });
        }
    }
    Ok(())
}

/// Product of the domain sizes, `None` on overflow.
pub fn product_size(domains: &[usize]) -> Option<usize> {
    domains.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

/// Mixed-radix position of `t` in the product of `domains` (last coordinate fastest).
pub fn mixed_radix_index(domains: &[usize], t: &[Elem]) -> usize {
    t.iter().zip(domains).fold(0usize, |acc, (&v, &d)| acc * d + v as usize)
}

/// Iterates over every tuple of a product of domains in lexicographic order.
#[derive(Clone, Debug)]
pub struct ProductIter {
    domains: Vec<usize>,
    next: Option<Tuple>,
}

impl ProductIter {
    pub fn new(domains: &[usize]) -> Self {
        let next = if domains.contains(&0) { None } else { Some(vec![0; domains.len()]) };
        ProductIter { domains: domains.to_vec(), next }
    }
}

impl Iterator for ProductIter {
    type Item = Tuple;

    fn next(&mut self) -> Option<Tuple> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if (succ[i] as usize) + 1 < self.domains[i] {
                succ[i] += 1;
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

/// A relation stored as a bit per cell of the domain product. Used by the hot loops of the
/// solver and the consistency engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct DenseRelation {
    pub domains: Vec<usize>,
    pub bits: Vec<bool>,
}

impl DenseRelation {
    pub fn from_relation(r: &Relation) -> Result<Self, RelationError> {
        let size = product_size(r.domains())
            .filter(|&s| s <= MAX_DENSE_CELLS)
            .ok_or_else(|| RelationError::ProductTooLarge(r.domains().to_vec()))?;
        let mut bits = vec![false; size];
        for t in r.iter() {
            bits[mixed_radix_index(r.domains(), t)] = true;
        }
        Ok(DenseRelation { domains: r.domains().to_vec(), bits })
    }

    pub fn full(domains: &[usize]) -> Result<Self, RelationError> {
        let size = product_size(domains)
            .filter(|&s| s <= MAX_DENSE_CELLS)
            .ok_or_else(|| RelationError::ProductTooLarge(domains.to_vec()))?;
        Ok(DenseRelation { domains: domains.to_vec(), bits: vec![true; size] })
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        self.bits[mixed_radix_index(&self.domains, t)]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_relation(&self) -> Relation {
        let tuples = ProductIter::new(&self.domains)
            .zip(&self.bits)
            .filter_map(|(t, &b)| b.then_some(t))
            .collect();
        Relation::from_set_unchecked(self.domains.clone(), tuples)
    }
}
