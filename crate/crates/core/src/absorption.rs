//! Binary relations, local absorption, walks and the loop lemmata.
//!
//! A tuple of pairs `((a1,b1),…,(an,bn))` is read as `n` pairs of a binary relation. Local
//! `n`-absorption of `S` by `R` asks, for a finite set `C` of such tuples, for one term `t`
//! with `(t(a), t(b)) ∈ R` for every tuple in `C`. Tuples lying entirely in `R` are mapped
//! into `R` by every term, so it makes no difference whether `C` is drawn from the tuples
//! with exactly one entry in `S` or from the positional ones (some entry in `S`, the rest
//! in `R`); the checks below accept the latter and enumerate the strict ones.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{close, eval_term, Algebra, AlgebraError, ClosureLimits, ClosureRun, Term};
use crate::relation::{Elem, ProductIter, Relation, Tuple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbsorptionError {
    #[error("pair ({0}, {1}) is outside the carrier of size {2}")]
    PairOutOfCarrier(Elem, Elem, usize),
    #[error("relations live on carriers of sizes {0} and {1}")]
    CarrierMismatch(usize, usize),
    #[error("expected a binary relation on one carrier")]
    NotBinary,
    #[error("{0} is not invariant under the algebra")]
    NotInvariant(&'static str),
    #[error("absorption arity must be at least 1")]
    ZeroArity,
    #[error("the tuple set is empty")]
    EmptyTupleSet,
    #[error("tuple {index} is not a one-S-in-R tuple of length {n}")]
    BadTuple { index: usize, n: usize },
    #[error("the loop theorems need an idempotent algebra")]
    NotIdempotent,
    #[error("walks must have the same positive length")]
    WalkLength,
    #[error("{walk} is not a walk in R at position {pos}")]
    NotAWalk { walk: &'static str, pos: usize },
    #[error("pair at position {0} is not in S")]
    NotInS(usize),
    #[error("the term uses variables beyond {0}")]
    TermArity(usize),
    #[error("step {step} of the joined walk leaves R: ({from}, {to})")]
    StepOutside { step: usize, from: Elem, to: Elem },
    #[error("exhaustive enumeration over a carrier of size {0} is not supported")]
    TooLarge(usize),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// A binary relation on `{0, …, over−1}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "BinRelFile", into = "BinRelFile")]
pub struct BinRel {
    over: usize,
    /// Row-major adjacency: `bits[a·over + b]`.
    bits: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct BinRelFile {
    over: usize,
    pairs: Vec<(Elem, Elem)>,
}

impl TryFrom<BinRelFile> for BinRel {
    type Error = AbsorptionError;
    fn try_from(f: BinRelFile) -> Result<Self, Self::Error> {
        BinRel::new(f.over, f.pairs)
    }
}

impl From<BinRel> for BinRelFile {
    fn from(r: BinRel) -> Self {
        BinRelFile { over: r.over, pairs: r.pairs().collect() }
    }
}

impl std::fmt::Debug for BinRel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinRel[{}]", self.over)?;
        f.debug_set().entries(self.pairs()).finish()
    }
}

impl BinRel {
    pub fn new(over: usize, pairs: impl IntoIterator<Item = (Elem, Elem)>) -> Result<Self, AbsorptionError> {
        let mut r = BinRel::empty(over);
        for (a, b) in pairs {
            if a as usize >= over || b as usize >= over {
                return Err(AbsorptionError::PairOutOfCarrier(a, b, over));
            }
            r.insert(a, b);
        }
        Ok(r)
    }

    pub fn empty(over: usize) -> Self {
        BinRel { over, bits: vec![false; over * over] }
    }

    pub fn full(over: usize) -> Self {
        BinRel { over, bits: vec![true; over * over] }
    }

    /// `=_A`.
    pub fn equality(over: usize) -> Self {
        let mut r = BinRel::empty(over);
        for a in 0..over as Elem {
            r.insert(a, a);
        }
        r
    }

    /// `≠_A`.
    pub fn disequality(over: usize) -> Self {
        let mut r = BinRel::full(over);
        for a in 0..over {
            r.bits[a * over + a] = false;
        }
        r
    }

    /// The relation whose pairs are the set bits of `mask` in row-major order.
    pub fn from_mask(over: usize, mask: u64) -> Self {
        debug_assert!(over * over <= 64);
        BinRel { over, bits: (0..over * over).map(|i| mask >> i & 1 == 1).collect() }
    }

    pub fn from_relation(r: &Relation) -> Result<Self, AbsorptionError> {
        if r.arity() != 2 || r.domains()[0] != r.domains()[1] {
            return Err(AbsorptionError::NotBinary);
        }
        BinRel::new(r.domains()[0], r.iter().map(|t| (t[0], t[1])))
    }

    pub fn to_relation(&self) -> Relation {
        Relation::new(vec![self.over; 2], self.pairs().map(|(a, b)| vec![a, b])).expect("pairs in range")
    }

    pub fn over(&self) -> usize {
        self.over
    }

    pub fn contains(&self, a: Elem, b: Elem) -> bool {
        (a as usize) < self.over && (b as usize) < self.over && self.bits[a as usize * self.over + b as usize]
    }

    pub fn insert(&mut self, a: Elem, b: Elem) {
        self.bits[a as usize * self.over + b as usize] = true;
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Elem, Elem)> + '_ {
        let n = self.over;
        self.bits.iter().enumerate().filter(|(_, &x)| x).map(move |(i, _)| ((i / n) as Elem, (i % n) as Elem))
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&x| x).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.contains(&true)
    }

    pub fn is_subset(&self, other: &BinRel) -> bool {
        self.over == other.over && self.bits.iter().zip(&other.bits).all(|(&x, &y)| !x || y)
    }

    pub fn intersect(&self, other: &BinRel) -> Result<BinRel, AbsorptionError> {
        self.same_carrier(other)?;
        Ok(BinRel { over: self.over, bits: self.bits.iter().zip(&other.bits).map(|(&x, &y)| x && y).collect() })
    }

    /// `R ∖ S`.
    pub fn difference(&self, other: &BinRel) -> Result<BinRel, AbsorptionError> {
        self.same_carrier(other)?;
        Ok(BinRel { over: self.over, bits: self.bits.iter().zip(&other.bits).map(|(&x, &y)| x && !y).collect() })
    }

    fn same_carrier(&self, other: &BinRel) -> Result<(), AbsorptionError> {
        if self.over != other.over {
            return Err(AbsorptionError::CarrierMismatch(self.over, other.over));
        }
        Ok(())
    }

    /// `R ∘ S = {(a, c) : ∃b. (a, b) ∈ R, (b, c) ∈ S}`.
    pub fn compose(&self, other: &BinRel) -> Result<BinRel, AbsorptionError> {
        self.same_carrier(other)?;
        let n = self.over;
        let mut out = BinRel::empty(n);
        for a in 0..n {
            for b in 0..n {
                if self.bits[a * n + b] {
                    for c in 0..n {
                        out.bits[a * n + c] |= other.bits[b * n + c];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> BinRel {
        let n = self.over;
        BinRel { over: n, bits: (0..n * n).map(|i| self.bits[(i % n) * n + i / n]).collect() }
    }

    /// The `l`-fold composition; `l = 0` gives `=_A`.
    pub fn power(&self, l: usize) -> BinRel {
        let mut out = BinRel::equality(self.over);
        for _ in 0..l {
            out = out.compose(self).expect("same carrier");
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        *self == self.inverse()
    }

    pub fn has_loop(&self) -> bool {
        (0..self.over).any(|a| self.bits[a * self.over + a])
    }

    pub fn loops(&self) -> Vec<Elem> {
        (0..self.over).filter(|&a| self.bits[a * self.over + a]).map(|a| a as Elem).collect()
    }

    fn successors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.over).filter(move |&b| self.bits[a * self.over + b])
    }

    /// A shortest directed closed walk of length at most `max_len`, listed as its vertices with
    /// the first repeated at the end. Ties go to the smallest start vertex.
    pub fn find_closed_walk(&self, max_len: usize) -> Option<Vec<Elem>> {
        let n = self.over;
        let mut best: Option<Vec<Elem>> = None;
        for s in 0..n {
            // BFS from s; a closed walk through s is a path to some p with (p, s) ∈ R
            let mut parent = vec![usize::MAX; n];
            let mut dist = vec![usize::MAX; n];
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            let mut found: Option<(usize, usize)> = None;
            while let Some(u) = queue.pop_front() {
                if self.bits[u * n + s] {
                    found = Some((u, dist[u] + 1));
                    break;
                }
                for v in self.successors(u) {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            let Some((end, len)) = found else { continue };
            if len > max_len || best.as_ref().is_some_and(|b| b.len() - 1 <= len) {
                continue;
            }
            let mut walk = vec![s as Elem];
            let mut u = end;
            while u != s {
                walk.push(u as Elem);
                u = parent[u];
            }
            walk[1..].reverse();
            walk.push(s as Elem);
            best = Some(walk);
        }
        best
    }

    /// Some directed walk with `len` edges (`len + 1` vertices), preferring small vertices.
    pub fn find_walk(&self, len: usize) -> Option<Vec<Elem>> {
        let n = self.over;
        // can[r][v]: a walk with r edges starts at v
        let mut can = vec![vec![true; n]];
        for r in 1..=len {
            let prev = &can[r - 1];
            let next: Vec<bool> = (0..n).map(|v| self.successors(v).any(|w| prev[w])).collect();
            if !next.contains(&true) {
                return None;
            }
            can.push(next);
        }
        let mut v = (0..n).find(|&v| can[len][v])?;
        let mut walk = vec![v as Elem];
        for r in (0..len).rev() {
            v = self.successors(v).find(|&w| can[r][w]).expect("walk continues");
            walk.push(v as Elem);
        }
        Some(walk)
    }

    pub fn is_walk(&self, walk: &[Elem]) -> bool {
        walk.windows(2).all(|w| self.contains(w[0], w[1]))
    }

    /// Whether `alg` preserves the relation.
    pub fn is_invariant(&self, alg: &Algebra) -> bool {
        alg.domain() == self.over && alg.preserves(&self.to_relation())
    }
}

/// Exactly one component lies in `S` and all the others lie in `R`.
pub fn one_s_in_r(tuple: &[(Elem, Elem)], r: &BinRel, s: &BinRel) -> bool {
    let mut in_s = 0;
    for &(a, b) in tuple {
        if s.contains(a, b) {
            in_s += 1;
        } else if !r.contains(a, b) {
            return false;
        }
    }
    in_s == 1
}

/// Some component lies in `S` and all the others lie in `R`.
pub fn is_positional_one_s_in_r(tuple: &[(Elem, Elem)], r: &BinRel, s: &BinRel) -> bool {
    let outside: Vec<usize> = (0..tuple.len()).filter(|&i| !r.contains(tuple[i].0, tuple[i].1)).collect();
    match outside.as_slice() {
        [] => tuple.iter().any(|&(a, b)| s.contains(a, b)),
        [i] => s.contains(tuple[*i].0, tuple[*i].1),
        _ => false,
    }
}

/// Every length-`n` tuple with one entry from `S ∖ R` and the rest from `R`.
pub fn strict_one_s_in_r_tuples(r: &BinRel, s: &BinRel, n: usize) -> Vec<Vec<(Elem, Elem)>> {
    let rp: Vec<(Elem, Elem)> = r.pairs().collect();
    let sp: Vec<(Elem, Elem)> = s.pairs().filter(|&(a, b)| !r.contains(a, b)).collect();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for i in 0..n {
        for &p in &sp {
            for rest in ProductIter::new(&vec![rp.len(); n - 1]) {
                let mut t: Vec<(Elem, Elem)> = rest.iter().map(|&j| rp[j as usize]).collect();
                t.insert(i, p);
                out.push(t);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result", content = "term", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AbsorptionOutcome {
    Witness(Term),
    /// The closure completed without a witness.
    None,
    /// The resource guard stopped the closure first.
    Unknown,
}

fn check_pair(alg: &Algebra, r: &BinRel, s: &BinRel) -> Result<(), AbsorptionError> {
    r.same_carrier(s)?;
    if r.over != alg.domain() {
        return Err(AbsorptionError::CarrierMismatch(r.over, alg.domain()));
    }
    if !r.is_invariant(alg) {
        return Err(AbsorptionError::NotInvariant("R"));
    }
    if !s.is_invariant(alg) {
        return Err(AbsorptionError::NotInvariant("S"));
    }
    Ok(())
}

/// Searches the clone for a term `t` of arity `n` with `(t(a), t(b)) ∈ R` for every tuple of
/// `c`, by closing the component columns in `A^{2|C|}` and stopping at the first tuple whose
/// every block lands in `R`.
pub fn find_absorption_witness(
    alg: &Algebra,
    r: &BinRel,
    s: &BinRel,
    n: usize,
    c: &[Vec<(Elem, Elem)>],
    limits: ClosureLimits,
) -> Result<AbsorptionOutcome, AbsorptionError> {
    check_pair(alg, r, s)?;
    if n == 0 {
        return Err(AbsorptionError::ZeroArity);
    }
    if c.is_empty() {
        return Err(AbsorptionError::EmptyTupleSet);
    }
    for (index, t) in c.iter().enumerate() {
        if t.len() != n || !is_positional_one_s_in_r(t, r, s) {
            return Err(AbsorptionError::BadTuple { index, n });
        }
    }
    let gens: Vec<Tuple> = (0..n).map(|i| c.iter().flat_map(|t| [t[i].0, t[i].1]).collect()).collect();
    let sorts = vec![alg; 2 * c.len()];
    let run = close(&sorts, &gens, true, limits, |t, col_map| {
        (0..c.len()).all(|j| r.contains(t[col_map[2 * j]], t[col_map[2 * j + 1]]))
    })?;
    if let Some(idx) = run.stopped_at {
        let term = run.term(alg, idx).expect("derivations recorded");
        for tuple in c {
            let a: Vec<Elem> = tuple.iter().map(|p| p.0).collect();
            let b: Vec<Elem> = tuple.iter().map(|p| p.1).collect();
            debug_assert!(r.contains(eval_term(alg, &term, &a)?, eval_term(alg, &term, &b)?));
        }
        return Ok(AbsorptionOutcome::Witness(term));
    }
    Ok(if run.complete { AbsorptionOutcome::None } else { AbsorptionOutcome::Unknown })
}

/// Verdict of a batch query: the index of the first absorbing operation of the clone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorbs {
    Witness(usize),
    None,
    Unknown,
}

impl Absorbs {
    pub fn found(self) -> bool {
        matches!(self, Absorbs::Witness(_))
    }
}

/// The `n`-ary part of the clone, tabulated on `A^n`, for answering many absorption queries
/// over one algebra. Query answers agree with [`find_absorption_witness`] on the set of all
/// one-S-in-R tuples.
pub struct Absorber<'a> {
    alg: &'a Algebra,
    n: usize,
    run: ClosureRun,
}

impl<'a> Absorber<'a> {
    /// Fails only on a zero arity or an invalid algebra; a tuple limit leaves a partial clone whose
    /// queries may answer [`Absorbs::Unknown`].
    pub fn new(alg: &'a Algebra, n: usize, limits: ClosureLimits) -> Result<Self, AbsorptionError> {
        if n == 0 {
            return Err(AbsorptionError::ZeroArity);
        }
        let points: Vec<Tuple> = ProductIter::new(&vec![alg.domain(); n]).collect();
        let gens: Vec<Tuple> = (0..n).map(|i| points.iter().map(|x| x[i]).collect()).collect();
        let sorts = vec![alg; points.len()];
        let run = close(&sorts, &gens, true, limits, |_, _| false)?;
        Ok(Absorber { alg, n, run })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    /// Number of tabulated term operations.
    pub fn clone_size(&self) -> usize {
        self.run.tuples.len()
    }

    pub fn is_complete(&self) -> bool {
        self.run.complete
    }

    pub fn term(&self, idx: usize) -> Term {
        self.run.term(self.alg, idx).expect("derivations recorded")
    }

    fn table(&self, idx: usize) -> &[Elem] {
        &self.run.tuples[idx]
    }

    fn point_index(&self, x: impl Iterator<Item = Elem>) -> usize {
        let d = self.alg.domain();
        self.run.col_map[x.fold(0usize, |acc, v| acc * d + v as usize)]
    }

    /// Whether `R` locally `n`-absorbs `S`. Both must live on the algebra's carrier; invariance
    /// is the caller's business.
    pub fn absorbs(&self, r: &BinRel, s: &BinRel) -> Absorbs {
        let rp: Vec<(Elem, Elem)> = r.pairs().collect();
        let sp: Vec<(Elem, Elem)> = s.pairs().filter(|&(a, b)| !r.contains(a, b)).collect();
        if sp.is_empty() {
            return Absorbs::Witness(0);
        }
        if rp.is_empty() && self.n > 1 {
            return Absorbs::Witness(0);
        }
        let mut checks: Vec<(usize, usize)> = Vec::new();
        for i in 0..self.n {
            for &p in &sp {
                for rest in ProductIter::new(&vec![rp.len(); self.n - 1]) {
                    let pick = |j: usize| if j == i { p } else { rp[rest[if j < i { j } else { j - 1 }] as usize] };
                    let a = self.point_index((0..self.n).map(|j| pick(j).0));
                    let b = self.point_index((0..self.n).map(|j| pick(j).1));
                    checks.push((a, b));
                }
            }
        }
        checks.sort_unstable();
        checks.dedup();
        for idx in 0..self.run.tuples.len() {
            let tab = self.table(idx);
            if checks.iter().all(|&(a, b)| r.contains(tab[a], tab[b])) {
                return Absorbs::Witness(idx);
            }
        }
        if self.run.complete {
            Absorbs::None
        } else {
            Absorbs::Unknown
        }
    }
}

/// The walk `x_j = t(b_{j−1}, …, b_{j−1}, a_j, …, a_j)` (`j − 1` copies of `b_{j−1}`) for
/// `j = 1, …, n+1`, from `a_1` to `t(b_n, …, b_n)`. Every step is checked against `R`.
pub fn walk_join(
    alg: &Algebra,
    r: &BinRel,
    s: &BinRel,
    t: &Term,
    a_walk: &[Elem],
    b_walk: &[Elem],
) -> Result<Vec<Elem>, AbsorptionError> {
    let n = a_walk.len();
    if n == 0 || b_walk.len() != n {
        return Err(AbsorptionError::WalkLength);
    }
    if let Some(pos) = (1..n).find(|&i| !r.contains(a_walk[i - 1], a_walk[i])) {
        return Err(AbsorptionError::NotAWalk { walk: "a_walk", pos });
    }
    if let Some(pos) = (1..n).find(|&i| !r.contains(b_walk[i - 1], b_walk[i])) {
        return Err(AbsorptionError::NotAWalk { walk: "b_walk", pos });
    }
    if let Some(i) = (0..n).find(|&i| !s.contains(a_walk[i], b_walk[i])) {
        return Err(AbsorptionError::NotInS(i));
    }
    if t.arity_lower_bound() > n {
        return Err(AbsorptionError::TermArity(n));
    }
    let mut walk = Vec::with_capacity(n + 1);
    for j in 0..=n {
        // zero-based: j copies of b_{j-1}, then a_j
        let args: Vec<Elem> = (0..n).map(|i| if i < j { b_walk[j - 1] } else { a_walk[j] }).collect();
        walk.push(eval_term(alg, t, &args)?);
    }
    if let Some(step) = (1..=n).find(|&j| !r.contains(walk[j - 1], walk[j])) {
        return Err(AbsorptionError::StepOutside { step, from: walk[step - 1], to: walk[step] });
    }
    Ok(walk)
}

/// Which binary relations [`verify_loop_theorems`] examines.
#[derive(Clone, Debug)]
pub enum RelationFamily {
    /// Every invariant relation (carrier at most 3).
    Exhaustive,
    /// Subuniverses of `A²` generated by `1..=max_generators` pairs drawn with a seeded RNG.
    Sampled { draws: usize, max_generators: usize, seed: u64 },
    Explicit(Vec<BinRel>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TheoremTally {
    /// Hypotheses hold and a loop is present.
    pub satisfied: usize,
    /// Some hypothesis fails.
    pub vacuous: usize,
    /// Hypotheses hold without a loop.
    pub violations: usize,
    /// An absorption query hit the resource guard.
    pub unknown: usize,
}

impl TheoremTally {
    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Satisfied => self.satisfied += 1,
            Verdict::Vacuous => self.vacuous += 1,
            Verdict::Violated => self.violations += 1,
            Verdict::Unknown => self.unknown += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoopViolation {
    pub theorem: &'static str,
    pub relation: Vec<(Elem, Elem)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoopReport {
    pub carrier: usize,
    pub n: usize,
    pub clone_size: usize,
    pub clone_complete: bool,
    /// Relations drawn or enumerated, before deduplication.
    pub relations_drawn: usize,
    /// Distinct invariant relations examined.
    pub relations_checked: usize,
    /// Symmetric, nonempty, absorbs `=_A`.
    pub symmetric: TheoremTally,
    /// Closed walk, absorbs `=_A`.
    pub closed_walk: TheoremTally,
    /// Walk of length `n − 1`, absorbs `=_A`, some power absorbs the inverse.
    pub inverse_walk: TheoremTally,
    pub stability_checks: usize,
    pub stability_failures: usize,
    pub walk_join_checks: usize,
    pub walk_join_failures: usize,
    pub violations: Vec<LoopViolation>,
}

impl LoopReport {
    pub fn total_violations(&self) -> usize {
        self.symmetric.violations
            + self.closed_walk.violations
            + self.inverse_walk.violations
            + self.stability_failures
            + self.walk_join_failures
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Verdict {
    Satisfied,
    Vacuous,
    Violated,
    Unknown,
}

/// Powers of `R` repeat eventually; past this many distinct powers the search gives up.
const MAX_POWERS: usize = 4096;

#[derive(Default)]
struct RelationFindings {
    symmetric: Option<Verdict>,
    closed_walk: Option<Verdict>,
    inverse_walk: Option<Verdict>,
    stability_checks: usize,
    stability_failures: usize,
    walk_join_checks: usize,
    walk_join_failures: usize,
}

fn verdict(structural: bool, absorbed: Absorbs, has_loop: bool) -> Verdict {
    match (structural, absorbed) {
        (false, _) | (_, Absorbs::None) => Verdict::Vacuous,
        (true, Absorbs::Unknown) => Verdict::Unknown,
        (true, Absorbs::Witness(_)) if has_loop => Verdict::Satisfied,
        _ => Verdict::Violated,
    }
}

fn examine(alg: &Algebra, absorber: &Absorber<'_>, r: &BinRel) -> RelationFindings {
    let n = absorber.arity();
    let eq = BinRel::equality(r.over);
    let has_loop = r.has_loop();
    let mut out = RelationFindings::default();
    let stability = |rel: &BinRel, s: &BinRel, out: &mut RelationFindings| {
        out.stability_checks += 1;
        let inv = absorber.absorbs(&rel.inverse(), &s.inverse());
        let sq = absorber.absorbs(&rel.power(2), &s.power(2));
        if inv == Absorbs::None || sq == Absorbs::None {
            out.stability_failures += 1;
        }
    };

    let eq_abs = absorber.absorbs(r, &eq);
    if let Absorbs::Witness(_) = eq_abs {
        stability(r, &eq, &mut out);
    }
    out.symmetric = Some(verdict(!r.is_empty() && r.is_symmetric(), eq_abs, has_loop));
    out.closed_walk = Some(verdict(r.find_closed_walk(r.over.max(1)).is_some(), eq_abs, has_loop));

    let walk = r.find_walk(n - 1);
    if let (Some(a), Absorbs::Witness(idx)) = (&walk, eq_abs) {
        out.walk_join_checks += 1;
        let t = absorber.term(idx);
        match walk_join(alg, r, &eq, &t, a, a) {
            Ok(w) if w.len() == n + 1 && r.is_walk(&w) && w[0] == a[0] => {}
            _ => out.walk_join_failures += 1,
        }
    }
    out.inverse_walk = Some(if walk.is_none() || !eq_abs.found() {
        verdict(walk.is_some(), eq_abs, has_loop)
    } else {
        let inv = r.inverse();
        let mut seen = std::collections::HashSet::new();
        let mut power = r.clone();
        let mut best = Absorbs::None;
        while seen.len() < MAX_POWERS && seen.insert(power.clone()) {
            match absorber.absorbs(&power, &inv) {
                Absorbs::Witness(i) => {
                    stability(&power, &inv, &mut out);
                    best = Absorbs::Witness(i);
                    break;
                }
                Absorbs::Unknown => best = Absorbs::Unknown,
                Absorbs::None => {}
            }
            power = power.compose(r).expect("same carrier");
        }
        if seen.len() >= MAX_POWERS && !best.found() {
            best = Absorbs::Unknown;
        }
        verdict(true, best, has_loop)
    });
    out
}

fn family_relations(alg: &Algebra, family: &RelationFamily) -> Result<(usize, Vec<BinRel>), AbsorptionError> {
    let d = alg.domain();
    match family {
        RelationFamily::Exhaustive => {
            if d > 3 {
                return Err(AbsorptionError::TooLarge(d));
            }
            let all: Vec<BinRel> = (0..1u64 << (d * d)).map(|m| BinRel::from_mask(d, m)).collect();
            let total = all.len();
            let kept: Vec<BinRel> = all.into_par_iter().filter(|r| r.is_invariant(alg)).collect();
            Ok((total, kept))
        }
        RelationFamily::Sampled { draws, max_generators, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let sorts = [alg, alg];
            let mut cache: HashMap<Vec<Tuple>, BinRel> = HashMap::new();
            let mut found: BTreeMap<BinRel, ()> = BTreeMap::new();
            for _ in 0..*draws {
                let g = rng.gen_range(1..=(*max_generators).max(1));
                let mut gens: Vec<Tuple> =
                    (0..g).map(|_| vec![rng.gen_range(0..d) as Elem, rng.gen_range(0..d) as Elem]).collect();
                gens.sort();
                gens.dedup();
                if !cache.contains_key(&gens) {
                    let run = close(&sorts, &gens, false, ClosureLimits::default(), |_, _| false)?;
                    let rel = BinRel::new(d, run.tuples.iter().map(|t| run.expand(t)).map(|t| (t[0], t[1])))?;
                    cache.insert(gens.clone(), rel);
                }
                found.insert(cache[&gens].clone(), ());
            }
            Ok((*draws, found.into_keys().collect()))
        }
        RelationFamily::Explicit(rels) => {
            let mut kept = Vec::new();
            for r in rels {
                if r.over != d {
                    return Err(AbsorptionError::CarrierMismatch(r.over, d));
                }
                if !r.is_invariant(alg) {
                    return Err(AbsorptionError::NotInvariant("a family relation"));
                }
                if !kept.contains(r) {
                    kept.push(r.clone());
                }
            }
            Ok((rels.len(), kept))
        }
    }
}

/// Checks the three loop theorems with absorption arity `n` over every relation of the family.
/// Relations are examined in parallel; the report is independent of scheduling.
pub fn verify_loop_theorems(
    alg: &Algebra,
    family: &RelationFamily,
    n: usize,
    limits: ClosureLimits,
) -> Result<LoopReport, AbsorptionError> {
    if !alg.is_idempotent() {
        return Err(AbsorptionError::NotIdempotent);
    }
    let absorber = Absorber::new(alg, n, limits)?;
    let (drawn, rels) = family_relations(alg, family)?;
    let findings: Vec<RelationFindings> = rels.par_iter().map(|r| examine(alg, &absorber, r)).collect();

    let mut report = LoopReport {
        carrier: alg.domain(),
        n,
        clone_size: absorber.clone_size(),
        clone_complete: absorber.is_complete(),
        relations_drawn: drawn,
        relations_checked: rels.len(),
        symmetric: TheoremTally::default(),
        closed_walk: TheoremTally::default(),
        inverse_walk: TheoremTally::default(),
        stability_checks: 0,
        stability_failures: 0,
        walk_join_checks: 0,
        walk_join_failures: 0,
        violations: Vec::new(),
    };
    for (r, f) in rels.iter().zip(findings) {
        for (name, v, tally) in [
            ("symmetric", f.symmetric, &mut report.symmetric),
            ("closed_walk", f.closed_walk, &mut report.closed_walk),
            ("inverse_walk", f.inverse_walk, &mut report.inverse_walk),
        ] {
            let v = v.expect("examined");
            tally.add(v);
            if v == Verdict::Violated {
                report.violations.push(LoopViolation { theorem: name, relation: r.pairs().collect() });
            }
        }
        report.stability_checks += f.stability_checks;
        report.stability_failures += f.stability_failures;
        report.walk_join_checks += f.walk_join_checks;
        report.walk_join_failures += f.walk_join_failures;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras;

    fn rel(n: usize, pairs: &[(Elem, Elem)]) -> BinRel {
        BinRel::new(n, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn one_s_in_r_examples() {
        let r = rel(2, &[(0, 1), (1, 0)]);
        let eq = BinRel::equality(2);
        assert!(one_s_in_r(&[(0, 1), (0, 0), (1, 0)], &r, &eq));
        assert!(!one_s_in_r(&[(0, 1), (1, 0), (0, 1)], &r, &eq));
        assert!(!one_s_in_r(&[(0, 0), (1, 1), (0, 1)], &r, &eq));
        assert!(is_positional_one_s_in_r(&[(0, 1), (0, 0), (1, 0)], &r, &eq));
        // with loops in R, positional allows several S entries
        let le = rel(2, &[(0, 0), (0, 1), (1, 1)]);
        assert!(!one_s_in_r(&[(0, 0), (1, 1)], &le, &eq));
        assert!(is_positional_one_s_in_r(&[(0, 0), (1, 1)], &le, &eq));
    }

    #[test]
    fn composition_examples() {
        let ne = BinRel::disequality(2);
        assert_eq!(ne.compose(&ne).unwrap(), BinRel::equality(2));
        let r = rel(3, &[(0, 1), (1, 2)]);
        assert_eq!(r.inverse().inverse(), r);
        assert_eq!(r.power(1), r);
        assert_eq!(r.power(2), rel(3, &[(0, 2)]));
        assert!(r.power(3).is_empty());
        assert!(r.compose(&BinRel::empty(2)).is_err());
    }

    #[test]
    fn walks_and_loops() {
        assert_eq!(BinRel::equality(3).loops(), vec![0, 1, 2]);
        let ne = BinRel::disequality(2);
        assert!(!ne.has_loop());
        assert_eq!(ne.find_closed_walk(5), Some(vec![0, 1, 0]));
        let cyc = rel(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(!cyc.has_loop());
        assert_eq!(cyc.find_closed_walk(5), Some(vec![0, 1, 2, 0]));
        assert_eq!(cyc.find_closed_walk(2), None);
        let path = rel(3, &[(0, 1), (1, 2)]);
        assert_eq!(path.find_closed_walk(9), None);
        assert_eq!(path.find_walk(2), Some(vec![0, 1, 2]));
        assert_eq!(path.find_walk(3), None);
        assert_eq!(cyc.find_walk(7).map(|w| w.len()), Some(8));
    }

    #[test]
    fn serde_round_trip() {
        let r = rel(3, &[(0, 1), (2, 2)]);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"over":3,"pairs":[[0,1],[2,2]]}"#);
        assert_eq!(serde_json::from_str::<BinRel>(&s).unwrap(), r);
        assert!(serde_json::from_str::<BinRel>(r#"{"over":2,"pairs":[[0,2]]}"#).is_err());
    }

    #[test]
    fn disequality_does_not_absorb_equality_under_majority() {
        let maj = algebras::majority();
        let ne = BinRel::disequality(2);
        let eq = BinRel::equality(2);
        let c = strict_one_s_in_r_tuples(&ne, &eq, 3);
        assert_eq!(c.len(), 3 * 2 * 4);
        let out = find_absorption_witness(&maj, &ne, &eq, 3, &c, ClosureLimits::default()).unwrap();
        assert_eq!(out, AbsorptionOutcome::None);
        let absorber = Absorber::new(&maj, 3, ClosureLimits::default()).unwrap();
        assert_eq!(absorber.absorbs(&ne, &eq), Absorbs::None);
    }

    #[test]
    fn full_relation_is_absorbed_by_a_projection() {
        let maj = algebras::majority();
        let full = BinRel::full(2);
        let c = vec![vec![(0, 0), (0, 1), (1, 1)]];
        let out = find_absorption_witness(&maj, &full, &BinRel::equality(2), 3, &c, ClosureLimits::default()).unwrap();
        assert_eq!(out, AbsorptionOutcome::Witness(Term::Leaf(0)));
    }

    #[test]
    fn validation() {
        let maj = algebras::majority();
        let eq = BinRel::equality(2);
        let bad = rel(2, &[(0, 1)]);
        // {(0,1)} is invariant under maj; the tuple set must be one-S-in-R
        let c = vec![vec![(1, 1), (1, 0), (0, 1)]];
        assert_eq!(
            find_absorption_witness(&maj, &bad, &eq, 3, &c, ClosureLimits::default()),
            Err(AbsorptionError::BadTuple { index: 0, n: 3 })
        );
        assert_eq!(
            find_absorption_witness(&maj, &bad, &eq, 3, &[], ClosureLimits::default()),
            Err(AbsorptionError::EmptyTupleSet)
        );
        let min = algebras::binary_min();
        let ne = BinRel::disequality(2);
        assert_eq!(
            find_absorption_witness(&min, &ne, &eq, 2, &[vec![(0, 0), (0, 1)]], ClosureLimits::default()),
            Err(AbsorptionError::NotInvariant("R"))
        );
        assert_eq!(
            verify_loop_theorems(&algebras::slupecki3(), &RelationFamily::Exhaustive, 2, ClosureLimits::default())
                .unwrap_err(),
            AbsorptionError::NotIdempotent
        );
    }

    #[test]
    fn walk_join_examples() {
        let alg = algebras::second_largest_of_4();
        let le = rel(3, &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
        let eq = BinRel::equality(3);
        let t = Term::node("s", (0..4).map(Term::Leaf).collect());
        assert_eq!(walk_join(&alg, &le, &eq, &t, &[1; 4], &[1; 4]).unwrap(), vec![1; 5]);
        let a = [0, 0, 1, 2];
        let w = walk_join(&alg, &le, &eq, &t, &a, &a).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w[0], 0);
        assert_eq!(w[4], 2);
        assert!(le.is_walk(&w));
        assert_eq!(walk_join(&alg, &le, &eq, &t, &[2, 1, 1, 1], &[2, 1, 1, 1]), Err(AbsorptionError::NotAWalk {
            walk: "a_walk",
            pos: 1
        }));
        // a projection onto the last variable does not absorb: x_2 = a_2 after x_1 = a_1
        let lt = rel(3, &[(0, 1), (1, 2), (0, 2)]);
        let mixed = rel(3, &[(0, 0), (1, 1), (2, 2)]);
        let p = Term::Leaf(1);
        assert_eq!(
            walk_join(&alg, &lt, &mixed, &p, &[0, 1], &[0, 1]),
            Err(AbsorptionError::StepOutside { step: 2, from: 1, to: 1 })
        );
    }

    #[test]
    fn majority_family_has_no_violations() {
        let maj = algebras::majority();
        for n in 2..=4 {
            let report = verify_loop_theorems(&maj, &RelationFamily::Exhaustive, n, ClosureLimits::default()).unwrap();
            assert_eq!(report.relations_drawn, 16);
            assert_eq!(report.total_violations(), 0, "{report:?}");
            assert_eq!(report.symmetric.unknown + report.closed_walk.unknown + report.inverse_walk.unknown, 0);
        }
    }

    #[test]
    fn acyclic_family_is_vacuous() {
        let alg = algebras::second_largest_of_4();
        let lt = rel(3, &[(0, 1), (1, 2), (0, 2)]);
        let fam = RelationFamily::Explicit(vec![lt, rel(3, &[(0, 1)]), BinRel::empty(3)]);
        let report = verify_loop_theorems(&alg, &fam, 4, ClosureLimits::default()).unwrap();
        assert_eq!(report.closed_walk.vacuous, 3);
        assert_eq!(report.symmetric.vacuous, 3);
    }

    #[test]
    fn batch_route_agrees_with_closure_route() {
        for (alg, n) in [(algebras::majority(), 3), (algebras::second_largest_of_4(), 2)] {
            let d = alg.domain();
            let absorber = Absorber::new(&alg, n, ClosureLimits::default()).unwrap();
            let rels: Vec<BinRel> = (0..1u64 << (d * d)).map(|m| BinRel::from_mask(d, m)).filter(|r| r.is_invariant(&alg)).collect();
            for r in &rels {
                for s in &rels {
                    let c = strict_one_s_in_r_tuples(r, s, n);
                    let batch = absorber.absorbs(r, s);
                    if c.is_empty() {
                        assert!(batch.found());
                        continue;
                    }
                    let closure = find_absorption_witness(&alg, r, s, n, &c, ClosureLimits::default()).unwrap();
                    assert_eq!(batch.found(), matches!(closure, AbsorptionOutcome::Witness(_)), "{r:?} {s:?}");
                    if let Absorbs::Witness(i) = batch {
                        let t = absorber.term(i);
                        for tuple in &c {
                            let a: Vec<Elem> = tuple.iter().map(|p| p.0).collect();
                            let b: Vec<Elem> = tuple.iter().map(|p| p.1).collect();
                            assert!(r.contains(eval_term(&alg, &t, &a).unwrap(), eval_term(&alg, &t, &b).unwrap()));
                        }
                    }
                }
            }
        }
    }
}
