//! Patterns, realizations, complete l-trees and quality.
//!
//! A pattern is a set of vertices labeled by variables together with a family of at most
//! k-element vertex sets (faces) closed under nonempty subsets. A face `{f1, …, fl}` is satisfied
//! by `α` when `(α(f1), …, α(fl))` lies in `R_{v(f1),…,v(fl)}`: vertices sharing a label carry equal
//! values and every constraint whose scope lies inside the face's labels holds. Scopes with no
//! constraint are unconstrained.
//!
//! Quality is computed without building trees. For a face `H` with values, `hang(r, H)` holds when
//! for every set `U` of `k + 1 − |H|` variables there are values on fresh vertices `G` labeled by
//! `U` such that every new face `S ⊆ H ∪ G` (meeting `G`, `|S| ≤ k`) is satisfied and `hang(r − 1, S)`
//! holds. An evaluation has quality `d` when every nonempty subset of its face is satisfied and
//! `hang(d − 1, ·)` holds on it. A complete tree attaches blocks to every face at every later
//! round; a block attached later is a subpattern of one attached earlier, so only the earliest
//! block per `(face, U)` matters, which is what the recursion counts.

use std::collections::{BTreeSet, HashMap};

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{is_invariant_multi, Algebra, AlgebraError};
use crate::instance::{Instance, InstanceError, PartialAssignment};
use crate::relation::{Elem, ProductIter, Relation, Tuple};
use crate::solver::{SolverError, SolverLimits};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("face size bound k must be at least 1")]
    ZeroK,
    #[error("vertex {0} does not exist")]
    NoVertex(usize),
    #[error("label {label} of vertex {vertex} is not a variable")]
    BadLabel { vertex: usize, label: usize },
    #[error("face {0:?} has more than k vertices")]
    FaceTooLarge(Vec<usize>),
    #[error("faces are not closed under subsets: {0:?} is missing")]
    NotClosed(Vec<usize>),
    #[error("need 1 ≤ l ≤ k and a base of at most l vertices")]
    BadTreeShape,
    #[error("depth and quality start at 1")]
    ZeroDepth,
    #[error("the tree would exceed {0} vertices")]
    TooLarge(usize),
    #[error("evaluation binds {0} variables, more than k")]
    EvaluationTooLarge(usize),
    #[error("the instance is not a weak {0}-instance")]
    NotWeak(usize),
    #[error("value {value} outside the domain of vertex {vertex}")]
    ValueOutOfDomain { vertex: usize, value: Elem },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// A block of a complete tree: fresh vertices glued to an existing face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub attach: Vec<usize>,
    pub fresh: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    k: usize,
    labels: Vec<usize>,
    /// Nonempty faces as sorted vertex lists.
    faces: BTreeSet<Vec<usize>>,
    /// Construction record of a complete tree; empty for other patterns.
    blocks: Vec<Block>,
    base: Vec<usize>,
}

impl Pattern {
    /// Faces may be listed partially; they are checked for closure under nonempty subsets.
    pub fn new(k: usize, labels: Vec<usize>, faces: impl IntoIterator<Item = Vec<usize>>) -> Result<Self, PatternError> {
        if k == 0 {
            return Err(PatternError::ZeroK);
        }
        let mut set = BTreeSet::new();
        for mut f in faces {
            f.sort_unstable();
            f.dedup();
            if let Some(&v) = f.iter().find(|&&v| v >= labels.len()) {
                return Err(PatternError::NoVertex(v));
            }
            if f.len() > k {
                return Err(PatternError::FaceTooLarge(f));
            }
            if !f.is_empty() {
                set.insert(f);
            }
        }
        for f in &set {
            for sub in nonempty_subsets(f).filter(|s| s.len() < f.len()) {
                if !set.contains(&sub) {
                    return Err(PatternError::NotClosed(sub));
                }
            }
        }
        Ok(Pattern { k, labels, faces: set, blocks: Vec::new(), base: Vec::new() })
    }

    /// All nonempty subsets of at most `k` vertices are faces.
    pub fn complete(k: usize, labels: Vec<usize>) -> Result<Self, PatternError> {
        let all: Vec<usize> = (0..labels.len()).collect();
        let faces: Vec<Vec<usize>> = nonempty_subsets(&all).filter(|s| s.len() <= k).collect();
        Pattern::new(k, labels, faces)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn faces(&self) -> impl Iterator<Item = &Vec<usize>> + '_ {
        self.faces.iter()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn base(&self) -> &[usize] {
        &self.base
    }

    fn check_labels(&self, inst: &Instance) -> Result<(), PatternError> {
        match self.labels.iter().position(|&l| l >= inst.num_vars()) {
            Some(vertex) => Err(PatternError::BadLabel { vertex, label: self.labels[vertex] }),
            None => Ok(()),
        }
    }
}

fn nonempty_subsets(items: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (1..=items.len()).flat_map(move |r| items.iter().copied().combinations(r))
}

/// Whether the labeled values satisfy their face: repeated labels agree, values lie in their
/// domains and every constraint inside the labels holds.
pub fn face_satisfied(inst: &Instance, face: &[(usize, Elem)]) -> bool {
    let mut vals: Vec<(usize, Elem)> = face.to_vec();
    vals.sort_unstable();
    vals.dedup();
    if vals.windows(2).any(|w| w[0].0 == w[1].0) {
        return false;
    }
    if vals.iter().any(|&(v, a)| v >= inst.num_vars() || a as usize >= inst.domain(v)) {
        return false;
    }
    let vars: Vec<usize> = vals.iter().map(|p| p.0).collect();
    for sub in (1..=vals.len()).flat_map(|r| (0..vals.len()).combinations(r)) {
        let scope: Vec<usize> = sub.iter().map(|&i| vars[i]).collect();
        if let Some(rel) = inst.constraint(&scope) {
            let t: Tuple = sub.iter().map(|&i| vals[i].1).collect();
            if !rel.contains(&t) {
                return false;
            }
        }
    }
    true
}

/// Whether `assign` (indexed by vertex) realizes the pattern.
pub fn check_realization(inst: &Instance, pat: &Pattern, assign: &[Elem]) -> bool {
    if assign.len() != pat.num_vertices() || pat.check_labels(inst).is_err() {
        return false;
    }
    if (0..assign.len()).any(|p| assign[p] as usize >= inst.domain(pat.labels[p])) {
        return false;
    }
    pat.faces.iter().all(|f| face_satisfied(inst, &labeled(pat, f, assign)))
}

fn labeled(pat: &Pattern, face: &[usize], assign: &[Elem]) -> Vec<(usize, Elem)> {
    face.iter().map(|&p| (pat.labels[p], assign[p])).collect()
}

/// Every realization of the pattern, by backtracking over vertices in index order.
pub fn realizations(inst: &Instance, pat: &Pattern, limit: usize) -> Result<Vec<Tuple>, PatternError> {
    pat.check_labels(inst)?;
    let n = pat.num_vertices();
    // faces checked once their last vertex is set
    let mut closing: Vec<Vec<&Vec<usize>>> = vec![Vec::new(); n];
    for f in &pat.faces {
        closing[*f.last().expect("nonempty")].push(f);
    }
    let mut out = Vec::new();
    let mut assign = vec![0 as Elem; n];
    fn go(
        inst: &Instance,
        pat: &Pattern,
        closing: &[Vec<&Vec<usize>>],
        assign: &mut Vec<Elem>,
        p: usize,
        out: &mut Vec<Tuple>,
        limit: usize,
    ) -> Result<(), PatternError> {
        if p == assign.len() {
            if out.len() >= limit {
                return Err(PatternError::TooLarge(limit));
            }
            out.push(assign.clone());
            return Ok(());
        }
        for a in 0..inst.domain(pat.labels[p]) as Elem {
            assign[p] = a;
            if closing[p].iter().all(|f| face_satisfied(inst, &labeled(pat, f, assign))) {
                go(inst, pat, closing, assign, p + 1, out, limit)?;
            }
        }
        Ok(())
    }
    go(inst, pat, &closing, &mut assign, 0, &mut out, limit)?;
    Ok(out)
}

/// The complete `l`-tree of the given depth over base vertices labeled `base_labels`, faces
/// bounded by `k`, fresh vertices labeled from variables `0..num_vars`. Every nonempty face
/// receives blocks.
pub fn build_complete_ltree(
    base_labels: &[usize],
    k: usize,
    l: usize,
    depth: usize,
    num_vars: usize,
    max_vertices: usize,
) -> Result<Pattern, PatternError> {
    if l == 0 || l > k || base_labels.len() > l {
        return Err(PatternError::BadTreeShape);
    }
    if depth == 0 {
        return Err(PatternError::ZeroDepth);
    }
    if let Some(vertex) = base_labels.iter().position(|&x| x >= num_vars) {
        return Err(PatternError::BadLabel { vertex, label: base_labels[vertex] });
    }
    if base_labels.len() > max_vertices {
        return Err(PatternError::TooLarge(max_vertices));
    }
    let mut pat = Pattern::complete(k, base_labels.to_vec())?;
    pat.base = (0..base_labels.len()).collect();
    for _ in 1..depth {
        let snapshot: Vec<Vec<usize>> = pat.faces.iter().cloned().collect();
        for e in snapshot {
            if e.len() > l {
                continue;
            }
            for u in (0..num_vars).combinations(l + 1 - e.len()) {
                if pat.labels.len() + u.len() > max_vertices {
                    return Err(PatternError::TooLarge(max_vertices));
                }
                let start = pat.labels.len();
                pat.labels.extend(&u);
                let fresh: Vec<usize> = (start..pat.labels.len()).collect();
                let joined: Vec<usize> = e.iter().chain(&fresh).copied().collect();
                for f in nonempty_subsets(&joined) {
                    if f.len() <= k && *f.last().expect("nonempty") >= start {
                        pat.faces.insert(f);
                    }
                }
                pat.blocks.push(Block { attach: e.clone(), fresh });
            }
        }
    }
    Ok(pat)
}

/// Whether `base_values` on the base of a complete tree extends to a realization, by dynamic
/// programming over its blocks: a block is fine for given values on its attach face when some
/// values on its fresh vertices satisfy its new faces and make every child block fine.
pub fn tree_realizable(inst: &Instance, tree: &Pattern, base_values: &[Elem]) -> Result<bool, PatternError> {
    tree.check_labels(inst)?;
    if base_values.len() != tree.base.len() {
        return Err(PatternError::NoVertex(base_values.len()));
    }
    let n = tree.num_vertices();
    // which block introduced each vertex
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (b, blk) in tree.blocks.iter().enumerate() {
        for &p in &blk.fresh {
            owner[p] = Some(b);
        }
    }
    // a face belongs to the block owning its last vertex; children hang off faces of their parent
    let mut root_children = Vec::new();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); tree.blocks.len()];
    for (b, blk) in tree.blocks.iter().enumerate() {
        match owner[*blk.attach.last().expect("nonempty")] {
            Some(parent) => children[parent].push(b),
            None => root_children.push(b),
        }
    }
    let mut new_faces: Vec<Vec<&Vec<usize>>> = vec![Vec::new(); tree.blocks.len()];
    let mut base_faces = Vec::new();
    for f in &tree.faces {
        match owner[*f.last().expect("nonempty")] {
            Some(b) => new_faces[b].push(f),
            None => base_faces.push(f),
        }
    }

    let mut assign: Vec<Elem> = vec![0; n];
    for (&p, &a) in tree.base.iter().zip(base_values) {
        if a as usize >= inst.domain(tree.labels[p]) {
            return Err(PatternError::ValueOutOfDomain { vertex: p, value: a });
        }
        assign[p] = a;
    }
    if !base_faces.iter().all(|f| face_satisfied(inst, &labeled(tree, f, &assign))) {
        return Ok(false);
    }

    struct Dp<'a> {
        inst: &'a Instance,
        tree: &'a Pattern,
        children: Vec<Vec<usize>>,
        new_faces: Vec<Vec<&'a Vec<usize>>>,
        memo: HashMap<(usize, Vec<Elem>), bool>,
    }
    impl Dp<'_> {
        fn block_ok(&mut self, b: usize, assign: &mut Vec<Elem>) -> bool {
            let blk = &self.tree.blocks[b];
            let key = (b, blk.attach.iter().map(|&p| assign[p]).collect::<Vec<_>>());
            if let Some(&v) = self.memo.get(&key) {
                return v;
            }
            let fresh = blk.fresh.clone();
            let doms: Vec<usize> = fresh.iter().map(|&p| self.inst.domain(self.tree.labels[p])).collect();
            let mut ok = false;
            for vals in ProductIter::new(&doms) {
                for (&p, &a) in fresh.iter().zip(&vals) {
                    assign[p] = a;
                }
                let faces_ok =
                    self.new_faces[b].iter().all(|f| face_satisfied(self.inst, &labeled(self.tree, f, assign)));
                if faces_ok && (0..self.children[b].len()).all(|i| self.block_ok(self.children[b][i], assign)) {
                    ok = true;
                    break;
                }
            }
            self.memo.insert(key, ok);
            ok
        }
    }
    let mut dp = Dp { inst, tree, children, new_faces, memo: HashMap::new() };
    Ok(root_children.iter().all(|&b| dp.block_ok(b, &mut assign)))
}

/// A face with values, as a sorted multiset of `(variable, value)`.
type State = Vec<(usize, Elem)>;

/// Memoized quality evaluation over one weak k-instance.
pub struct QualityEngine<'a> {
    inst: &'a Instance,
    k: usize,
    /// `memo[r]` caches `hang(r, ·)`.
    memo: Vec<HashMap<State, bool>>,
}

impl<'a> QualityEngine<'a> {
    pub fn new(inst: &'a Instance, k: usize) -> Result<Self, PatternError> {
        if k == 0 {
            return Err(PatternError::ZeroK);
        }
        if !inst.validate_weak_k(k) {
            return Err(PatternError::NotWeak(k));
        }
        Ok(QualityEngine { inst, k, memo: Vec::new() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn hang(&mut self, r: usize, h: &State) -> bool {
        if r == 0 {
            return true;
        }
        while self.memo.len() <= r {
            self.memo.push(HashMap::new());
        }
        if let Some(&v) = self.memo[r].get(h) {
            return v;
        }
        let n = self.inst.num_vars();
        let width = self.k + 1 - h.len();
        let mut holds = true;
        for u in (0..n).combinations(width) {
            let mut g: Vec<(usize, Elem)> = Vec::with_capacity(width);
            if !self.extend_block(r, h, &u, &mut g) {
                holds = false;
                break;
            }
        }
        self.memo[r].insert(h.clone(), holds);
        holds
    }

    /// Backtracks over values of the fresh vertices; faces are checked when their last fresh
    /// vertex is set.
    fn extend_block(&mut self, r: usize, h: &State, u: &[usize], g: &mut Vec<(usize, Elem)>) -> bool {
        let i = g.len();
        if i == u.len() {
            return true;
        }
        let var = u[i];
        for a in 0..self.inst.domain(var) as Elem {
            g.push((var, a));
            let mut ok = true;
            // faces containing g[i] and drawn from h ∪ g[..i]
            let earlier: Vec<(usize, Elem)> = h.iter().chain(&g[..i]).copied().collect();
            'faces: for size in 0..self.k.min(earlier.len() + 1) {
                for pick in (0..earlier.len()).combinations(size) {
                    let mut s: State = pick.iter().map(|&j| earlier[j]).collect();
                    s.push((var, a));
                    s.sort_unstable();
                    if !face_satisfied(self.inst, &s) || !self.hang(r - 1, &s) {
                        ok = false;
                        break 'faces;
                    }
                }
            }
            if ok && self.extend_block(r, h, u, g) {
                g.pop();
                return true;
            }
            g.pop();
        }
        false
    }

    /// Whether the values on a face of labeled vertices satisfy it with quality `d`.
    pub fn face_has_quality(&mut self, face: &[(usize, Elem)], d: usize) -> Result<bool, PatternError> {
        if d == 0 {
            return Err(PatternError::ZeroDepth);
        }
        if face.len() > self.k {
            return Err(PatternError::EvaluationTooLarge(face.len()));
        }
        for sub in nonempty_subsets(&(0..face.len()).collect::<Vec<_>>()) {
            let mut s: State = sub.iter().map(|&i| face[i]).collect();
            s.sort_unstable();
            if !face_satisfied(self.inst, &s) || !self.hang(d - 1, &s) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Quality of an evaluation of at most `k` variables.
    pub fn evaluation_has_quality(&mut self, phi: &PartialAssignment, d: usize) -> Result<bool, PatternError> {
        let face: Vec<(usize, Elem)> = phi.iter().collect();
        self.face_has_quality(&face, d)
    }

    /// Whether `assign` realizes the pattern with every face of quality `d`.
    pub fn realization_has_quality(&mut self, pat: &Pattern, assign: &[Elem], d: usize) -> Result<bool, PatternError> {
        if !check_realization(self.inst, pat, assign) {
            return Ok(false);
        }
        for f in &pat.faces {
            if !self.face_has_quality(&labeled(pat, f, assign), d)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `quality(inst, φ, d)` for a weak k-instance.
pub fn quality(inst: &Instance, k: usize, phi: &PartialAssignment, d: usize) -> Result<bool, PatternError> {
    QualityEngine::new(inst, k)?.evaluation_has_quality(phi, d)
}

/// Quality through the literal complete k-tree of depth `d` with base labeled by `φ`'s variables.
pub fn quality_by_tree(
    inst: &Instance,
    k: usize,
    phi: &PartialAssignment,
    d: usize,
    max_vertices: usize,
) -> Result<bool, PatternError> {
    if phi.len() > k {
        return Err(PatternError::EvaluationTooLarge(phi.len()));
    }
    let (labels, values): (Vec<usize>, Vec<Elem>) = phi.iter().unzip();
    if labels.is_empty() {
        return Ok(true);
    }
    let tree = build_complete_ltree(&labels, k, k, d, inst.num_vars(), max_vertices)?;
    tree_realizable(inst, &tree, &values)
}

/// The quality-`d` realizations of a pattern, as a relation over its vertices.
pub fn quality_realizations(
    engine: &mut QualityEngine<'_>,
    pat: &Pattern,
    d: usize,
    limit: usize,
) -> Result<Relation, PatternError> {
    let all = realizations(engine.inst, pat, limit)?;
    let mut keep = Vec::new();
    for a in all {
        if engine.realization_has_quality(pat, &a, d)? {
            keep.push(a);
        }
    }
    let domains = pat.labels.iter().map(|&l| engine.inst.domain(l)).collect();
    Ok(Relation::new(domains, keep).expect("values within domains"))
}

/// Whether the quality-`d` realizations of `pat` are closed under every basic operation applied
/// vertex-wise; `sorts[x]` is the algebra on variable `x`.
pub fn quality_realizations_closed(
    engine: &mut QualityEngine<'_>,
    sorts: &[&Algebra],
    pat: &Pattern,
    d: usize,
    limit: usize,
) -> Result<bool, PatternError> {
    let rel = quality_realizations(engine, pat, d, limit)?;
    if pat.num_vertices() == 0 || rel.is_empty() {
        return Ok(true);
    }
    let vertex_sorts: Vec<&Algebra> = pat.labels.iter().map(|&l| sorts[l]).collect();
    Ok(is_invariant_multi(&vertex_sorts, &rel)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QualityLevel {
    pub d: usize,
    /// Evaluations on at most k variables with quality `d`.
    pub quality_evaluations: usize,
    /// Of those, the ones that do not extend to a solution.
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SufficientQuality {
    /// The least `d ≤ max_d` at which every quality-`d` evaluation extends to a solution.
    pub least_d: Option<usize>,
    pub levels: Vec<QualityLevel>,
}

/// For `d = 1, …, max_d`, counts the evaluations on at most `k` variables of quality `d` that do
/// not extend to a solution, stopping at the first `d` with none.
pub fn least_sufficient_quality(
    inst: &Instance,
    k: usize,
    max_d: usize,
    limits: SolverLimits,
) -> Result<SufficientQuality, PatternError> {
    let mut engine = QualityEngine::new(inst, k)?;
    let solver = crate::solver::Solver::new(inst, limits);
    let n = inst.num_vars();
    let mut evaluations: Vec<(Vec<(usize, Elem)>, bool)> = Vec::new();
    for size in 1..=k.min(n) {
        for vars in (0..n).combinations(size) {
            let doms: Vec<usize> = vars.iter().map(|&v| inst.domain(v)).collect();
            for vals in ProductIter::new(&doms) {
                let face: Vec<(usize, Elem)> = vars.iter().copied().zip(vals).collect();
                if !face_satisfied(inst, &face) {
                    continue;
                }
                let mut fixed = vec![None; n];
                for &(v, a) in &face {
                    fixed[v] = Some(a);
                }
                let extends = solver.extends(&fixed)?;
                evaluations.push((face, extends));
            }
        }
    }
    let mut levels = Vec::new();
    for d in 1..=max_d {
        let mut level = QualityLevel { d, quality_evaluations: 0, failures: 0 };
        for (face, extends) in &evaluations {
            if engine.face_has_quality(face, d)? {
                level.quality_evaluations += 1;
                if !extends {
                    level.failures += 1;
                }
            }
        }
        let done = level.failures == 0;
        levels.push(level);
        if done {
            return Ok(SufficientQuality { least_d: Some(d), levels });
        }
    }
    Ok(SufficientQuality { least_d: None, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{enforce_kl, Status};

    fn ne2() -> Relation {
        Relation::new(vec![2, 2], [vec![0, 1], vec![1, 0]]).unwrap()
    }

    /// Triangle of disequalities over {0,1} with the unary constraints filled in.
    fn triangle() -> Instance {
        let mut inst = Instance::uniform(3, 2);
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            inst.add_constraint(&[a, b], ne2()).unwrap();
        }
        inst.with_full_small_constraints(2).unwrap()
    }

    #[test]
    fn pattern_validation() {
        assert!(Pattern::new(2, vec![0, 1], [vec![0, 1]]).is_err());
        assert!(Pattern::new(2, vec![0, 1], [vec![0, 1], vec![0], vec![1]]).is_ok());
        assert_eq!(Pattern::new(1, vec![0, 1], [vec![0, 1]]), Err(PatternError::FaceTooLarge(vec![0, 1])));
        assert_eq!(Pattern::new(2, vec![0], [vec![3]]), Err(PatternError::NoVertex(3)));
        assert_eq!(Pattern::complete(2, vec![0, 1, 2]).unwrap().num_faces(), 6);
    }

    #[test]
    fn realization_examples() {
        let inst = triangle();
        let empty = Pattern::new(2, vec![], []).unwrap();
        assert!(check_realization(&inst, &empty, &[]));
        let single = Pattern::complete(2, vec![0]).unwrap();
        assert!(check_realization(&inst, &single, &[1]));
        assert!(!check_realization(&inst, &single, &[2]));
        let edge = Pattern::complete(2, vec![0, 1]).unwrap();
        assert!(check_realization(&inst, &edge, &[0, 1]));
        assert!(!check_realization(&inst, &edge, &[1, 1]));
        // repeated labels must agree
        let twin = Pattern::complete(2, vec![0, 0]).unwrap();
        assert!(check_realization(&inst, &twin, &[1, 1]));
        assert!(!check_realization(&inst, &twin, &[0, 1]));
        assert_eq!(realizations(&inst, &edge, 10).unwrap(), vec![vec![0, 1], vec![1, 0]]);
        let tri = Pattern::complete(2, vec![0, 1, 2]).unwrap();
        assert!(realizations(&inst, &tri, 10).unwrap().is_empty());
    }

    #[test]
    fn tree_shapes() {
        let one = build_complete_ltree(&[0, 1], 2, 2, 1, 3, 100).unwrap();
        assert_eq!(one.num_vertices(), 2);
        assert_eq!(one.num_faces(), 3);
        let m = 4;
        let star = build_complete_ltree(&[0], 2, 1, 2, m, 100).unwrap();
        assert_eq!(star.num_vertices(), 1 + m);
        assert_eq!(star.labels()[1..], [0, 1, 2, 3]);
        let edges: Vec<&Vec<usize>> = star.faces().filter(|f| f.len() == 2).collect();
        assert_eq!(edges.len(), m);
        assert!(edges.iter().all(|e| e[0] == 0));
        assert_eq!(build_complete_ltree(&[0, 1, 2], 2, 2, 1, 3, 100), Err(PatternError::BadTreeShape));
        assert_eq!(build_complete_ltree(&[0], 2, 2, 4, 3, 50), Err(PatternError::TooLarge(50)));
    }

    #[test]
    fn unsatisfiable_triangle_has_low_quality() {
        let inst = triangle();
        let mut q = QualityEngine::new(&inst, 2).unwrap();
        // 0 ≠ 1 is satisfied, but no value for x2 completes the triangle
        assert!(q.face_has_quality(&[(0, 0), (1, 1)], 1).unwrap());
        assert!(!q.face_has_quality(&[(0, 0), (1, 1)], 2).unwrap());
        assert!(!q.face_has_quality(&[(0, 0), (1, 0)], 1).unwrap());
        for d in 1..=3 {
            let phi = PartialAssignment::from_bindings(&inst, [(0, 0), (1, 1)]).unwrap();
            assert_eq!(quality(&inst, 2, &phi, d).unwrap(), quality_by_tree(&inst, 2, &phi, d, 100_000).unwrap());
        }
    }

    #[test]
    fn enforced_even_cycle_has_full_quality() {
        let mut inst = Instance::uniform(4, 2);
        for (a, b) in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            inst.add_constraint(&[a, b], ne2()).unwrap();
        }
        let res = enforce_kl(&inst, 2, 3).unwrap();
        assert_eq!(res.status, Status::Enforced);
        let enforced = res.instance.unwrap().with_full_small_constraints(2).unwrap();
        let mut q = QualityEngine::new(&enforced, 2).unwrap();
        for (scope, rel) in enforced.constraints() {
            for t in rel.iter() {
                let face: Vec<(usize, Elem)> = scope.iter().copied().zip(t.iter().copied()).collect();
                for d in 1..=4 {
                    assert!(q.face_has_quality(&face, d).unwrap());
                }
            }
        }
        let s = least_sufficient_quality(&enforced, 2, 4, SolverLimits::default()).unwrap();
        assert_eq!(s.least_d, Some(1));
    }

    #[test]
    fn weak_instance_required() {
        let mut inst = Instance::uniform(3, 2);
        inst.add_constraint(&[0, 1], ne2()).unwrap();
        inst.add_constraint(&[0], Relation::new(vec![2], [vec![0]]).unwrap()).unwrap();
        assert!(matches!(QualityEngine::new(&inst, 2), Err(PatternError::NotWeak(2))));
    }
}
