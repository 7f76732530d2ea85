//! Semi-naive fixed-point closure of a generating set under coordinate-wise operations.
//!
//! Coordinate `c` is interpreted in `sorts[c]`; all sorts share one signature. Coordinates
//! whose generator columns coincide (and whose sorts coincide) always carry equal values, so
//! the engine works on one representative per class and callers see the class map.

use rustc_hash::FxHashMap;

use super::{Algebra, AlgebraError, Term};
use crate::relation::{Elem, Tuple};

/// Resource bound for a closure run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosureLimits {
    pub max_tuples: usize,
}

impl Default for ClosureLimits {
    fn default() -> Self {
        ClosureLimits { max_tuples: 2_000_000 }
    }
}

/// How a tuple first entered the closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Derivation {
    Generator(usize),
    Apply { op: usize, args: Vec<u32> },
}

#[derive(Clone, Debug)]
pub(crate) struct ClosureRun {
    /// Reduced tuples in discovery order.
    pub tuples: Vec<Tuple>,
    pub derivations: Option<Vec<Derivation>>,
    /// Full coordinate → reduced coordinate.
    pub col_map: Vec<usize>,
    /// False when the tuple limit stopped the run.
    pub complete: bool,
    /// Index of the tuple that satisfied the stop predicate.
    pub stopped_at: Option<usize>,
}

impl ClosureRun {
    pub fn expand(&self, reduced: &[Elem]) -> Tuple {
        self.col_map.iter().map(|&c| reduced[c]).collect()
    }

    /// The first-derivation term of tuple `idx` over the generator list.
    pub fn term(&self, alg: &Algebra, idx: usize) -> Option<Term> {
        let ders = self.derivations.as_ref()?;
        let mut memo: FxHashMap<usize, Term> = FxHashMap::default();
        Some(build_term(alg, ders, idx, &mut memo))
    }
}

pub(crate) fn reduce_with(col_map: &[usize], width: usize, full: &[Elem]) -> Option<Tuple> {
    let mut out: Vec<Option<Elem>> = vec![None; width];
    for (c, &r) in col_map.iter().enumerate() {
        match out[r] {
            None => out[r] = Some(full[c]),
            Some(v) if v != full[c] => return None,
            _ => {}
        }
    }
    out.into_iter().collect()
}

fn build_term(alg: &Algebra, ders: &[Derivation], idx: usize, memo: &mut FxHashMap<usize, Term>) -> Term {
    if let Some(t) = memo.get(&idx) {
        return t.clone();
    }
    let t = match &ders[idx] {
        Derivation::Generator(j) => Term::Leaf(*j),
        Derivation::Apply { op, args } => {
            let children = args.iter().map(|&a| build_term(alg, ders, a as usize, memo)).collect();
            Term::Node(alg.operations()[*op].name().to_string(), children)
        }
    };
    memo.insert(idx, t.clone());
    t
}

/// Closes `gens` under all basic operations. `stop` sees each newly found reduced tuple
/// together with the column map and may end the run early.
pub(crate) fn close(
    sorts: &[&Algebra],
    gens: &[Tuple],
    with_derivations: bool,
    limits: ClosureLimits,
    mut stop: impl FnMut(&[Elem], &[usize]) -> bool,
) -> Result<ClosureRun, AlgebraError> {
    let width_full = sorts.len();
    if gens.is_empty() || gens.iter().any(|g| g.len() != width_full) {
        return Err(AlgebraError::BadGenerators);
    }
    let base = sorts.first().copied();
    if let Some(base) = base {
        if sorts.iter().any(|s| !s.same_signature(base)) {
            return Err(AlgebraError::SignatureMismatch);
        }
    }
    for g in gens {
        for (c, &v) in g.iter().enumerate() {
            if v as usize >= sorts[c].domain() {
                return Err(AlgebraError::ArgumentOutOfCarrier { value: v, domain: sorts[c].domain() });
            }
        }
    }

    // merge coordinates with identical sort and generator column
    let mut col_map = Vec::with_capacity(width_full);
    let mut reps: Vec<usize> = Vec::new();
    let mut seen: FxHashMap<(usize, Vec<Elem>), usize> = FxHashMap::default();
    let mut sort_ids: Vec<&Algebra> = Vec::new();
    for c in 0..width_full {
        let sid = match sort_ids.iter().position(|s| std::ptr::eq(*s, sorts[c]) || **s == *sorts[c]) {
            Some(i) => i,
            None => {
                sort_ids.push(sorts[c]);
                sort_ids.len() - 1
            }
        };
        let column: Vec<Elem> = gens.iter().map(|g| g[c]).collect();
        let r = *seen.entry((sid, column)).or_insert_with(|| {
            reps.push(c);
            reps.len() - 1
        });
        col_map.push(r);
    }
    let width = reps.len();
    let red_sorts: Vec<&Algebra> = reps.iter().map(|&c| sorts[c]).collect();
    let domains: Vec<usize> = red_sorts.iter().map(|s| s.domain()).collect();

    let mut run = ClosureRun {
        tuples: Vec::new(),
        derivations: with_derivations.then(Vec::new),
        col_map,
        complete: true,
        stopped_at: None,
    };
    let mut index: FxHashMap<Tuple, u32> = FxHashMap::default();

    for (j, g) in gens.iter().enumerate() {
        let red: Tuple = reps.iter().map(|&c| g[c]).collect();
        if index.contains_key(&red) {
            continue;
        }
        index.insert(red.clone(), run.tuples.len() as u32);
        let hit = stop(&red, &run.col_map);
        run.tuples.push(red);
        if let Some(d) = run.derivations.as_mut() {
            d.push(Derivation::Generator(j));
        }
        if hit {
            run.stopped_at = Some(run.tuples.len() - 1);
            return Ok(run);
        }
    }
    let Some(base) = base else {
        return Ok(run);
    };

    let ops: Vec<OpPlan> = (0..base.operations().len())
        .map(|op| OpPlan {
            op,
            arity: base.operations()[op].arity(),
            symmetric: red_sorts.iter().all(|s| s.is_symmetric(op)),
            tables: red_sorts.iter().map(|s| s.operations()[op].table()).collect(),
        })
        .collect();

    let mut old = 0usize;
    loop {
        let cur = run.tuples.len();
        if old == cur {
            break;
        }
        for plan in &ops {
            let mut pending: Vec<(Tuple, Vec<u32>)> = Vec::new();
            let mut hit = false;
            let mut over = false;
            let base_len = run.tuples.len();
            let mut walker = Walker {
                plan,
                tuples: &run.tuples,
                domains: &domains,
                width,
                old,
                cur,
                acc: vec![vec![0usize; width]; plan.arity + 1],
                choice: vec![0u32; plan.arity],
                scratch: vec![0 as Elem; width],
            };
            let col_map = &run.col_map;
            walker.walk(0, 0, false, &mut |result: &[Elem], choice: &[u32]| {
                if index.contains_key(result) {
                    return Flow::Continue;
                }
                index.insert(result.to_vec(), (base_len + pending.len()) as u32);
                pending.push((result.to_vec(), choice.to_vec()));
                if stop(result, col_map) {
                    hit = true;
                    return Flow::Stop;
                }
                if base_len + pending.len() > limits.max_tuples {
                    over = true;
                    return Flow::Stop;
                }
                Flow::Continue
            });
            for (t, args) in pending {
                run.tuples.push(t);
                if let Some(d) = run.derivations.as_mut() {
                    d.push(Derivation::Apply { op: plan.op, args });
                }
            }
            if hit {
                run.stopped_at = Some(run.tuples.len() - 1);
                return Ok(run);
            }
            if over {
                run.complete = false;
                return Ok(run);
            }
        }
        old = cur;
    }
    Ok(run)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

struct OpPlan<'a> {
    op: usize,
    arity: usize,
    symmetric: bool,
    tables: Vec<&'a [Elem]>,
}

// Enumerates argument choices from tuples[0..cur) with at least one index in [old, cur).
// Symmetric operations only see non-decreasing choices, so the last index is the largest.
struct Walker<'a, 'p> {
    plan: &'p OpPlan<'a>,
    tuples: &'p [Tuple],
    domains: &'p [usize],
    width: usize,
    old: usize,
    cur: usize,
    acc: Vec<Vec<usize>>,
    choice: Vec<u32>,
    scratch: Vec<Elem>,
}

impl Walker<'_, '_> {
    fn walk(&mut self, depth: usize, lo: usize, has_new: bool, emit: &mut impl FnMut(&[Elem], &[u32]) -> Flow) -> Flow {
        if depth == self.plan.arity {
            let acc = &self.acc[depth];
            for c in 0..self.width {
                self.scratch[c] = self.plan.tables[c][acc[c]];
            }
            return emit(&self.scratch, &self.choice);
        }
        let last = depth + 1 == self.plan.arity;
        let mut start = if self.plan.symmetric { lo } else { 0 };
        if last && (!has_new || self.plan.symmetric) {
            start = start.max(self.old);
        }
        for i in start..self.cur {
            self.choice[depth] = i as u32;
            let (head, tail) = self.acc.split_at_mut(depth + 1);
            let prev = &head[depth];
            let next = &mut tail[0];
            let t = &self.tuples[i];
            for c in 0..self.width {
                next[c] = prev[c] * self.domains[c] + t[c] as usize;
            }
            if self.walk(depth + 1, i, has_new || i >= self.old, emit) == Flow::Stop {
                return Flow::Stop;
            }
        }
        Flow::Continue
    }
}
