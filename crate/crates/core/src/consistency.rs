//! The (k,l)-consistency algorithm and the (k,l)-instance predicate.
//!
//! On instances with fewer than `l` variables the single window is the whole variable set, and
//! with fewer than `k` variables the constraint width drops to the number of variables.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::instance::{Instance, InstanceError};
use crate::relation::{mixed_radix_index, DenseRelation, Elem, RelationError};
use crate::solver::{Solver, SolverError, SolverLimits};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsistencyError {
    #[error("need 1 <= k < l, got k = {k}, l = {l}")]
    BadWidth { k: usize, l: usize },
    #[error("constraint of arity {arity} exceeds k = {k}")]
    ArityTooLarge { arity: usize, k: usize },
    #[error("the instance is not {0}-uniform")]
    NotUniform(usize),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Enforced,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyResult {
    pub status: Status,
    /// The k-uniform fixed point; present iff `status` is `Enforced`.
    pub instance: Option<Instance>,
    /// Rounds run, the last one (which changes nothing, unless rejecting) included.
    pub rounds: usize,
    /// Tuples deleted from the completed instance.
    pub removed: usize,
}

/// Deletion scheduling. Both reach the same greatest fixed point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Windows see the relations of the previous round; windows may run in parallel.
    #[default]
    Jacobi,
    /// Deletions take effect immediately, windows in lexicographic order.
    GaussSeidel,
}

pub fn enforce_kl(inst: &Instance, k: usize, l: usize) -> Result<ConsistencyResult, ConsistencyError> {
    enforce_kl_with(inst, k, l, Schedule::Jacobi)
}

/// Completes `inst` to a k-uniform instance: every k-set gets the tuples over its domains
/// that satisfy all constraints inside it.
pub fn complete_k_uniform(inst: &Instance, k: usize) -> Result<Instance, ConsistencyError> {
    let n = inst.num_vars();
    let k = k.min(n);
    for (scope, _) in inst.constraints() {
        if scope.len() > k {
            return Err(ConsistencyError::ArityTooLarge { arity: scope.len(), k });
        }
    }
    let mut out = Instance::with_variables(inst.variables().iter().map(|v| (v.name.clone(), v.domain)))?;
    let cons: Vec<(&[usize], &crate::relation::Relation)> = inst.constraints().collect();
    for scope in (0..n).combinations(k) {
        let mut dense = DenseRelation::full(&inst.domains_of(&scope))?;
        for (cs, rel) in &cons {
            if !cs.iter().all(|v| scope.contains(v)) {
                continue;
            }
            let pos: Vec<usize> = cs.iter().map(|v| scope.binary_search(v).unwrap()).collect();
            let mut sub = Vec::with_capacity(pos.len());
            let domains = dense.domains.clone();
            for (cell, t) in crate::relation::ProductIter::new(&domains).enumerate() {
                if dense.bits[cell] {
                    sub.clear();
                    sub.extend(pos.iter().map(|&p| t[p]));
                    dense.bits[cell] = rel.contains(&sub);
                }
            }
        }
        out.add_constraint(&scope, dense.to_relation())?;
    }
    Ok(out)
}

struct Window {
    vars: Vec<usize>,
    /// (constraint index, positions of its scope inside `vars`)
    members: Vec<(usize, Vec<usize>)>,
}

pub fn enforce_kl_with(
    inst: &Instance,
    k: usize,
    l: usize,
    schedule: Schedule,
) -> Result<ConsistencyResult, ConsistencyError> {
    if k == 0 || k >= l {
        return Err(ConsistencyError::BadWidth { k, l });
    }
    let completed = complete_k_uniform(inst, k)?;
    let n = completed.num_vars();
    let w = l.min(n);

    let scopes: Vec<Vec<usize>> = completed.constraints().map(|(s, _)| s.to_vec()).collect();
    let mut rels: Vec<DenseRelation> =
        completed.constraints().map(|(_, r)| DenseRelation::from_relation(r)).collect::<Result<_, _>>()?;
    let initial: usize = rels.iter().map(DenseRelation::count).sum();

    let windows: Vec<Window> = (0..n)
        .combinations(w)
        .map(|vars| {
            let members = scopes
                .iter()
                .enumerate()
                .filter(|(_, s)| s.iter().all(|v| vars.contains(v)))
                .map(|(i, s)| (i, s.iter().map(|v| vars.binary_search(v).unwrap()).collect()))
                .collect();
            Window { vars, members }
        })
        .collect();

    let domains = completed.domains();
    let mut rounds = 0;
    let mut rejected = rels.iter().any(|r| r.count() == 0);
    while !rejected {
        rounds += 1;
        let changed = match schedule {
            Schedule::Jacobi => {
                let supports: Vec<Vec<(usize, Vec<bool>)>> =
                    windows.par_iter().map(|win| window_support(win, &rels, &domains)).collect();
                let mut next: Vec<Vec<bool>> = rels.iter().map(|r| r.bits.clone()).collect();
                for per_window in supports {
                    for (c, supp) in per_window {
                        for (bit, s) in next[c].iter_mut().zip(supp) {
                            *bit &= s;
                        }
                    }
                }
                let mut changed = false;
                for (r, bits) in rels.iter_mut().zip(next) {
                    if r.bits != bits {
                        changed = true;
                        r.bits = bits;
                    }
                }
                changed
            }
            Schedule::GaussSeidel => {
                let mut changed = false;
                for win in &windows {
                    for (c, supp) in window_support(win, &rels, &domains) {
                        for (bit, s) in rels[c].bits.iter_mut().zip(supp) {
                            if *bit && !s {
                                *bit = false;
                                changed = true;
                            }
                        }
                    }
                }
                changed
            }
        };
        rejected = rels.iter().any(|r| r.count() == 0);
        if !changed {
            break;
        }
    }
    let remaining: usize = rels.iter().map(DenseRelation::count).sum();
    let removed = initial - remaining;
    if rejected {
        return Ok(ConsistencyResult { status: Status::Reject, instance: None, rounds, removed });
    }
    let mut out = completed;
    for (scope, r) in scopes.iter().zip(&rels) {
        out.set_relation(scope, r.to_relation());
    }
    Ok(ConsistencyResult { status: Status::Enforced, instance: Some(out), rounds, removed })
}

/// For each constraint inside the window, the tuples that extend to a solution of the window.
fn window_support(win: &Window, rels: &[DenseRelation], domains: &[usize]) -> Vec<(usize, Vec<bool>)> {
    let wd: Vec<usize> = win.vars.iter().map(|&v| domains[v]).collect();
    let mut supp: Vec<(usize, Vec<bool>)> =
        win.members.iter().map(|(c, _)| (*c, vec![false; rels[*c].bits.len()])).collect();
    // constraints completed at each position of the window
    let mut check_at: Vec<Vec<usize>> = vec![Vec::new(); win.vars.len()];
    for (m, (_, pos)) in win.members.iter().enumerate() {
        if let Some(&last) = pos.iter().max() {
            check_at[last].push(m);
        }
    }
    let mut assign = vec![0 as Elem; win.vars.len()];
    let mut sub = Vec::new();
    extend_window(0, win, rels, &wd, &check_at, &mut assign, &mut sub, &mut supp);
    supp
}

#[allow(clippy::too_many_arguments)]
fn extend_window(
    depth: usize,
    win: &Window,
    rels: &[DenseRelation],
    wd: &[usize],
    check_at: &[Vec<usize>],
    assign: &mut Vec<Elem>,
    sub: &mut Vec<Elem>,
    supp: &mut [(usize, Vec<bool>)],
) {
    if depth == wd.len() {
        for (m, (c, pos)) in win.members.iter().enumerate() {
            sub.clear();
            sub.extend(pos.iter().map(|&p| assign[p]));
            supp[m].1[mixed_radix_index(&rels[*c].domains, sub)] = true;
        }
        return;
    }
    for a in 0..wd[depth] as Elem {
        assign[depth] = a;
        let ok = check_at[depth].iter().all(|&m| {
            let (c, pos) = &win.members[m];
            sub.clear();
            sub.extend(pos.iter().map(|&p| assign[p]));
            rels[*c].contains(sub)
        });
        if ok {
            extend_window(depth + 1, win, rels, wd, check_at, assign, sub, supp);
        }
    }
}

/// Outcome of [`is_kl_instance`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum KlCheck {
    Holds,
    Violated { window: Vec<usize>, scope: Vec<usize>, tuple: Vec<Elem> },
}

impl KlCheck {
    pub fn holds(&self) -> bool {
        matches!(self, KlCheck::Holds)
    }
}

/// Whether every tuple of every constraint inside each `l`-window extends to a solution of the
/// instance restricted to that window. Each window is solved independently.
pub fn is_kl_instance(inst: &Instance, k: usize, l: usize) -> Result<KlCheck, ConsistencyError> {
    let n = inst.num_vars();
    if !inst.is_k_uniform(k.min(n)) {
        return Err(ConsistencyError::NotUniform(k));
    }
    for window in (0..n).combinations(l.min(n)) {
        let sub = inst.restrict(&window);
        let solver = Solver::new(&sub, SolverLimits::default());
        let sols = solver.solutions(None)?;
        for (scope, rel) in sub.constraints() {
            let proj: std::collections::HashSet<Vec<Elem>> =
                sols.iter().map(|s| scope.iter().map(|&v| s[v]).collect()).collect();
            if let Some(t) = rel.iter().find(|t| !proj.contains(*t)) {
                return Ok(KlCheck::Violated {
                    scope: scope.iter().map(|&v| window[v]).collect(),
                    window,
                    tuple: t.clone(),
                });
            }
        }
    }
    Ok(KlCheck::Holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Relation;
    use crate::solver::enumerate_solutions;

    fn neq() -> Relation {
        Relation::new(vec![2, 2], vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    fn cycle(n: usize) -> Instance {
        let mut inst = Instance::uniform(n, 2);
        for i in 0..n {
            inst.add_constraint(&[i, (i + 1) % n], neq()).unwrap();
        }
        inst
    }

    #[test]
    fn triangle_is_rejected() {
        let r = enforce_kl(&cycle(3), 2, 3).unwrap();
        assert_eq!(r.status, Status::Reject);
        assert!(r.instance.is_none());
        match is_kl_instance(&cycle(3), 2, 3).unwrap() {
            KlCheck::Violated { window, .. } => assert_eq!(window, vec![0, 1, 2]),
            KlCheck::Holds => panic!("triangle is not a (2,3)-instance"),
        }
    }

    #[test]
    fn four_cycle_is_enforced() {
        let r = enforce_kl(&cycle(4), 2, 3).unwrap();
        assert_eq!(r.status, Status::Enforced);
        let out = r.instance.unwrap();
        assert!(out.is_k_uniform(2));
        assert!(is_kl_instance(&out, 2, 3).unwrap().holds());
        // the diagonals become equalities
        assert_eq!(out.constraint(&[0, 2]).unwrap(), &Relation::equality(2));
        assert_eq!(enumerate_solutions(&out, None).unwrap(), enumerate_solutions(&cycle(4), None).unwrap());
        let again = enforce_kl(&out, 2, 3).unwrap();
        assert_eq!(again.rounds, 1);
        assert_eq!(again.removed, 0);
        assert_eq!(again.instance.unwrap(), out);
    }

    #[test]
    fn schedules_agree() {
        for n in [5, 6] {
            let a = enforce_kl_with(&cycle(n), 2, 3, Schedule::Jacobi).unwrap();
            let b = enforce_kl_with(&cycle(n), 2, 3, Schedule::GaussSeidel).unwrap();
            assert_eq!(a.status, b.status);
            assert_eq!(a.instance, b.instance);
            if a.status == Status::Enforced {
                assert_eq!(a.removed, b.removed);
            }
        }
    }

    #[test]
    fn width_checks() {
        assert!(matches!(enforce_kl(&cycle(4), 2, 2), Err(ConsistencyError::BadWidth { .. })));
        let mut wide = Instance::uniform(3, 2);
        wide.add_constraint(&[0, 1, 2], Relation::full(vec![2; 3]).unwrap()).unwrap();
        assert!(matches!(enforce_kl(&wide, 2, 3), Err(ConsistencyError::ArityTooLarge { .. })));
        assert!(matches!(is_kl_instance(&cycle(4), 2, 3), Err(ConsistencyError::NotUniform(2))));
    }

    #[test]
    fn small_instances_use_the_whole_set() {
        let mut inst = Instance::uniform(2, 2);
        inst.add_constraint(&[0, 1], Relation::full(vec![2, 2]).unwrap()).unwrap();
        assert!(is_kl_instance(&inst, 2, 5).unwrap().holds());
        let r = enforce_kl(&inst, 2, 5).unwrap();
        assert_eq!(r.status, Status::Enforced);
    }
}
