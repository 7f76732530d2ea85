//! Exhaustive backtracking: solutions, extension of partial assignments, sensitivity and the
//! extension property.
//!
//! Variables are branched on smallest domain first, ties broken by index. A constraint is
//! checked as soon as its last variable in that order is assigned.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::instance::{Instance, PartialAssignment};
use crate::relation::{mixed_radix_index, product_size, Elem, Relation, Tuple, MAX_DENSE_CELLS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("search exceeded the limit of {limit} {what}")]
    ResourceExhausted { what: &'static str, limit: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SolverLimits {
    pub max_nodes: u64,
    pub max_partials: u64,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits { max_nodes: 200_000_000, max_partials: 20_000_000 }
    }
}

enum Table<'a> {
    Dense(Vec<bool>),
    Sparse(&'a Relation),
}

struct Compiled<'a> {
    scope: Vec<usize>,
    domains: Vec<usize>,
    table: Table<'a>,
}

impl Compiled<'_> {
    fn admits(&self, values: &[Elem]) -> bool {
        match &self.table {
            Table::Dense(bits) => bits[mixed_radix_index(&self.domains, values)],
            Table::Sparse(r) => r.contains(values),
        }
    }
}

/// A compiled instance ready for repeated searches.
pub struct Solver<'a> {
    inst: &'a Instance,
    constraints: Vec<Compiled<'a>>,
    order: Vec<usize>,
    /// Constraints completed when position `p` of the order is assigned.
    check_at: Vec<Vec<usize>>,
    /// Nullary constraints; any empty one makes the instance unsatisfiable.
    blocked: bool,
    limits: SolverLimits,
    nodes: Cell<u64>,
}

#[derive(PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

impl<'a> Solver<'a> {
    pub fn new(inst: &'a Instance, limits: SolverLimits) -> Self {
        let n = inst.num_vars();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (inst.domain(v), v));
        let mut pos = vec![0usize; n];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }
        let mut constraints = Vec::new();
        let mut check_at = vec![Vec::new(); n];
        let mut blocked = false;
        for (scope, rel) in inst.constraints() {
            if scope.is_empty() {
                blocked |= rel.is_empty();
                continue;
            }
            let domains = rel.domains().to_vec();
            let table = match product_size(&domains) {
                Some(size) if size <= MAX_DENSE_CELLS => {
                    let mut bits = vec![false; size];
                    for t in rel.iter() {
                        bits[mixed_radix_index(&domains, t)] = true;
                    }
                    Table::Dense(bits)
                }
                _ => Table::Sparse(rel),
            };
            let last = scope.iter().map(|&v| pos[v]).max().unwrap();
            check_at[last].push(constraints.len());
            constraints.push(Compiled { scope: scope.to_vec(), domains, table });
        }
        Solver { inst, constraints, order, check_at, blocked, limits, nodes: Cell::new(0) }
    }

    pub fn nodes_explored(&self) -> u64 {
        self.nodes.get()
    }

    fn search(
        &self,
        depth: usize,
        assign: &mut Vec<Elem>,
        fixed: &[Option<Elem>],
        scratch: &mut Vec<Elem>,
        on_solution: &mut dyn FnMut(&[Elem]) -> Flow,
    ) -> Result<Flow, SolverError> {
        if depth == self.order.len() {
            return Ok(on_solution(assign));
        }
        let v = self.order[depth];
        let values: Box<dyn Iterator<Item = Elem>> = match fixed[v] {
            Some(a) => Box::new(std::iter::once(a)),
            None => Box::new(0..self.inst.domain(v) as Elem),
        };
        for a in values {
            let count = self.nodes.get() + 1;
            if count > self.limits.max_nodes {
                return Err(SolverError::ResourceExhausted { what: "search nodes", limit: self.limits.max_nodes });
            }
            self.nodes.set(count);
            assign[v] = a;
            let ok = self.check_at[depth].iter().all(|&c| {
                let con = &self.constraints[c];
                scratch.clear();
                scratch.extend(con.scope.iter().map(|&u| assign[u]));
                con.admits(scratch)
            });
            if ok && self.search(depth + 1, assign, fixed, scratch, on_solution)? == Flow::Stop {
                return Ok(Flow::Stop);
            }
        }
        Ok(Flow::Continue)
    }

    fn run(&self, fixed: &[Option<Elem>], on_solution: &mut dyn FnMut(&[Elem]) -> Flow) -> Result<(), SolverError> {
        if self.blocked {
            return Ok(());
        }
        let mut assign = vec![0 as Elem; self.order.len()];
        let mut scratch = Vec::new();
        self.search(0, &mut assign, fixed, &mut scratch, on_solution)?;
        Ok(())
    }

    /// All solutions, or the first `limit` of them, in lexicographic order.
    pub fn solutions(&self, limit: Option<usize>) -> Result<Vec<Tuple>, SolverError> {
        let lex = self.order.iter().enumerate().all(|(p, &v)| p == v);
        let mut out = Vec::new();
        let free = vec![None; self.order.len()];
        self.run(&free, &mut |s| {
            out.push(s.to_vec());
            if lex && limit.is_some_and(|l| out.len() >= l) {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })?;
        out.sort();
        if let Some(l) = limit {
            out.truncate(l);
        }
        Ok(out)
    }

    pub fn count(&self) -> Result<u64, SolverError> {
        let mut c = 0u64;
        let free = vec![None; self.order.len()];
        self.run(&free, &mut |_| {
            c += 1;
            Flow::Continue
        })?;
        Ok(c)
    }

    /// Whether some solution agrees with `fixed` on its bound variables.
    pub fn extends(&self, fixed: &[Option<Elem>]) -> Result<bool, SolverError> {
        let mut found = false;
        self.run(fixed, &mut |_| {
            found = true;
            Flow::Stop
        })?;
        Ok(found)
    }
}

pub fn enumerate_solutions(inst: &Instance, limit: Option<usize>) -> Result<Vec<Tuple>, SolverError> {
    Solver::new(inst, SolverLimits::default()).solutions(limit)
}

pub fn extends_to_solution(inst: &Instance, partial: &PartialAssignment) -> Result<bool, SolverError> {
    Solver::new(inst, SolverLimits::default()).extends(&partial.to_vec(inst.num_vars()))
}

/// A constraint tuple used as evidence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TupleWitness {
    pub scope: Vec<usize>,
    pub tuple: Tuple,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SensitivityReport {
    pub holds: bool,
    pub witness: Option<TupleWitness>,
    pub nodes_explored: u64,
}

/// Every tuple of every constraint extends to a solution. Checked against the projections
/// of the full solution set.
pub fn is_sensitive(inst: &Instance) -> Result<SensitivityReport, SolverError> {
    is_sensitive_with(inst, SolverLimits::default())
}

pub fn is_sensitive_with(inst: &Instance, limits: SolverLimits) -> Result<SensitivityReport, SolverError> {
    let solver = Solver::new(inst, limits);
    let sols = solver.solutions(None)?;
    for (scope, rel) in inst.constraints() {
        let proj: HashSet<Tuple> = sols.iter().map(|s| scope.iter().map(|&v| s[v]).collect()).collect();
        if let Some(t) = rel.iter().find(|t| !proj.contains(*t)) {
            return Ok(SensitivityReport {
                holds: false,
                witness: Some(TupleWitness { scope: scope.to_vec(), tuple: t.clone() }),
                nodes_explored: solver.nodes_explored(),
            });
        }
    }
    Ok(SensitivityReport { holds: true, witness: None, nodes_explored: solver.nodes_explored() })
}

/// The removal phrasing: deleting any single tuple from any constraint loses a solution.
pub fn is_sensitive_by_removal(inst: &Instance) -> Result<SensitivityReport, SolverError> {
    let limits = SolverLimits::default();
    let base = Solver::new(inst, limits);
    let total = base.count()?;
    let mut nodes = base.nodes_explored();
    for (scope, rel) in inst.constraints() {
        for t in rel.iter() {
            let mut smaller = rel.clone();
            smaller.retain(|u| u != t);
            let mut reduced = inst.clone();
            reduced.set_relation(scope, smaller);
            let s = Solver::new(&reduced, limits);
            let c = s.count()?;
            nodes += s.nodes_explored();
            if c == total {
                return Ok(SensitivityReport {
                    holds: false,
                    witness: Some(TupleWitness { scope: scope.to_vec(), tuple: t.clone() }),
                    nodes_explored: nodes,
                });
            }
        }
    }
    Ok(SensitivityReport { holds: true, witness: None, nodes_explored: nodes })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtensionReport {
    pub holds: bool,
    /// A partial solution of minimum support that does not extend.
    pub witness: Option<Vec<(usize, Elem)>>,
    pub partials_checked: u64,
    pub nodes_explored: u64,
}

/// Every partial solution extends to a solution. Partial solutions are generated by support
/// size; a partial solution's restrictions are partial solutions, so each level is built from
/// the previous one.
pub fn has_extension_property(inst: &Instance) -> Result<ExtensionReport, SolverError> {
    has_extension_property_with(inst, SolverLimits::default())
}

pub fn has_extension_property_with(inst: &Instance, limits: SolverLimits) -> Result<ExtensionReport, SolverError> {
    let n = inst.num_vars();
    let solver = Solver::new(inst, limits);
    let sols = solver.solutions(None)?;
    let mut proj_cache: HashMap<Vec<usize>, HashSet<Vec<Elem>>> = HashMap::new();
    let mut checked = 0u64;

    // constraints grouped by their largest variable
    let mut by_max: Vec<Vec<(&[usize], &Relation)>> = vec![Vec::new(); n];
    let mut nullary_ok = true;
    for (scope, rel) in inst.constraints() {
        match scope.last() {
            Some(&m) => by_max[m].push((scope, rel)),
            None => nullary_ok &= !rel.is_empty(),
        }
    }

    // level entries: (support in increasing order, values)
    let mut level: Vec<(Vec<usize>, Vec<Elem>)> = if nullary_ok { vec![(Vec::new(), Vec::new())] } else { Vec::new() };
    let mut dense = vec![None; n];
    while !level.is_empty() {
        let mut next = Vec::new();
        for (support, values) in &level {
            checked += 1;
            if checked > limits.max_partials {
                return Err(SolverError::ResourceExhausted { what: "partial solutions", limit: limits.max_partials });
            }
            let proj = proj_cache
                .entry(support.clone())
                .or_insert_with(|| sols.iter().map(|s| support.iter().map(|&v| s[v]).collect()).collect());
            if !proj.contains(values) {
                return Ok(ExtensionReport {
                    holds: false,
                    witness: Some(support.iter().copied().zip(values.iter().copied()).collect()),
                    partials_checked: checked,
                    nodes_explored: solver.nodes_explored(),
                });
            }
            for (&v, &a) in support.iter().zip(values) {
                dense[v] = Some(a);
            }
            let start = support.last().map_or(0, |&m| m + 1);
            for v in start..n {
                for a in 0..inst.domain(v) as Elem {
                    dense[v] = Some(a);
                    let ok = by_max[v].iter().all(|(scope, rel)| {
                        let t: Option<Tuple> = scope.iter().map(|&u| dense[u]).collect();
                        t.is_none_or(|t| rel.contains(&t))
                    });
                    if ok {
                        let mut s = support.clone();
                        s.push(v);
                        let mut vals = values.clone();
                        vals.push(a);
                        next.push((s, vals));
                    }
                }
                dense[v] = None;
            }
            for &v in support {
                dense[v] = None;
            }
        }
        level = next;
    }
    Ok(ExtensionReport { holds: true, witness: None, partials_checked: checked, nodes_explored: solver.nodes_explored() })
}
