//! CSP instances with per-variable domains and one constraint per variable set.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{generate_subpower, Algebra, AlgebraError};
use crate::relation::{Elem, ProductIter, Relation, RelationError, Tuple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable index {0} is out of range")]
    VariableIndex(usize),
    #[error("variable `{0}` is declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` appears twice in one scope")]
    RepeatedInScope(String),
    #[error("scope of length {scope} does not match relation arity {arity}")]
    ScopeArity { scope: usize, arity: usize },
    #[error("variable `{var}` has domain {expected}, but the relation uses {found} at that position")]
    DomainMismatch { var: String, expected: usize, found: usize },
    #[error("value {value} is outside the domain of `{var}`")]
    ValueOutOfDomain { var: String, value: Elem },
    #[error("the instance is not {0}-uniform")]
    NotUniform(usize),
    #[error("projections onto {scope:?} from different {k}-supersets disagree")]
    ProjectionDisagreement { scope: Vec<String>, k: usize },
    #[error("all variables must share one domain size for a uniform encoding")]
    MixedDomains,
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain: usize,
}

/// A finite CSP instance. Constraint scopes are sets of variable indices stored in increasing
/// order, each with at most one relation whose coordinates follow that order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Instance {
    variables: Vec<Variable>,
    names: HashMap<String, usize>,
    constraints: BTreeMap<Vec<usize>, Relation>,
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_variables<I, S>(vars: I) -> Result<Self, InstanceError>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut inst = Instance::new();
        for (name, domain) in vars {
            inst.add_variable(name, domain)?;
        }
        Ok(inst)
    }

    /// Variables `v0, …, v(n−1)` over the same domain.
    pub fn uniform(n_vars: usize, domain: usize) -> Self {
        Instance::with_variables((0..n_vars).map(|i| (format!("v{i}"), domain))).expect("distinct names")
    }

    pub fn add_variable(&mut self, name: impl Into<String>, domain: usize) -> Result<usize, InstanceError> {
        let name = name.into();
        if domain == 0 || domain > Elem::MAX as usize + 1 {
            return Err(RelationError::BadDomain(domain).into());
        }
        if self.names.contains_key(&name) {
            return Err(InstanceError::DuplicateVariable(name));
        }
        let idx = self.variables.len();
        self.names.insert(name.clone(), idx);
        self.variables.push(Variable { name, domain });
        Ok(idx)
    }

    /// Adds `relation` on `scope`, intersecting with any constraint already on that set.
    pub fn add_constraint(&mut self, scope: &[usize], relation: Relation) -> Result<(), InstanceError> {
        if scope.len() != relation.arity() {
            return Err(InstanceError::ScopeArity { scope: scope.len(), arity: relation.arity() });
        }
        for (pos, &v) in scope.iter().enumerate() {
            let var = self.variables.get(v).ok_or(InstanceError::VariableIndex(v))?;
            if var.domain != relation.domains()[pos] {
                return Err(InstanceError::DomainMismatch {
                    var: var.name.clone(),
                    expected: var.domain,
                    found: relation.domains()[pos],
                });
            }
        }
        let order: Vec<usize> = (0..scope.len()).sorted_by_key(|&i| scope[i]).collect();
        let sorted: Vec<usize> = order.iter().map(|&i| scope[i]).collect();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(InstanceError::RepeatedInScope(self.variables[w[0]].name.clone()));
        }
        let rel = relation.permute(&order);
        let merged = match self.constraints.remove(&sorted) {
            Some(old) => old.intersect(&rel),
            None => rel,
        };
        self.constraints.insert(sorted, merged);
        Ok(())
    }

    pub fn add_constraint_named(&mut self, scope: &[&str], relation: Relation) -> Result<(), InstanceError> {
        let idx = scope.iter().map(|s| self.var_index(s)).collect::<Result<Vec<_>, _>>()?;
        self.add_constraint(&idx, relation)
    }

    /// Replaces the relation on an existing sorted scope.
    pub(crate) fn set_relation(&mut self, scope: &[usize], relation: Relation) {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        self.constraints.insert(scope.to_vec(), relation);
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn var_index(&self, name: &str) -> Result<usize, InstanceError> {
        self.names.get(name).copied().ok_or_else(|| InstanceError::UnknownVariable(name.to_string()))
    }

    pub fn name(&self, v: usize) -> &str {
        &self.variables[v].name
    }

    pub fn domain(&self, v: usize) -> usize {
        self.variables[v].domain
    }

    pub fn domains(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.domain).collect()
    }

    pub fn domains_of(&self, scope: &[usize]) -> Vec<usize> {
        scope.iter().map(|&v| self.variables[v].domain).collect()
    }

    pub fn constraints(&self) -> impl Iterator<Item = (&[usize], &Relation)> + '_ {
        self.constraints.iter().map(|(s, r)| (s.as_slice(), r))
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// The relation on a sorted scope, if constrained.
    pub fn constraint(&self, scope: &[usize]) -> Option<&Relation> {
        self.constraints.get(scope)
    }

    pub fn has_empty_relation(&self) -> bool {
        self.constraints.values().any(Relation::is_empty)
    }

    /// All constraints are `k`-ary and every `k`-set of variables carries one.
    pub fn is_k_uniform(&self, k: usize) -> bool {
        self.constraints.keys().all(|s| s.len() == k)
            && (k > self.num_vars() || self.constraints.len() == binomial(self.num_vars(), k))
    }

    /// Whether `f` satisfies every constraint whose scope lies inside the assigned part.
    pub fn satisfies(&self, f: &[Option<Elem>]) -> bool {
        self.constraints.iter().all(|(scope, rel)| {
            let vals: Option<Tuple> = scope.iter().map(|&v| f[v]).collect();
            vals.is_none_or(|t| rel.contains(&t))
        })
    }

    /// The sub-instance on `keep` (in the given order) with every constraint inside it.
    pub fn restrict(&self, keep: &[usize]) -> Instance {
        let mut out = Instance::new();
        let mut pos = vec![usize::MAX; self.num_vars()];
        for (i, &v) in keep.iter().enumerate() {
            pos[v] = i;
            out.add_variable(self.variables[v].name.clone(), self.variables[v].domain).expect("distinct");
        }
        for (scope, rel) in &self.constraints {
            if scope.iter().all(|&v| pos[v] != usize::MAX) {
                let mapped: Vec<usize> = scope.iter().map(|&v| pos[v]).collect();
                out.add_constraint(&mapped, rel.clone()).expect("consistent");
            }
        }
        out
    }

    /// True iff for every constraint on `S` and every constrained `S′ ⊆ S`,
    /// `proj_{S′}(R_S) ⊆ R_{S′}`. Constraints of arity above `k` make it false.
    pub fn validate_weak_k(&self, k: usize) -> bool {
        self.constraints.iter().all(|(scope, rel)| {
            scope.len() <= k
                && (0..scope.len()).all(|size| {
                    (0..scope.len()).combinations(size).all(|pos| {
                        let sub: Vec<usize> = pos.iter().map(|&p| scope[p]).collect();
                        self.constraints.get(&sub).is_none_or(|small| rel.project(&pos).is_subset(small))
                    })
                })
        })
    }

    /// Adds, for every set of fewer than `k` variables, the projection of a `k`-ary
    /// constraint containing it. All `k`-supersets must agree on that projection.
    pub fn small_arity_closure(&self, k: usize) -> Result<Instance, InstanceError> {
        if !self.is_k_uniform(k) {
            return Err(InstanceError::NotUniform(k));
        }
        let mut out = self.clone();
        let n = self.num_vars();
        for size in 0..k.min(n + 1) {
            for sub in (0..n).combinations(size) {
                let mut agreed: Option<Relation> = None;
                for (scope, rel) in &self.constraints {
                    if !sub.iter().all(|v| scope.contains(v)) {
                        continue;
                    }
                    let pos: Vec<usize> = sub.iter().map(|v| scope.binary_search(v).unwrap()).collect();
                    let p = rel.project(&pos);
                    match &agreed {
                        None => agreed = Some(p),
                        Some(q) if *q != p => {
                            return Err(InstanceError::ProjectionDisagreement {
                                scope: sub.iter().map(|&v| self.name(v).to_string()).collect(),
                                k,
                            })
                        }
                        _ => {}
                    }
                }
                if let Some(p) = agreed {
                    if size > 0 {
                        out.add_constraint(&sub, p)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Adds a full relation on every unconstrained set of at most `k` variables, which turns a
    /// `k`-uniform instance into a weak `k`-instance without changing its solutions.
    pub fn with_full_small_constraints(&self, k: usize) -> Result<Instance, InstanceError> {
        let mut out = self.clone();
        let n = self.num_vars();
        for size in 1..=k.min(n) {
            for sub in (0..n).combinations(size) {
                if !out.constraints.contains_key(&sub) {
                    out.add_constraint(&sub, Relation::full(self.domains_of(&sub))?)?;
                }
            }
        }
        Ok(out)
    }

    /// Adds a pair variable `y_uv` over `A_u × A_v` for each requested pair, encoding `(a, b)`
    /// as `a·|A_v| + b` and binding it to `(u, v)` through the relation already on `{u, v}`.
    /// With `uniform`, every variable is re-encoded over `A²` (all domains must agree), plain
    /// variables living on the diagonal `{a·n + a}`.
    pub fn square_instance(&self, pairs: &[(usize, usize)], uniform: bool) -> Result<SquaredInstance, InstanceError> {
        for &(u, v) in pairs {
            for w in [u, v] {
                if w >= self.num_vars() {
                    return Err(InstanceError::VariableIndex(w));
                }
            }
        }
        let n = if uniform {
            let d = self.variables.first().map_or(1, |v| v.domain);
            if self.variables.iter().any(|v| v.domain != d) {
                return Err(InstanceError::MixedDomains);
            }
            Some(d)
        } else {
            None
        };
        let diag = |a: Elem| -> Elem {
            let n = n.unwrap();
            (a as usize * n + a as usize) as Elem
        };

        let mut out = Instance::new();
        for var in &self.variables {
            out.add_variable(var.name.clone(), n.map_or(var.domain, |n| n * n))?;
        }
        for (scope, rel) in &self.constraints {
            let rel = match n {
                None => rel.clone(),
                Some(n) => Relation::new(
                    vec![n * n; rel.arity()],
                    rel.iter().map(|t| t.iter().map(|&a| diag(a)).collect::<Tuple>()),
                )?,
            };
            out.add_constraint(scope, rel)?;
        }
        if let Some(n) = n {
            for v in 0..self.num_vars() {
                out.add_constraint(&[v], Relation::new(vec![n * n], (0..n as Elem).map(|a| vec![diag(a)]))?)?;
            }
        }

        let mut pair_vars = Vec::new();
        for &(u, v) in pairs {
            let (du, dv) = (self.domain(u), self.domain(v));
            let y_dom = n.map_or(du * dv, |n| n * n);
            let mut name = format!("y[{},{}]", self.name(u), self.name(v));
            while out.names.contains_key(&name) {
                name.push('\'');
            }
            let y = out.add_variable(name, y_dom)?;
            pair_vars.push(y);
            let allowed: Vec<(Elem, Elem)> = if u == v {
                (0..du as Elem).map(|a| (a, a)).collect()
            } else {
                let (lo, hi) = (u.min(v), u.max(v));
                match self.constraints.get(&vec![lo, hi]) {
                    Some(r) => r.iter().map(|t| if u < v { (t[0], t[1]) } else { (t[1], t[0]) }).collect(),
                    None => ProductIter::new(&[du, dv]).map(|t| (t[0], t[1])).collect(),
                }
            };
            let code = |a: Elem, b: Elem| (a as usize * dv + b as usize) as Elem;
            let enc = |a: Elem| n.map_or(a, |_| diag(a));
            let u_dom = out.domain(u);
            let v_dom = out.domain(v);
            let bind_u = Relation::new(vec![u_dom, y_dom], allowed.iter().map(|&(a, b)| vec![enc(a), code(a, b)]))?;
            out.add_constraint(&[u, y], bind_u)?;
            if u != v {
                let bind_v =
                    Relation::new(vec![v_dom, y_dom], allowed.iter().map(|&(a, b)| vec![enc(b), code(a, b)]))?;
                out.add_constraint(&[v, y], bind_v)?;
            }
        }
        Ok(SquaredInstance { instance: out, pair_vars })
    }
}

/// Output of [`Instance::square_instance`]: original variables keep their indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquaredInstance {
    pub instance: Instance,
    pub pair_vars: Vec<usize>,
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// A partial assignment of values to variable indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialAssignment {
    bindings: BTreeMap<usize, Elem>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates every binding against the domains of `inst`.
    pub fn from_bindings(
        inst: &Instance,
        bindings: impl IntoIterator<Item = (usize, Elem)>,
    ) -> Result<Self, InstanceError> {
        let mut out = PartialAssignment::new();
        for (v, a) in bindings {
            out.bind(inst, v, a)?;
        }
        Ok(out)
    }

    pub fn from_names(inst: &Instance, names: &[&str], values: &[Elem]) -> Result<Self, InstanceError> {
        if names.len() != values.len() {
            return Err(InstanceError::ScopeArity { scope: names.len(), arity: values.len() });
        }
        let idx = names.iter().map(|n| inst.var_index(n)).collect::<Result<Vec<_>, _>>()?;
        Self::from_bindings(inst, idx.into_iter().zip(values.iter().copied()))
    }

    pub fn bind(&mut self, inst: &Instance, v: usize, a: Elem) -> Result<(), InstanceError> {
        let var = inst.variables.get(v).ok_or(InstanceError::VariableIndex(v))?;
        if a as usize >= var.domain {
            return Err(InstanceError::ValueOutOfDomain { var: var.name.clone(), value: a });
        }
        self.bindings.insert(v, a);
        Ok(())
    }

    pub fn get(&self, v: usize) -> Option<Elem> {
        self.bindings.get(&v).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Elem)> + '_ {
        self.bindings.iter().map(|(&v, &a)| (v, a))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Dense view with `None` for unbound variables.
    pub fn to_vec(&self, n_vars: usize) -> Vec<Option<Elem>> {
        let mut out = vec![None; n_vars];
        for (&v, &a) in &self.bindings {
            out[v] = Some(a);
        }
        out
    }
}

/// Settings for [`random_instance`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomConfig {
    /// Each relation is generated by between 1 and this many random tuples.
    pub max_generators: usize,
    /// When set, relations are drawn from this list instead.
    pub allowed: Option<Vec<Relation>>,
    /// Draw a random assignment first and add its projection to every generated relation, so
    /// the instance has a solution. Ignored when `allowed` is set.
    pub plant_solution: bool,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig { max_generators: 4, allowed: None, plant_solution: false }
    }
}

/// A `k`-uniform instance on `n_vars` variables over the carrier of `alg` whose relations
/// are subpowers of `alg`. The same seed always yields the same instance.
pub fn random_instance(
    alg: &Algebra,
    cfg: &RandomConfig,
    n_vars: usize,
    k: usize,
    seed: u64,
) -> Result<Instance, InstanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = alg.domain();
    let mut inst = Instance::uniform(n_vars, n);
    if k == 0 {
        return Ok(inst);
    }
    let planted: Option<Tuple> = cfg.plant_solution.then(|| (0..n_vars).map(|_| rng.gen_range(0..n) as Elem).collect());
    for scope in (0..n_vars).combinations(k) {
        let rel = match &cfg.allowed {
            Some(list) if !list.is_empty() => list[rng.gen_range(0..list.len())].clone(),
            _ => {
                let count = rng.gen_range(1..=cfg.max_generators.max(1));
                let mut gens: Vec<Tuple> =
                    (0..count).map(|_| (0..k).map(|_| rng.gen_range(0..n) as Elem).collect()).collect();
                if let Some(p) = &planted {
                    gens.push(scope.iter().map(|&v| p[v]).collect());
                }
                generate_subpower(alg, &gens, false)?.relation
            }
        };
        inst.add_constraint(&scope, rel)?;
    }
    Ok(inst)
}

#[derive(Serialize, Deserialize)]
struct ConstraintFile {
    scope: Vec<String>,
    tuples: Vec<Tuple>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    variables: Vec<Variable>,
    constraints: Vec<ConstraintFile>,
}

impl Instance {
    fn from_file(file: InstanceFile) -> Result<Self, InstanceError> {
        let mut inst = Instance::new();
        for v in file.variables {
            inst.add_variable(v.name, v.domain)?;
        }
        for c in file.constraints {
            let scope = c.scope.iter().map(|s| inst.var_index(s)).collect::<Result<Vec<_>, _>>()?;
            let rel = Relation::new(inst.domains_of(&scope), c.tuples)?;
            inst.add_constraint(&scope, rel)?;
        }
        Ok(inst)
    }
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        InstanceFile {
            variables: self.variables.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|(scope, rel)| ConstraintFile {
                    scope: scope.iter().map(|&v| self.name(v).to_string()).collect(),
                    tuples: rel.iter().cloned().collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Instance::from_file(InstanceFile::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras;

    fn neq() -> Relation {
        Relation::new(vec![2, 2], vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    fn triangle() -> Instance {
        let mut inst = Instance::uniform(3, 2);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            inst.add_constraint(&[a, b], neq()).unwrap();
        }
        inst
    }

    #[test]
    fn scopes_are_canonical() {
        let mut inst = Instance::uniform(2, 3);
        let r = Relation::new(vec![3, 3], vec![vec![0, 2], vec![1, 1]]).unwrap();
        inst.add_constraint(&[1, 0], r).unwrap();
        let stored = inst.constraint(&[0, 1]).unwrap();
        assert!(stored.contains(&[2, 0]));
        let again = Relation::new(vec![3, 3], vec![vec![2, 0]]).unwrap();
        inst.add_constraint(&[0, 1], again).unwrap();
        assert_eq!(inst.num_constraints(), 1);
        assert_eq!(inst.constraint(&[0, 1]).unwrap().len(), 1);
        assert!(matches!(inst.add_constraint(&[0, 0], neq()), Err(InstanceError::DomainMismatch { .. })));
        let rep = Relation::full(vec![3, 3]).unwrap();
        assert!(matches!(inst.add_constraint(&[1, 1], rep), Err(InstanceError::RepeatedInScope(_))));
    }

    #[test]
    fn weak_k_checks() {
        let mut inst = Instance::uniform(2, 2);
        assert!(inst.validate_weak_k(2));
        inst.add_constraint(&[0, 1], Relation::new(vec![2, 2], vec![vec![0, 1]]).unwrap()).unwrap();
        let closed = inst.small_arity_closure(2).unwrap();
        assert!(closed.validate_weak_k(2));
        inst.add_constraint(&[1], Relation::new(vec![2], vec![vec![0]]).unwrap()).unwrap();
        assert!(!inst.validate_weak_k(2));
    }

    #[test]
    fn triangle_closure_adds_full_unaries() {
        let closed = triangle().small_arity_closure(2).unwrap();
        for v in 0..3 {
            assert!(closed.constraint(&[v]).unwrap().is_full());
        }
        assert!(closed.validate_weak_k(2));
    }

    #[test]
    fn closure_detects_disagreement() {
        let mut inst = Instance::uniform(3, 2);
        inst.add_constraint(&[0, 1], Relation::new(vec![2, 2], vec![vec![0, 0]]).unwrap()).unwrap();
        inst.add_constraint(&[0, 2], Relation::full(vec![2, 2]).unwrap()).unwrap();
        inst.add_constraint(&[1, 2], Relation::full(vec![2, 2]).unwrap()).unwrap();
        assert!(matches!(inst.small_arity_closure(2), Err(InstanceError::ProjectionDisagreement { .. })));
    }

    #[test]
    fn squaring_binds_pairs() {
        let mut inst = Instance::uniform(2, 2);
        inst.add_constraint(&[0, 1], neq()).unwrap();
        let sq = inst.square_instance(&[(0, 1)], false).unwrap();
        let y = sq.pair_vars[0];
        assert_eq!(sq.instance.domain(y), 4);
        let bind = sq.instance.constraint(&[0, y]).unwrap();
        let expected = Relation::new(vec![2, 4], vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert_eq!(bind, &expected);
        let same = inst.square_instance(&[], false).unwrap();
        assert_eq!(same.instance, inst);
        let diag = inst.square_instance(&[(1, 1)], false).unwrap();
        let d = diag.instance.constraint(&[1, diag.pair_vars[0]]).unwrap();
        assert_eq!(d, &Relation::new(vec![2, 4], vec![vec![0, 0], vec![1, 3]]).unwrap());
    }

    #[test]
    fn random_is_deterministic_and_invariant() {
        let th = algebras::threshold_2_of_4();
        let cfg = RandomConfig::default();
        let a = random_instance(&th, &cfg, 5, 2, 11).unwrap();
        let b = random_instance(&th, &cfg, 5, 2, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.is_k_uniform(2));
        assert!(a.constraints().all(|(_, r)| th.preserves(r)));
        let single = random_instance(&th, &cfg, 3, 3, 1).unwrap();
        assert_eq!(single.num_constraints(), 1);
    }

    #[test]
    fn json_round_trip() {
        let inst = triangle();
        let s = serde_json::to_string(&inst).unwrap();
        let back: Instance = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inst);
        let bad = r#"{"variables":[{"name":"x","domain":2}],"constraints":[{"scope":["y"],"tuples":[[0]]}]}"#;
        assert!(serde_json::from_str::<Instance>(bad).is_err());
    }
}
