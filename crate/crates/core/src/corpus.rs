//! The bundled algebras and instances.
//!
//! Files live in `crates/core/corpus` and are embedded at build time. [`generate`] rebuilds them
//! from their constructions; a test keeps the two in sync (set `KWIDTH_WRITE_CORPUS=1` to
//! rewrite the files).

use serde::Serialize;
use serde_json::Value;

use crate::algebra::Algebra;
use crate::algebras;
use crate::consistency::{enforce_kl, Status};
use crate::constructions::{build_prop_sens, build_prop_sw, search_undetermined_relation};
use crate::instance::{random_instance, Instance, RandomConfig};
use crate::relation::Relation;
use crate::solver::enumerate_solutions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Algebra,
    Instance,
}

#[derive(Clone, Copy, Debug)]
pub struct Entry {
    pub name: &'static str,
    pub kind: Kind,
    pub text: &'static str,
}

macro_rules! entry {
    ($name:literal, $kind:ident) => {
        Entry { name: $name, kind: Kind::$kind, text: include_str!(concat!("../corpus/", $name, ".json")) }
    };
}

pub const ENTRIES: &[Entry] = &[
    entry!("maj", Algebra),
    entry!("min-horn", Algebra),
    entry!("threshold24", Algebra),
    entry!("chain3", Algebra),
    entry!("slupecki3", Algebra),
    entry!("triangle", Instance),
    entry!("four-cycle", Instance),
    entry!("four-cycle-enforced", Instance),
    entry!("prop-sens-min", Instance),
    entry!("prop-sw-threshold", Instance),
    entry!("maj-square-enforced", Instance),
    entry!("threshold-square-enforced", Instance),
];

pub fn entry(name: &str) -> Option<&'static Entry> {
    ENTRIES.iter().find(|e| e.name == name)
}

/// Parses a bundled algebra; panics only if the embedded file is corrupt.
pub fn algebra(name: &str) -> Option<Algebra> {
    let e = entry(name).filter(|e| e.kind == Kind::Algebra)?;
    Some(serde_json::from_str(e.text).expect("bundled algebra parses"))
}

pub fn instance(name: &str) -> Option<Instance> {
    let e = entry(name).filter(|e| e.kind == Kind::Instance)?;
    Some(serde_json::from_str(e.text).expect("bundled instance parses"))
}

pub fn instances() -> impl Iterator<Item = (&'static str, Instance)> {
    ENTRIES.iter().filter(|e| e.kind == Kind::Instance).map(|e| (e.name, instance(e.name).expect("listed")))
}

/// JSON with sorted keys, two-space indentation and arrays of scalars kept on one line.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|x| !x.is_array() && !x.is_object()),
        Value::Object(_) => false,
        _ => true,
    }
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Array(items) if is_flat(v) || items.is_empty() => {
            out.push_str(&serde_json::to_string(v).expect("serializable"));
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (key, x)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&serde_json::to_string(key).expect("string"));
                out.push_str(": ");
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        _ => out.push_str(&serde_json::to_string(v).expect("serializable")),
    }
}

fn disequality_graph(n: usize, edges: &[(usize, usize)]) -> Instance {
    let ne = Relation::new(vec![2, 2], [vec![0, 1], vec![1, 0]]).expect("valid");
    let mut inst = Instance::uniform(n, 2);
    for &(a, b) in edges {
        inst.add_constraint(&[a, b], ne.clone()).expect("valid scope");
    }
    inst
}

/// First planted random instance over `alg²` on five variables whose (2,3)-enforcement keeps
/// at least two solutions.
fn enforced_square(alg: &Algebra) -> Instance {
    let square = alg.square().expect("small carrier");
    let cfg = RandomConfig { plant_solution: true, ..RandomConfig::default() };
    for seed in 0.. {
        let inst = random_instance(&square, &cfg, 5, 2, seed).expect("valid");
        let res = enforce_kl(&inst, 2, 3).expect("valid widths");
        if let Some(e) = res.instance {
            if enumerate_solutions(&e, Some(2)).expect("small").len() == 2 {
                return e;
            }
        }
    }
    unreachable!()
}

/// Every corpus file as `(name, contents)`, in [`ENTRIES`] order.
pub fn generate() -> Vec<(&'static str, String)> {
    let mut out: Vec<(&'static str, String)> = Vec::new();
    out.push(("maj", to_canonical_json(&algebras::majority())));
    out.push(("min-horn", to_canonical_json(&algebras::binary_min())));
    out.push(("threshold24", to_canonical_json(&algebras::threshold_2_of_4())));
    out.push(("chain3", to_canonical_json(&algebras::second_largest_of_4())));
    out.push(("slupecki3", to_canonical_json(&algebras::slupecki3())));

    out.push(("triangle", to_canonical_json(&disequality_graph(3, &[(0, 1), (1, 2), (0, 2)]))));
    let c4 = disequality_graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
    out.push(("four-cycle", to_canonical_json(&c4)));
    let res = enforce_kl(&c4, 2, 3).expect("valid widths");
    assert_eq!(res.status, Status::Enforced);
    out.push(("four-cycle-enforced", to_canonical_json(&res.instance.expect("enforced"))));

    let min = algebras::binary_min();
    let (_, r) = search_undetermined_relation(&min, 4, 3, 8, 0..10_000).expect("valid").expect("found");
    out.push(("prop-sens-min", to_canonical_json(&build_prop_sens(&r, 2).expect("arity 4"))));
    let th = algebras::threshold_2_of_4();
    let (_, r) = search_undetermined_relation(&th, 3, 2, 4, 0..10_000).expect("valid").expect("found");
    out.push(("prop-sw-threshold", to_canonical_json(&build_prop_sw(&r, 2).expect("arity 3"))));

    out.push(("maj-square-enforced", to_canonical_json(&enforced_square(&algebras::majority()))));
    out.push(("threshold-square-enforced", to_canonical_json(&enforced_square(&th))));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_matches_generator() {
        let generated = generate();
        assert_eq!(generated.len(), ENTRIES.len());
        let write = std::env::var_os("KWIDTH_WRITE_CORPUS").is_some();
        for ((name, text), e) in generated.iter().zip(ENTRIES) {
            assert_eq!(*name, e.name);
            if write {
                let path = format!("{}/corpus/{name}.json", env!("CARGO_MANIFEST_DIR"));
                std::fs::write(path, text).unwrap();
            } else {
                assert_eq!(text, e.text, "{name} is stale; rerun with KWIDTH_WRITE_CORPUS=1");
            }
        }
    }

    #[test]
    fn round_trip() {
        for e in ENTRIES {
            let text = match e.kind {
                Kind::Algebra => to_canonical_json(&algebra(e.name).unwrap()),
                Kind::Instance => to_canonical_json(&instance(e.name).unwrap()),
            };
            assert_eq!(text, e.text, "{}", e.name);
        }
    }

    #[test]
    fn canonical_layout() {
        let v = serde_json::json!({"b": [1, 2], "a": {"t": [[0, 1], [1, 0]], "e": []}});
        assert_eq!(to_canonical_json(&v), "{\n  \"a\": {\n    \"e\": [],\n    \"t\": [\n      [0,1],\n      [1,0]\n    ]\n  },\n  \"b\": [1,2]\n}\n");
    }
}
