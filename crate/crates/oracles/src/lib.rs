//! Brute-force reference implementations on plain data, for cross-checking the workbench.
//!
//! Everything here enumerates full products and is only meant for tiny inputs.

use std::collections::BTreeSet;

pub type Tuple = Vec<u16>;

/// Every tuple of `domains[0] × … × domains[n−1]` in lexicographic order.
pub fn product(domains: &[usize]) -> Vec<Tuple> {
    let mut out = vec![Vec::new()];
    for &d in domains {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..d as u16).map(move |a| {
                    let mut t = t.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

/// A constraint as `(scope, allowed tuples)`.
pub type Constraint = (Vec<usize>, Vec<Tuple>);

pub fn satisfies(assignment: &[u16], constraints: &[Constraint]) -> bool {
    constraints.iter().all(|(scope, tuples)| {
        let t: Tuple = scope.iter().map(|&v| assignment[v]).collect();
        tuples.contains(&t)
    })
}

/// All solutions, by checking every assignment.
pub fn solutions(domains: &[usize], constraints: &[Constraint]) -> Vec<Tuple> {
    product(domains).into_iter().filter(|a| satisfies(a, constraints)).collect()
}

pub fn project(tuples: &[Tuple], coords: &[usize]) -> BTreeSet<Tuple> {
    tuples.iter().map(|t| coords.iter().map(|&c| t[c]).collect()).collect()
}

/// Each constraint tuple extends to a solution.
pub fn sensitive(domains: &[usize], constraints: &[Constraint]) -> bool {
    let sols = solutions(domains, constraints);
    constraints.iter().all(|(scope, tuples)| {
        let proj = project(&sols, scope);
        tuples.iter().all(|t| proj.contains(t))
    })
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}

/// Tuples of the full product whose every `k`-projection lies in the projection of `tuples`.
pub fn star_closure(domains: &[usize], tuples: &[Tuple], k: usize) -> BTreeSet<Tuple> {
    let n = domains.len();
    let k = k.min(n);
    let projections: Vec<(Vec<usize>, BTreeSet<Tuple>)> =
        subsets(n, k).into_iter().map(|s| (s.clone(), project(tuples, &s))).collect();
    product(domains)
        .into_iter()
        .filter(|t| projections.iter().all(|(s, p)| p.contains(&s.iter().map(|&c| t[c]).collect::<Tuple>())))
        .collect()
}

/// A basic operation as `(arity, table)`, the table indexed in lexicographic argument order.
pub type Op = (usize, Vec<u16>);

fn apply(domain: usize, op: &Op, args: &[u16]) -> u16 {
    let idx = args.iter().fold(0usize, |acc, &a| acc * domain + a as usize);
    op.1[idx]
}

/// The `n`-ary term operations reachable by terms of depth at most `depth`, as tables on `A^n`.
/// Stops early at a fixed point; gives up (returns `None`) beyond `cap` tables.
pub fn clone_to_depth(domain: usize, ops: &[Op], n: usize, depth: usize, cap: usize) -> Option<BTreeSet<Tuple>> {
    let points = product(&vec![domain; n]);
    let mut level: BTreeSet<Tuple> = (0..n).map(|i| points.iter().map(|p| p[i]).collect()).collect();
    for _ in 0..depth {
        let current: Vec<Tuple> = level.iter().cloned().collect();
        let mut next = level.clone();
        for op in ops {
            for choice in product(&vec![current.len(); op.0]) {
                let table: Tuple = (0..points.len())
                    .map(|x| {
                        let idx = choice.iter().fold(0usize, |acc, &c| acc * domain + current[c as usize][x] as usize);
                        op.1[idx]
                    })
                    .collect();
                next.insert(table);
                if next.len() > cap {
                    return None;
                }
            }
        }
        if next.len() == level.len() {
            break;
        }
        level = next;
    }
    Some(level)
}

/// Whether the `m`-ary table is a near-unanimity operation: `f(y, x, …, x) = … = f(x, …, x, y) = x`.
pub fn is_nu_table(domain: usize, table: &[u16], m: usize) -> bool {
    for x in 0..domain as u16 {
        for y in 0..domain as u16 {
            for pos in 0..m {
                let idx = (0..m).fold(0usize, |acc, i| acc * domain + usize::from(if i == pos { y } else { x }));
                if table[idx] != x {
                    return false;
                }
            }
        }
    }
    true
}

/// Whether the relation is preserved by the operation, checked on every choice of rows.
pub fn preserves(domain: usize, op: &Op, tuples: &[Tuple]) -> bool {
    let set: BTreeSet<&Tuple> = tuples.iter().collect();
    let width = tuples.first().map_or(0, Vec::len);
    product(&vec![tuples.len(); op.0]).iter().all(|rows| {
        let t: Tuple = (0..width)
            .map(|c| apply(domain, op, &rows.iter().map(|&r| tuples[r as usize][c]).collect::<Vec<_>>()))
            .collect();
        set.contains(&t)
    })
}

fn binom(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Vertex and face counts of the complete `l`-tree over `m` variables with a base of `base`
/// vertices, faces of at most `k` vertices, nonempty faces only. Counted by face size: a face of
/// size `s` spawns `C(m, g)` blocks of `g = l + 1 − s` vertices, each adding `C(g, j)·C(s, i)`
/// faces of size `i + j` for `j ≥ 1`, `i + j ≤ k`.
pub fn complete_tree_counts(base: usize, k: usize, l: usize, depth: usize, m: usize) -> (u128, u128) {
    let mut by_size = vec![0u128; k + 1];
    for (s, count) in by_size.iter_mut().enumerate().skip(1) {
        *count = binom(base, s);
    }
    let mut vertices = base as u128;
    for _ in 1..depth {
        let snapshot = by_size.clone();
        for (s, &count) in snapshot.iter().enumerate().skip(1) {
            if count == 0 || s > l {
                continue;
            }
            let g = l + 1 - s;
            let blocks = count * binom(m, g);
            vertices += blocks * g as u128;
            for j in 1..=g {
                for i in 0..=s {
                    if i + j <= k {
                        by_size[i + j] += blocks * binom(g, j) * binom(s, i);
                    }
                }
            }
        }
    }
    (vertices, by_size.iter().sum())
}

/// Every assignment of `domains` to the vertices such that `face_ok` holds on each face, given
/// the face's vertices and their values.
pub fn realizations(
    domains: &[usize],
    faces: &[Vec<usize>],
    face_ok: impl Fn(&[usize], &[u16]) -> bool,
) -> Vec<Tuple> {
    product(domains)
        .into_iter()
        .filter(|a| {
            faces.iter().all(|f| {
                let vals: Vec<u16> = f.iter().map(|&p| a[p]).collect();
                face_ok(f, &vals)
            })
        })
        .collect()
}
