//! Small named algebras used throughout the workbench and its corpus.

use crate::algebra::{Algebra, Operation};
use crate::relation::{Elem, ProductIter};

/// `({0,1}, maj)`.
pub fn majority() -> Algebra {
    let maj = Operation::from_fn("maj", 2, 3, |a| if a[0] == a[1] { a[0] } else { a[2] });
    Algebra::new(2, vec![maj]).expect("valid table")
}

/// `({0,1}, min)`, the Horn algebra.
pub fn binary_min() -> Algebra {
    let min = Operation::from_fn("min", 2, 2, |a| a[0].min(a[1]));
    Algebra::new(2, vec![min]).expect("valid table")
}

/// `({0,1}, t)` with `t(x₁,…,x₄) = 1` iff at least two arguments are 1.
pub fn threshold_2_of_4() -> Algebra {
    let t = Operation::from_fn("t", 2, 4, |a| (a.iter().filter(|&&x| x == 1).count() >= 2) as Elem);
    Algebra::new(2, vec![t]).expect("valid table")
}

/// `({0,1,2}, s)` where `s` returns the second largest of its four arguments. Idempotent,
/// with `s` itself a 4-ary NU operation.
pub fn second_largest_of_4() -> Algebra {
    let s = Operation::from_fn("s", 3, 4, |a| {
        let mut v = a.to_vec();
        v.sort_unstable();
        v[2]
    });
    Algebra::new(3, vec![s]).expect("valid table")
}

/// The Słupecki algebra on three elements, generated by all unary operations together with
/// all binary operations whose image has at most two elements.
pub fn slupecki3() -> Algebra {
    let n = 3usize;
    let mut ops = Vec::new();
    for (i, f) in ProductIter::new(&[n; 3]).enumerate() {
        ops.push(Operation::new(format!("u{i}"), 1, f));
    }
    for (i, table) in ProductIter::new(&[n; 9]).enumerate() {
        let mut image = [false; 3];
        for &v in &table {
            image[v as usize] = true;
        }
        if image.iter().filter(|&&b| b).count() <= 2 {
            ops.push(Operation::new(format!("b{i}"), 2, table));
        }
    }
    Algebra::new(n, ops).expect("valid tables")
}
