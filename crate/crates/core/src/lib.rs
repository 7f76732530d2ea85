//! A workbench for finite-domain constraint satisfaction and the universal algebra around
//! bounded width: (k,l)-consistency, sensitivity and the extension property, near-unanimity
//! search, gadget constructions, local absorption with loop lemmata, and k-tree quality.

pub mod algebra;
pub mod algebras;
pub mod relation;
pub mod consistency;
pub mod instance;
pub mod solver;
pub mod constructions;
pub mod absorption;
pub mod patterns;
pub mod corpus;
