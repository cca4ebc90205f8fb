//! Arithmetic circuits over exact rationals for the polynomial encodings of distributions
//! over binary variables, and the transformations between them.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod circuit;
pub mod division;
pub mod field;
pub mod fixtures;
pub mod gen;
pub mod hardness;
pub mod inference;
pub mod leaf;
pub mod oracle;
pub mod rational;
pub mod structured;
pub mod transform;

pub use circuit::{
    Circuit, CircuitBuilder, CircuitError, EvalError, ModPoint, Node, NodeId, Point, Polarity, ScopeSet, Semantics,
    VarRef,
};
pub use rational::Rational;
