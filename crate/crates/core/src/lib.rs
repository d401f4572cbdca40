//! Behavior trees as networks of discrete-timed automata.
//!
//! The pipeline is: [`syntax`] parses and validates `.btf` documents,
//! [`model`] compiles a tree into a [`model::ComposedModel`], [`statespace`]
//! explores it, [`props`] checks properties on the result, and [`runtime`]
//! executes the same model against action providers. [`interp`] is an
//! independent tree-walking interpreter kept as a test oracle.

pub mod status;
pub mod model;
pub mod interp;
pub mod props;
pub mod runtime;
pub mod statespace;
pub mod syntax;

pub use status::{Outcome, ReturnStatus};
