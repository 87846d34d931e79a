//! Type checking and inference for a core lambda calculus with refinement
//! types, abstract refinements and bounds over abstract refinements.

pub mod anf;
pub mod driver;
pub mod elaborate;
pub mod eval;
pub mod infer;
pub mod ast;
pub mod logic;
pub mod smt;
pub mod surface;
pub mod typecheck;
