//! Static heap-liveness analysis for a first-order eager functional language.
//!
//! The pipeline parses a program, derives symbolic liveness equations for each
//! program point, turns them into a context-free grammar over access paths,
//! approximates that grammar by a strongly regular one, and finally produces
//! one finite automaton per (program point, variable) describing the heap
//! links that may still be used. A small reference interpreter doubles as a
//! soundness oracle, and a reporting pass lists cells that could be nullified.

pub mod error;
pub mod grammar;
pub mod interp;
pub mod nfa;
pub mod nullify;
pub mod pattern;
pub mod pipeline;
pub mod symbolic;
pub mod syntax;
pub mod transfer;

pub use error::Error;
