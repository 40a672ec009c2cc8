//! Subtree kernels for finite sets of ranked trees.
//!
//! The kernel of two tree sets counts their shared subtree occurrences. It
//! is computed here by building a root-weighted tree automaton (RWTA) per
//! set — states are the distinct subtrees, root weights their occurrence
//! counts — intersecting the two automata, and summing the weights of the
//! intersection. Both a sequential path and a deterministic in-process
//! map-shuffle-reduce path are provided and produce identical results.
//!
//! Modules:
//! - [`tree`]: graded alphabets, trees, canonical term notation, tree files.
//! - [`series`]: tree series and subtree/prefix enumeration.
//! - [`rwta`]: the automaton, construction, intersection, kernels, and the
//!   brute-force reference kernel.
//! - [`parallel`]: the map-shuffle-reduce pipeline and the two parallel jobs.
//! - [`datagen`]: seeded synthetic corpus generation for benchmarks.

pub mod datagen;
pub mod error;
pub mod parallel;
pub mod rwta;
pub mod series;
pub mod tree;

pub use error::{Error, Result};
