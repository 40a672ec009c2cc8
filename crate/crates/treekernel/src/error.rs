//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by parsing, automaton construction, generation and the
/// parallel pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Term-notation syntax error, with the byte offset into the input text.
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    /// A symbol was used at two different arities under arity inference.
    #[error("arity conflict for symbol '{name}': used with arity {found} after arity {first}")]
    ArityConflict {
        name: String,
        first: usize,
        found: usize,
    },

    /// A symbol is absent from the declared alphabet (at the used arity).
    #[error("unknown symbol '{name}' with arity {arity}")]
    UnknownSymbol { name: String, arity: usize },

    /// A symbol name violates the lexical rules.
    #[error("invalid symbol name '{name}': {reason}")]
    InvalidSymbol { name: String, reason: String },

    /// A tree was assembled with the wrong number of children for its root.
    #[error("symbol '{name}' expects {expected} children, got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },

    /// Exact 64-bit weight arithmetic overflowed; the corpus is too large
    /// for exact kernels. Never wraps silently.
    #[error("weight overflow while {context}")]
    Overflow { context: &'static str },

    /// An RWTA file or state list violates the format or its invariants.
    #[error("invalid rwta data: {0}")]
    CorruptRwta(String),

    /// An automaton was used in an operation it does not support.
    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),

    /// A generator spec is malformed or infeasible.
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    /// The corpus generator hit its node budget.
    #[error("node budget exceeded ({0} nodes allowed)")]
    BudgetExceeded(usize),

    /// Wraps an error with the 1-based line of a multi-line document.
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    /// A map task failed; `index` is the 0-based input record index.
    #[error("map task failed on record {index}: {source}")]
    MapFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A reduce group failed; `key` is the shuffle key.
    #[error("reduce failed for key '{key}': {source}")]
    ReduceFailed {
        key: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach a 1-based line number, as document readers do.
    pub fn at_line(self, line: usize) -> Error {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
