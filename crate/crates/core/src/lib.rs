//! Question/answer Turing machine laboratory.
//!
//! The crate models machines that hold a dialogue: each question is written
//! on a fresh input tape, the machine runs from its initial state (the work
//! tape persists between questions), and the maximal letter prefix of the
//! output tape is the answer. On top of the interpreter sit a text format
//! and a canonical word encoding for machine descriptions, enumerators over
//! all valid encodings, halting oracles, an interrogation arena that runs
//! left/right imitation tests, and a probabilistic tester with a
//! Monte-Carlo harness.

pub mod words;
pub mod machine;
pub mod vm;
pub mod dsl;
pub mod encoding;
pub mod oracle;
pub mod participant;
pub mod enumerate;
pub mod memory;
pub mod arena;
pub mod prob;
pub mod zoo;

pub use machine::{MachineDescription, Move, Side, StateId, StateStatus, Transition};
pub use words::{Alphabet, BWord, Word};
