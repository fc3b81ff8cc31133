//! Static deadlock detection for sequential models of synchronous
//! point-to-point message passing.
//!
//! Each process is abstracted to a string of message signatures. The program
//! is deadlock-free iff repeatedly consuming equal signatures at the heads of
//! two strings empties every string. [`engine`] does this in linear time and
//! accepts tail appends for streaming input; [`oracle`] provides an
//! exhaustive interleaving simulator and a wait-graph cycle detector to check
//! it against.

pub mod bench;
pub mod cli;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod report;
pub mod signatures;
pub mod stream;

pub use engine::{engine_check, DrainOutcome, Engine, EngineError};
pub use model::{
    validate_static, DeadlockReport, Envelope, IllegalReason, MessageOccurrence, Mode, Model,
    Rank, Role, Sequence, Signature, Verdict, VerdictClass,
};
pub use parser::{parse_abstract, parse_auto, parse_dsl, ParseError};
pub use report::Report;
pub use signatures::SignatureSpace;
