//! Compilation of bundles to SMT-LIB 2 scripts and parsing of solver replies.

mod emit;
mod reply;
pub mod sexp;

pub use emit::{
    emit_script, real_literal, symbol, term, AssertionRef, EmitError, EmitOptions, Mode, SmtScript, BOUND_NAME,
    PIN_NAME,
};
pub use reply::{parse_reply, ProtocolError, SolverReply, Status};
