//! Bounded symbolic verification.
//!
//! A specification is compiled into one process per principal, then
//! [`explore`] searches the interleavings of a fixed number of sessions
//! against a Dolev-Yao attacker shaped by the capability model.

pub mod explore;
pub mod process;
pub mod trace;

pub use explore::{
    explore, replay, AttackerContext, EngineError, QueryResult, QueryVerdict, SearchStats, SessionConfig,
    VerificationResult, DEFAULT_STATE_CEILING,
};
pub use process::{compile, Action, CompileError, EventKind, Expr, PatternCheck, RecvPattern, RoleProcess};
pub use trace::{validate_trace_text, AttackTrace, Instance, TraceEvent, TraceFormatError, Witness};

use crate::spec::ProtocolSpec;

/// Compiles `spec` and explores it under `config`.
pub fn verify(spec: &ProtocolSpec, config: &SessionConfig) -> Result<VerificationResult, EngineError> {
    let processes = compile(spec)?;
    let ctx = AttackerContext::from_spec(spec);
    explore(&processes, &ctx, config, &spec.queries)
}

/// Replays `trace` against `spec`. `Ok(true)` when the violation recurs.
pub fn replay_spec(spec: &ProtocolSpec, trace: &AttackTrace, config: &SessionConfig) -> Result<bool, EngineError> {
    let processes = compile(spec)?;
    let ctx = AttackerContext::from_spec(spec);
    replay(trace, &processes, &ctx, config, &spec.queries)
}
