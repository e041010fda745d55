//! Protocol-design verification workbench.
//!
//! The crate covers both halves of the design loop: tagging protocol
//! elements with trust requirements and checking them against the
//! attacker's capabilities ([`informal`]), and bounded symbolic
//! Dolev-Yao verification with attack-trace reconstruction ([`engine`]).

pub mod term;
pub mod spec;
pub mod informal;
pub mod engine;
pub mod cases;

pub use cases::{load, run_all, CaseStudy, CorpusError, CorpusReport};
pub use engine::{compile, explore, replay, verify, AttackTrace, EngineError, SessionConfig, TraceEvent, VerificationResult};
pub use informal::{check_conflicts, check_spec, default_defeat_rules, parse_rules, ConflictReport, DefeatRule, Verdict};
pub use spec::{parse, CapabilityDelta, CapabilityKind, ChannelClass, ProtocolSpec, Query, SpecError, TrustProperty};
pub use term::{close, derivable, standard_rules, Atom, DeductionRule, Derivation, KnowledgeSet, Sort, Term};
