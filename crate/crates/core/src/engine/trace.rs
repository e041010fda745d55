use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{ChannelClass, Query, StepId};
use crate::term::{Derivation, Term};

/// Role instance: principal plus 1-based session number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub role: String,
    pub session: usize,
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.role, self.session)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    HonestSend { instance: Instance, step: StepId, channel: ChannelClass, term: Term },
    HonestReceive { instance: Instance, step: StepId, term: Term },
    AttackerLearn { term: Term, rule: String },
    AttackerInject { channel: ChannelClass, term: Term },
    Begin { label: String, args: Vec<Term> },
    End { label: String, args: Vec<Term> },
}

impl TraceEvent {
    pub fn keyword(&self) -> &'static str {
        match self {
            TraceEvent::HonestSend { .. } => "honest-send",
            TraceEvent::HonestReceive { .. } => "honest-recv",
            TraceEvent::AttackerLearn { .. } => "learn",
            TraceEvent::AttackerInject { .. } => "inject",
            TraceEvent::Begin { .. } => "begin",
            TraceEvent::End { .. } => "end",
        }
    }

    pub fn is_honest(&self) -> bool {
        matches!(self, TraceEvent::HonestSend { .. } | TraceEvent::HonestReceive { .. })
    }
}

fn join(args: &[Term]) -> String {
    args.iter().map(Term::to_string).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = self.keyword();
        match self {
            TraceEvent::HonestSend { instance, step, channel, term } => {
                write!(f, "{kw} {instance} step {step} over {channel}: {term}")
            }
            TraceEvent::HonestReceive { instance, step, term } => write!(f, "{kw} {instance} step {step}: {term}"),
            TraceEvent::AttackerLearn { term, rule } => write!(f, "{kw} {term} by {rule}"),
            TraceEvent::AttackerInject { channel, term } => write!(f, "{kw} over {channel}: {term}"),
            TraceEvent::Begin { label, args } | TraceEvent::End { label, args } => {
                write!(f, "{kw} {label}({})", join(args))
            }
        }
    }
}

/// Why a trace violates its query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// How the attacker derives the secret.
    Derivation { derivation: Derivation },
    /// An end event without a matching begin.
    Correspondence { label: String, args: Vec<Term> },
    /// A value accepted twice.
    Duplicate { label: String, value: Term },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub violated: Query,
    pub events: Vec<TraceEvent>,
    pub witness: Witness,
}

impl AttackTrace {
    pub fn to_text(&self) -> String {
        let mut out = format!("# violated: {}\n", self.violated);
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// File name for the text form.
    pub fn file_name(&self) -> String {
        format!("trace-{}.txt", self.violated.slug())
    }

    /// Index of the first attacker injection, if any.
    pub fn first_injection(&self) -> Option<usize> {
        self.events.iter().position(|e| matches!(e, TraceEvent::AttackerInject { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceFormatError {
    pub line: usize,
    pub message: String,
}

/// Checks the line grammar of a text trace and returns the event keywords
/// in order. Terms are not parsed.
pub fn validate_trace_text(text: &str) -> Result<Vec<String>, TraceFormatError> {
    let mut kinds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: &str| TraceFormatError { line: line_no, message: message.to_string() };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (kw, rest) = line.split_once(' ').ok_or_else(|| err("missing event body"))?;
        let ok = match kw {
            "honest-send" => {
                let mut w = rest.split(' ');
                instance_ok(w.next())
                    && w.next() == Some("step")
                    && w.next().is_some_and(|s| s.parse::<StepId>().is_ok())
                    && w.next() == Some("over")
                    && w.next().is_some_and(|c| c.strip_suffix(':').is_some_and(|c| c.parse::<ChannelClass>().is_ok()))
                    && w.next().is_some()
            }
            "honest-recv" => {
                let mut w = rest.split(' ');
                instance_ok(w.next())
                    && w.next() == Some("step")
                    && w.next().is_some_and(|s| s.strip_suffix(':').is_some_and(|s| s.parse::<StepId>().is_ok()))
                    && w.next().is_some()
            }
            "inject" => rest
                .strip_prefix("over ")
                .and_then(|r| r.split_once(": "))
                .is_some_and(|(c, t)| c.parse::<ChannelClass>().is_ok() && !t.is_empty()),
            "learn" => rest.rsplit_once(" by ").is_some_and(|(t, r)| !t.is_empty() && !r.is_empty()),
            "begin" | "end" => rest.split_once('(').is_some_and(|(l, a)| !l.is_empty() && a.ends_with(')')),
            _ => return Err(err(&format!("unknown event kind `{kw}`"))),
        };
        if !ok {
            return Err(err(&format!("malformed `{kw}` event")));
        }
        kinds.push(kw.to_string());
    }
    Ok(kinds)
}

fn instance_ok(word: Option<&str>) -> bool {
    word.and_then(|w| w.split_once('#'))
        .is_some_and(|(r, s)| !r.is_empty() && s.parse::<usize>().is_ok_and(|n| n > 0))
}
