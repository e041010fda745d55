//! Protocol specifications: principals, channels, requirement-tagged steps,
//! attacker capability deltas and verification queries.
//!
//! Specifications are written in a line-oriented text format (see
//! [`parse`]) and validated completely at parse time, so every
//! [`ProtocolSpec`] in circulation satisfies the model's invariants.

mod lexer;
mod parser;
mod render;

pub use parser::{parse, SpecError};
pub use render::render_tagged_diagram;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::term::{Atom, Term};

/// What the attacker can do with traffic on a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelClass {
    /// Readable, blockable, injectable, sender forgeable.
    Insecure,
    /// Readable and blockable; no injection.
    Authenticated,
    /// Only the occurrence of a message is visible; no injection.
    ConfidentialAuthenticated,
    /// Invisible unless the attacker can observe keypad input.
    OutOfBandKeypad,
}

impl ChannelClass {
    pub const ALL: [ChannelClass; 4] = [
        ChannelClass::Insecure,
        ChannelClass::Authenticated,
        ChannelClass::ConfidentialAuthenticated,
        ChannelClass::OutOfBandKeypad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelClass::Insecure => "insecure",
            ChannelClass::Authenticated => "authenticated",
            ChannelClass::ConfidentialAuthenticated => "confidential_authenticated",
            ChannelClass::OutOfBandKeypad => "out_of_band_keypad",
        }
    }

    pub fn accepts_injection(self) -> bool {
        self == ChannelClass::Insecure
    }
}

impl fmt::Display for ChannelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ChannelClass::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

/// Trust property expected of an element at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustProperty {
    None,
    Authenticity,
    Confidentiality,
    Integrity,
    Uniqueness,
}

impl TrustProperty {
    pub const ALL: [TrustProperty; 5] = [
        TrustProperty::None,
        TrustProperty::Authenticity,
        TrustProperty::Confidentiality,
        TrustProperty::Integrity,
        TrustProperty::Uniqueness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrustProperty::None => "none",
            TrustProperty::Authenticity => "authenticity",
            TrustProperty::Confidentiality => "confidentiality",
            TrustProperty::Integrity => "integrity",
            TrustProperty::Uniqueness => "uniqueness",
        }
    }
}

impl fmt::Display for TrustProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrustProperty {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        TrustProperty::ALL.into_iter().find(|p| p.as_str() == s).ok_or(())
    }
}

/// Set of trust properties that remembers insertion order for rendering.
/// `none` never coexists with another property.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrustSet(Vec<TrustProperty>);

impl TrustSet {
    pub fn new() -> Self {
        TrustSet(Vec::new())
    }

    pub fn insert(&mut self, p: TrustProperty) {
        if p == TrustProperty::None {
            if self.0.is_empty() {
                self.0.push(p);
            }
            return;
        }
        self.0.retain(|q| *q != TrustProperty::None);
        if !self.0.contains(&p) {
            self.0.push(p);
        }
    }

    pub fn contains(&self, p: TrustProperty) -> bool {
        self.0.contains(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = TrustProperty> + '_ {
        self.0.iter().copied()
    }

    /// Properties other than `none`, in canonical order.
    pub fn requirements(&self) -> Vec<TrustProperty> {
        let mut v: Vec<_> = self.0.iter().copied().filter(|p| *p != TrustProperty::None).collect();
        v.sort();
        v
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl PartialEq for TrustSet {
    fn eq(&self, other: &Self) -> bool {
        let mut a = self.0.clone();
        let mut b = other.0.clone();
        a.sort();
        b.sort();
        a == b
    }
}

impl Eq for TrustSet {}

impl FromIterator<TrustProperty> for TrustSet {
    fn from_iter<I: IntoIterator<Item = TrustProperty>>(iter: I) -> Self {
        let mut s = TrustSet::new();
        iter.into_iter().for_each(|p| s.insert(p));
        s
    }
}

impl fmt::Display for TrustSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Closed capability vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapabilityKind {
    ObserveKeypadInput,
    EavesdropWired,
    EavesdropWireless,
    BlockMessages,
    InjectMessages,
    ForgeSender,
    KnowPublicDirectory,
    ForgeMacRealtime,
}

impl CapabilityKind {
    pub const ALL: [CapabilityKind; 8] = [
        CapabilityKind::ObserveKeypadInput,
        CapabilityKind::EavesdropWired,
        CapabilityKind::EavesdropWireless,
        CapabilityKind::BlockMessages,
        CapabilityKind::InjectMessages,
        CapabilityKind::ForgeSender,
        CapabilityKind::KnowPublicDirectory,
        CapabilityKind::ForgeMacRealtime,
    ];

    /// Capabilities granted by the base Dolev-Yao model.
    pub const DOLEV_YAO: [CapabilityKind; 5] = [
        CapabilityKind::EavesdropWired,
        CapabilityKind::EavesdropWireless,
        CapabilityKind::BlockMessages,
        CapabilityKind::InjectMessages,
        CapabilityKind::ForgeSender,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CapabilityKind::ObserveKeypadInput => "observe_keypad_input",
            CapabilityKind::EavesdropWired => "eavesdrop_wired",
            CapabilityKind::EavesdropWireless => "eavesdrop_wireless",
            CapabilityKind::BlockMessages => "block_messages",
            CapabilityKind::InjectMessages => "inject_messages",
            CapabilityKind::ForgeSender => "forge_sender",
            CapabilityKind::KnowPublicDirectory => "know_public_directory",
            CapabilityKind::ForgeMacRealtime => "forge_mac_realtime",
        }
    }

    pub fn in_base_model(self) -> bool {
        CapabilityKind::DOLEV_YAO.contains(&self)
    }
}

impl fmt::Display for CapabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CapabilityKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        CapabilityKind::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

/// One entry of the +/- capabilities list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CapabilityDelta {
    pub sign: Sign,
    pub capability: CapabilityKind,
    /// Directory contents for `know_public_directory`.
    pub directory: Vec<String>,
    /// Channel class or element name the delta is restricted to.
    pub scope: Option<String>,
}

impl CapabilityDelta {
    pub fn plus(capability: CapabilityKind) -> Self {
        CapabilityDelta { sign: Sign::Plus, capability, directory: Vec::new(), scope: None }
    }

    pub fn minus(capability: CapabilityKind) -> Self {
        CapabilityDelta { sign: Sign::Minus, capability, directory: Vec::new(), scope: None }
    }

    /// Minus deltas must remove a base capability, plus deltas must add one
    /// the base model lacks.
    pub fn is_consistent_with_base(&self) -> bool {
        match self.sign {
            Sign::Plus => !self.capability.in_base_model(),
            Sign::Minus => self.capability.in_base_model(),
        }
    }
}

impl fmt::Display for CapabilityDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "{sign}{}", self.capability)?;
        if !self.directory.is_empty() {
            write!(f, "({})", self.directory.join(", "))?;
        }
        if let Some(scope) = &self.scope {
            write!(f, " on {scope}")?;
        }
        Ok(())
    }
}

/// A capability the attacker effectively holds after applying deltas.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Capability {
    pub kind: CapabilityKind,
    pub directory: Vec<String>,
    pub scope: Option<String>,
    /// Scopes removed by scoped minus deltas.
    pub excluded: Vec<String>,
}

impl Capability {
    fn plain(kind: CapabilityKind) -> Self {
        Capability { kind, directory: Vec::new(), scope: None, excluded: Vec::new() }
    }

    /// Whether the capability applies to a row/message with the given
    /// channel and element name.
    pub fn applies_to(&self, channel: Option<ChannelClass>, element: Option<&str>) -> bool {
        let matches = |scope: &str| {
            channel.is_some_and(|c| c.as_str() == scope) || element.is_some_and(|e| e == scope)
        };
        self.scope.as_deref().is_none_or(matches) && !self.excluded.iter().any(|s| matches(s))
    }

    pub fn label(&self) -> String {
        if self.directory.is_empty() {
            self.kind.to_string()
        } else {
            format!("{}({})", self.kind, self.directory.join(", "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerBase {
    DolevYao,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerModel {
    pub base: AttackerBase,
    pub deltas: Vec<CapabilityDelta>,
}

impl Default for AttackerModel {
    fn default() -> Self {
        AttackerModel { base: AttackerBase::DolevYao, deltas: Vec::new() }
    }
}

impl AttackerModel {
    /// Base capabilities adjusted by the deltas, in vocabulary order.
    pub fn effective(&self) -> Vec<Capability> {
        let mut caps: Vec<Capability> = CapabilityKind::DOLEV_YAO.into_iter().map(Capability::plain).collect();
        for d in &self.deltas {
            match d.sign {
                Sign::Plus => caps.push(Capability {
                    kind: d.capability,
                    directory: d.directory.clone(),
                    scope: d.scope.clone(),
                    excluded: Vec::new(),
                }),
                Sign::Minus => match &d.scope {
                    None => caps.retain(|c| c.kind != d.capability),
                    Some(scope) => caps
                        .iter_mut()
                        .filter(|c| c.kind == d.capability)
                        .for_each(|c| c.excluded.push(scope.clone())),
                },
            }
        }
        caps.sort_by_key(|c| c.kind);
        caps
    }

    pub fn has(&self, kind: CapabilityKind) -> bool {
        self.effective().iter().any(|c| c.kind == kind)
    }
}

/// Where an element's value comes from, as far as trust is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Computed,
    Relayed,
    EnteredViaKeypad,
    SentViaEmail,
    SentViaSms,
    PublicDirectory,
}

impl Provenance {
    pub const ALL: [Provenance; 7] = [
        Provenance::Generated,
        Provenance::Computed,
        Provenance::Relayed,
        Provenance::EnteredViaKeypad,
        Provenance::SentViaEmail,
        Provenance::SentViaSms,
        Provenance::PublicDirectory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Generated => "generated",
            Provenance::Computed => "computed",
            Provenance::Relayed => "relayed",
            Provenance::EnteredViaKeypad => "entered_via_keypad",
            Provenance::SentViaEmail => "sent_via_email",
            Provenance::SentViaSms => "sent_via_sms",
            Provenance::PublicDirectory => "public_directory",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Provenance::ALL.into_iter().find(|p| p.as_str() == s).ok_or(())
    }
}

/// Step number, optionally with a sub-message index (`9.1`, `9.2`).
/// Serialized as its display string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepId {
    pub major: u32,
    pub minor: Option<u32>,
}

impl StepId {
    pub fn new(major: u32) -> Self {
        StepId { major, minor: None }
    }

    pub fn sub(major: u32, minor: u32) -> Self {
        StepId { major, minor: Some(minor) }
    }
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.minor {
            Some(m) => write!(f, "{}.{}", self.major, m),
            None => write!(f, "{}", self.major),
        }
    }
}

impl FromStr for StepId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let parse = |p: &str| p.parse::<u32>().ok().filter(|n| *n > 0).ok_or(());
        match s.split_once('.') {
            Some((a, b)) => Ok(StepId::sub(parse(a)?, parse(b)?)),
            None => Ok(StepId::new(parse(s)?)),
        }
    }
}

impl Serialize for StepId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StepId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse()
            .map_err(|_| serde::de::Error::custom(format!("invalid step number `{raw}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Send,
    Compute,
    OutOfBand,
    /// Deferred verification of previously received elements.
    Check,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub name: String,
    pub term: Term,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub id: StepId,
    pub kind: StepKind,
    pub sender: String,
    pub receiver: Option<String>,
    pub channel: Option<ChannelClass>,
    pub elements: Vec<Element>,
    pub requirements: Vec<(String, TrustSet)>,
    pub fresh: Vec<Atom>,
    pub line: usize,
}

impl StepSpec {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn requirement(&self, element: &str) -> Option<&TrustSet> {
        self.requirements.iter().find(|(e, _)| e == element).map(|(_, s)| s)
    }

    pub fn is_message(&self) -> bool {
        matches!(self.kind, StepKind::Send | StepKind::OutOfBand)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub id: String,
    pub trusted: bool,
    pub knows: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Query {
    Secrecy { target: Term },
    Authentication { claimant: String, peer: String, on: String },
    Uniqueness { on: String },
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Secrecy { target } => write!(f, "secrecy({target})"),
            Query::Authentication { claimant, peer, on } => write!(f, "auth({claimant}, {peer} on {on})"),
            Query::Uniqueness { on } => write!(f, "unique({on})"),
        }
    }
}

impl Query {
    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        let raw = match self {
            Query::Secrecy { target } => format!("secrecy-{target}"),
            Query::Authentication { claimant, peer, on } => format!("auth-{claimant}-{peer}-{on}"),
            Query::Uniqueness { on } => format!("unique-{on}"),
        };
        let mut out = String::new();
        for c in raw.chars() {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                out.push(c);
            } else if !out.ends_with('_') {
                out.push('_');
            }
        }
        out.trim_end_matches('_').to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub name: String,
    pub goals: Vec<String>,
    pub principals: Vec<Principal>,
    /// Constants known to everyone, the attacker included.
    pub public: Vec<Atom>,
    /// Keys whose MACs authenticate their payload.
    pub trusted_keys: Vec<Atom>,
    pub attacker: AttackerModel,
    pub steps: Vec<StepSpec>,
    pub queries: Vec<Query>,
}

impl ProtocolSpec {
    pub fn principal(&self, id: &str) -> Option<&Principal> {
        self.principals.iter().find(|p| p.id == id)
    }

    pub fn step(&self, id: StepId) -> Option<&StepSpec> {
        self.steps.iter().find(|s| s.id == id)
    }

    /// Term of the first definition of an element.
    pub fn element_term(&self, name: &str) -> Option<&Term> {
        self.steps.iter().flat_map(|s| &s.elements).find(|e| e.name == name).map(|e| &e.term)
    }

    /// Distinct step numbers (sub-messages share their number).
    pub fn numbered_steps(&self) -> usize {
        let mut majors: Vec<u32> = self.steps.iter().map(|s| s.id.major).collect();
        majors.dedup();
        majors.len()
    }

    pub fn message_count(&self) -> usize {
        self.steps.iter().filter(|s| s.is_message()).count()
    }

    /// Maximum depth of any term in the spec.
    pub fn max_term_depth(&self) -> usize {
        let step_terms = self.steps.iter().flat_map(|s| s.elements.iter().map(|e| &e.term));
        let known = self.principals.iter().flat_map(|p| p.knows.iter());
        let queried = self.queries.iter().filter_map(|q| match q {
            Query::Secrecy { target } => Some(target),
            _ => None,
        });
        step_terms.chain(known).chain(queried).map(Term::depth).max().unwrap_or(1)
    }

    /// Default closure depth bound: two above the deepest spec term.
    pub fn default_depth_bound(&self) -> usize {
        2 + self.max_term_depth()
    }

    /// A copy with one more capability delta; an opposite-signed delta for
    /// the same capability and scope is replaced rather than stacked.
    pub fn with_delta(&self, delta: CapabilityDelta) -> ProtocolSpec {
        let mut spec = self.clone();
        spec.attacker
            .deltas
            .retain(|d| !(d.capability == delta.capability && d.scope == delta.scope));
        if delta.is_consistent_with_base() {
            spec.attacker.deltas.push(delta);
        }
        spec
    }
}
