//! Requirement table construction and capability-conflict checking.
//!
//! Each (step, element) pair gets its own row; tags are authoritative for
//! their step only. A conflict is a (row, property, capability) triple
//! where some defeat rule fires.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::spec::{
    AttackerModel, Capability, CapabilityKind, ChannelClass, ProtocolSpec, Provenance, StepId, TrustProperty,
    TrustSet,
};
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementRow {
    pub step: StepId,
    pub element: String,
    pub properties: TrustSet,
    pub provenance: Provenance,
    pub channel: Option<ChannelClass>,
    /// Properties added because the element is covered by a MAC under a
    /// trusted key at this step. Channel-based defeats do not apply to them.
    pub mac_protected: Vec<TrustProperty>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementTable {
    pub rows: Vec<RequirementRow>,
}

impl RequirementTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, step: StepId, element: &str) -> Option<&RequirementRow> {
        self.rows.iter().find(|r| r.step == step && r.element == element)
    }
}

/// Walks every step and element in order.
pub fn build_requirement_table(spec: &ProtocolSpec) -> RequirementTable {
    let trusted = |k: &Term| k.as_atom().is_some_and(|a| spec.trusted_keys.contains(a));
    let mut rows = Vec::new();
    for step in &spec.steps {
        for element in &step.elements {
            let mut properties = step.requirement(&element.name).cloned().unwrap_or_default();
            let mut mac_protected = Vec::new();
            let covered = step.elements.iter().any(|other| match &other.term {
                Term::Mac(payload, key) => {
                    other.name != element.name
                        && trusted(key)
                        && payload.subterms().into_iter().any(|t| *t == element.term)
                }
                _ => false,
            });
            if covered {
                for p in [TrustProperty::Authenticity, TrustProperty::Integrity] {
                    if !properties.contains(p) {
                        mac_protected.push(p);
                    }
                    properties.insert(p);
                }
            }
            rows.push(RequirementRow {
                step: step.id,
                element: element.name.clone(),
                properties,
                provenance: element.provenance,
                channel: step.channel,
                mac_protected,
            });
        }
    }
    RequirementTable { rows }
}

/// Closed set of conditions under which a capability defeats a property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefeatCondition {
    OnKeypadProvenance,
    OnInsecureChannel,
    OnAuthenticatedChannel,
    Always,
    ElementInDirectory,
}

impl DefeatCondition {
    fn is_channel_based(self) -> bool {
        matches!(self, DefeatCondition::OnInsecureChannel | DefeatCondition::OnAuthenticatedChannel)
    }

    fn reason(self) -> &'static str {
        match self {
            DefeatCondition::OnKeypadProvenance => "it is entered via a keypad",
            DefeatCondition::OnInsecureChannel => "it travels over an insecure channel",
            DefeatCondition::OnAuthenticatedChannel => "it travels over a readable authenticated channel",
            DefeatCondition::Always => "no channel protects against it",
            DefeatCondition::ElementInDirectory => "it is listed in a public directory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefeatRule {
    pub name: String,
    pub capability: CapabilityKind,
    pub defeats: TrustProperty,
    pub condition: DefeatCondition,
}

impl DefeatRule {
    pub fn new(name: &str, capability: CapabilityKind, defeats: TrustProperty, condition: DefeatCondition) -> Self {
        DefeatRule { name: name.to_string(), capability, defeats, condition }
    }

    /// Whether the rule, held through `cap`, defeats `property` on `row`.
    pub fn fires(&self, cap: &Capability, row: &RequirementRow, property: TrustProperty) -> bool {
        if cap.kind != self.capability || property != self.defeats || !row.properties.contains(property) {
            return false;
        }
        if !cap.applies_to(row.channel, Some(&row.element)) {
            return false;
        }
        if self.condition.is_channel_based() && row.mac_protected.contains(&property) {
            return false;
        }
        match self.condition {
            DefeatCondition::OnKeypadProvenance => row.provenance == Provenance::EnteredViaKeypad,
            DefeatCondition::OnInsecureChannel => row.channel == Some(ChannelClass::Insecure),
            DefeatCondition::OnAuthenticatedChannel => row.channel == Some(ChannelClass::Authenticated),
            DefeatCondition::Always => true,
            DefeatCondition::ElementInDirectory => cap.directory.contains(&row.element),
        }
    }
}

/// The shipped defeat matrix.
pub fn default_defeat_rules() -> Vec<DefeatRule> {
    use CapabilityKind::*;
    use DefeatCondition::*;
    use TrustProperty::*;
    vec![
        DefeatRule::new("keypad-observation", ObserveKeypadInput, Confidentiality, OnKeypadProvenance),
        DefeatRule::new("wired-eavesdropping", EavesdropWired, Confidentiality, OnInsecureChannel),
        DefeatRule::new("wireless-eavesdropping", EavesdropWireless, Confidentiality, OnInsecureChannel),
        DefeatRule::new("sender-forgery", ForgeSender, Authenticity, OnInsecureChannel),
        DefeatRule::new("message-injection", InjectMessages, Integrity, OnInsecureChannel),
        DefeatRule::new("message-replay", InjectMessages, Uniqueness, OnInsecureChannel),
        DefeatRule::new("directory-lookup", KnowPublicDirectory, Confidentiality, ElementInDirectory),
        DefeatRule::new("realtime-mac-forgery", ForgeMacRealtime, Authenticity, Always),
    ]
}

/// Reads a defeat-rule matrix from JSON: an array of
/// `{name, capability, defeats, condition}` objects replacing the default.
pub fn parse_rules(json: &str) -> Result<Vec<DefeatRule>, serde_json::Error> {
    serde_json::from_str(json)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub step: StepId,
    pub element: String,
    pub property: TrustProperty,
    pub capability: String,
    pub rule: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub verdict: Verdict,
    pub conflicts: Vec<Conflict>,
}

impl ConflictReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        };
        writeln!(f, "verdict: {verdict}")?;
        writeln!(f, "conflicts: {}", self.conflicts.len())?;
        for c in &self.conflicts {
            writeln!(
                f,
                "  step {} {}: {} defeated by {} [{}]",
                c.step, c.element, c.property, c.capability, c.rule
            )?;
            writeln!(f, "    {}", c.explanation)?;
        }
        Ok(())
    }
}

/// Evaluates every rule against every row and effective capability.
pub fn check_conflicts(table: &RequirementTable, attacker: &AttackerModel, rules: &[DefeatRule]) -> ConflictReport {
    let caps = attacker.effective();
    let mut conflicts: Vec<(usize, Conflict)> = Vec::new();
    for row in &table.rows {
        for property in row.properties.requirements() {
            for cap in &caps {
                let Some(rule) = rules.iter().find(|r| r.fires(cap, row, property)) else {
                    continue;
                };
                let mut explanation = format!(
                    "{} requires {} at step {}, but {}",
                    row.element,
                    property,
                    row.step,
                    rule.condition.reason()
                );
                let _ = write!(explanation, " and the attacker can {}", cap.kind);
                conflicts.push((
                    cap.kind as usize,
                    Conflict {
                        step: row.step,
                        element: row.element.clone(),
                        property,
                        capability: cap.label(),
                        rule: rule.name.clone(),
                        explanation,
                    },
                ));
            }
        }
    }
    conflicts.sort_by(|(ka, a), (kb, b)| {
        (a.step, &a.element, a.property, ka, &a.capability).cmp(&(b.step, &b.element, b.property, kb, &b.capability))
    });
    conflicts.dedup_by(|(_, a), (_, b)| a.step == b.step && a.element == b.element && a.property == b.property && a.capability == b.capability);
    let conflicts: Vec<Conflict> = conflicts.into_iter().map(|(_, c)| c).collect();
    let verdict = if conflicts.is_empty() { Verdict::Pass } else { Verdict::Fail };
    ConflictReport { verdict, conflicts }
}

/// Builds the table for `spec` and checks it against the spec's own attacker.
pub fn check_spec(spec: &ProtocolSpec, rules: &[DefeatRule]) -> ConflictReport {
    check_conflicts(&build_requirement_table(spec), &spec.attacker, rules)
}
