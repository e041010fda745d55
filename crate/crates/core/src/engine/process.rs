//! Role processes and the compiler from specifications.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{ChannelClass, ProtocolSpec, Query, StepId, StepKind, StepSpec};
use crate::term::{Atom, Functor, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("{principal} cannot compute `{term}` for element `{element}` at step {step}")]
    NotComposable { principal: String, step: StepId, element: String, term: String },
    #[error("query {query}: {reason}")]
    NoAcceptancePoint { query: String, reason: String },
}

/// Runtime expression over a role's environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(Term),
    Slot(usize),
    App(Functor, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, env: &[Option<Term>]) -> Option<Term> {
        match self {
            Expr::Const(t) => Some(t.clone()),
            Expr::Slot(i) => env.get(*i).cloned().flatten(),
            Expr::App(f, args) => {
                let args = args.iter().map(|a| a.eval(env)).collect::<Option<Vec<_>>>()?;
                Some(Term::apply(*f, args))
            }
        }
    }
}

/// Receive pattern. Every node stores the value it matched in `slot`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecvPattern {
    pub slot: usize,
    /// Symbolic shape from the specification, used to enumerate injections.
    pub shape: Term,
    pub check: PatternCheck,
    /// Value an opaque slot is later compared against, when nothing reads
    /// the slot before that comparison. Until then every other value leads
    /// to the same behaviour, so injections need one such value at most.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expr>,
    /// Whether another receive happens before that comparison.
    #[serde(default)]
    pub deferred: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternCheck {
    /// Anything is accepted and stored.
    Any,
    /// The value must equal what the receiver computes itself.
    Eq(Expr),
    Pair(Box<RecvPattern>, Box<RecvPattern>),
    /// Decrypt with a known key, then match the plaintext.
    SDec { key: Expr, inner: Box<RecvPattern> },
    /// Strip a known keystream, then match the plaintext.
    XorKey { key: Expr, plain: Box<RecvPattern> },
    /// Known plaintext: what remains is the keystream.
    XorPlain { plain: Expr, key: Box<RecvPattern> },
}

impl Expr {
    fn reads(&self, slot: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Slot(s) => *s == slot,
            Expr::App(_, args) => args.iter().any(|a| a.reads(slot)),
        }
    }
}

impl Expr {
    /// Whether `value` can still equal this expression once the unbound
    /// slots are filled in.
    pub fn fits(&self, value: &Term, env: &[Option<Term>]) -> bool {
        match self {
            Expr::Const(t) => t == value,
            Expr::Slot(i) => env.get(*i).and_then(Option::as_ref).is_none_or(|v| v == value),
            Expr::App(f, args) => {
                value.functor() == Some(*f)
                    && args.iter().zip(value.args()).all(|(a, v)| a.fits(v, env))
            }
        }
    }
}

impl Action {
    fn reads(&self, slot: usize) -> bool {
        match self {
            Action::Fresh { .. } | Action::Receive { .. } => false,
            Action::Assign { expr, .. } => expr.reads(slot),
            Action::CheckEqual { slot: s, expr, .. } => *s == slot || expr.reads(slot),
            Action::Send { elements, .. } => elements.iter().any(|(_, e)| e.reads(slot)),
            Action::Event { args, .. } => args.iter().any(|e| e.reads(slot)),
        }
    }
}

impl RecvPattern {
    /// Matches `value`, writing bound slots into `env`.
    pub fn matches(&self, value: &Term, env: &mut [Option<Term>]) -> bool {
        env[self.slot] = Some(value.clone());
        match &self.check {
            PatternCheck::Any => true,
            PatternCheck::Eq(e) => e.eval(env).as_ref() == Some(value),
            PatternCheck::Pair(l, r) => match value {
                Term::Pair(a, b) => l.matches(a, env) && r.matches(b, env),
                _ => false,
            },
            PatternCheck::SDec { key, inner } => match value {
                Term::SEnc(p, k) => key.eval(env).as_ref() == Some(&**k) && inner.matches(p, env),
                _ => false,
            },
            PatternCheck::XorKey { key, plain } => match value {
                Term::XorMask(p, k) => key.eval(env).as_ref() == Some(&**k) && plain.matches(p, env),
                _ => false,
            },
            PatternCheck::XorPlain { plain, key } => match value {
                Term::XorMask(p, k) => plain.eval(env).as_ref() == Some(&**p) && key.matches(k, env),
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Begin,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Fresh { slot: usize, atom: Atom },
    Assign { slot: usize, expr: Expr },
    Send { step: StepId, channel: ChannelClass, to: String, elements: Vec<(String, Expr)> },
    Receive { step: StepId, channel: ChannelClass, from: String, elements: Vec<(String, RecvPattern)> },
    CheckEqual { step: StepId, element: String, slot: usize, expr: Expr },
    Event { kind: EventKind, label: String, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleProcess {
    pub principal: String,
    pub slots: usize,
    pub actions: Vec<Action>,
}

impl RoleProcess {
    pub fn sends(&self) -> usize {
        self.actions.iter().filter(|a| matches!(a, Action::Send { .. })).count()
    }

    pub fn checks(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().filter(|a| matches!(a, Action::CheckEqual { .. }))
    }
}

impl fmt::Display for RoleProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "process {}", self.principal)?;
        for a in &self.actions {
            match a {
                Action::Fresh { slot, atom } => writeln!(f, "  new ${slot} = {}", atom.name)?,
                Action::Assign { slot, .. } => writeln!(f, "  let ${slot}")?,
                Action::Send { step, channel, to, elements } => {
                    let names: Vec<&str> = elements.iter().map(|(n, _)| n.as_str()).collect();
                    writeln!(f, "  send {step} to {to} over {channel}: {}", names.join(", "))?
                }
                Action::Receive { step, channel, from, elements } => {
                    let names: Vec<&str> = elements.iter().map(|(n, _)| n.as_str()).collect();
                    writeln!(f, "  recv {step} from {from} over {channel}: {}", names.join(", "))?
                }
                Action::CheckEqual { step, element, .. } => writeln!(f, "  check {step} {element}")?,
                Action::Event { kind, label, .. } => writeln!(f, "  event {kind:?} {label}")?,
            }
        }
        Ok(())
    }
}

/// Where a principal gets each symbolic term from.
struct RoleKnowledge {
    known: BTreeMap<Term, Expr>,
    /// Slot of the latest opaque receipt of each term, awaiting a check.
    opaque: BTreeMap<Term, usize>,
    slots: usize,
}

impl RoleKnowledge {
    fn slot(&mut self) -> usize {
        self.slots += 1;
        self.slots - 1
    }

    fn learn_const(&mut self, t: &Term) {
        self.known.entry(t.clone()).or_insert_with(|| Expr::Const(t.clone()));
        if let Term::Pair(a, b) = t {
            self.learn_const(a);
            self.learn_const(b);
        }
    }

    fn compose(&self, t: &Term) -> Option<Expr> {
        if let Some(e) = self.known.get(t) {
            return Some(e.clone());
        }
        self.compose_fresh(t)
    }

    /// Builds `t` from its arguments without looking `t` itself up.
    fn compose_fresh(&self, t: &Term) -> Option<Expr> {
        let f = t.functor()?;
        let args = t.args().into_iter().map(|a| self.compose(a)).collect::<Option<Vec<_>>>()?;
        Some(Expr::App(f, args))
    }

    fn pattern(&mut self, t: &Term, opaque: bool) -> RecvPattern {
        let slot = self.slot();
        if !opaque {
            if let Some(e) = self.compose(t) {
                return RecvPattern { slot, shape: t.clone(), check: PatternCheck::Eq(e), expect: None, deferred: false };
            }
        }
        let check = match t {
            Term::Pair(a, b) if !opaque => {
                let l = self.pattern(a, false);
                let r = self.pattern(b, false);
                PatternCheck::Pair(Box::new(l), Box::new(r))
            }
            Term::SEnc(m, k) if !opaque && self.compose(k).is_some() => {
                let key = self.compose(k).unwrap();
                PatternCheck::SDec { key, inner: Box::new(self.pattern(m, false)) }
            }
            Term::XorMask(m, k) if !opaque && self.compose(k).is_some() => {
                let key = self.compose(k).unwrap();
                PatternCheck::XorKey { key, plain: Box::new(self.pattern(m, false)) }
            }
            Term::XorMask(m, k) if !opaque && self.compose(m).is_some() => {
                let plain = self.compose(m).unwrap();
                PatternCheck::XorPlain { plain, key: Box::new(self.pattern(k, false)) }
            }
            _ => PatternCheck::Any,
        };
        if opaque {
            self.opaque.insert(t.clone(), slot);
        }
        self.known.entry(t.clone()).or_insert(Expr::Slot(slot));
        RecvPattern { slot, shape: t.clone(), check, expect: None, deferred: false }
    }
}

/// Event placement for one authentication or uniqueness query.
#[derive(Debug, Clone)]
struct Placement {
    label: String,
    begin: Option<(String, StepId)>,
    end: (String, StepId),
    claimant: Option<String>,
    peer: Option<String>,
    element: String,
}

fn verifies(spec: &ProtocolSpec, step: &StepSpec, principal: &str, element: &str) -> bool {
    match step.kind {
        StepKind::Check => step.sender == principal && step.element(element).is_some(),
        StepKind::Send | StepKind::OutOfBand => {
            step.receiver.as_deref() == Some(principal)
                && step.element(element).is_some()
                && !checked_later(spec, step.id, principal, element)
                && receiver_can_compose(spec, step, principal, element)
        }
        StepKind::Compute => false,
    }
}

fn receives(step: &StepSpec, principal: &str, element: &str) -> bool {
    step.is_message() && step.receiver.as_deref() == Some(principal) && step.element(element).is_some()
}

fn checked_later(spec: &ProtocolSpec, after: StepId, principal: &str, element: &str) -> bool {
    spec.steps.iter().any(|s| {
        s.id > after && s.kind == StepKind::Check && s.sender == principal && s.element(element).is_some()
    })
}

/// Dry-runs the receiver's knowledge up to `step` to see whether the
/// element is checked on arrival.
fn receiver_can_compose(spec: &ProtocolSpec, step: &StepSpec, principal: &str, element: &str) -> bool {
    let Ok(mut kb) = knowledge_before(spec, principal, step.id) else { return false };
    for e in &step.elements {
        if e.name == element {
            return kb.compose(&e.term).is_some();
        }
        kb.pattern(&e.term, checked_later(spec, step.id, principal, &e.name));
    }
    false
}

fn knowledge_before(spec: &ProtocolSpec, principal: &str, until: StepId) -> Result<RoleKnowledge, CompileError> {
    let mut sink = Vec::new();
    let mut kb = initial_knowledge(spec, principal);
    for step in spec.steps.iter().filter(|s| s.id < until) {
        compile_step(spec, principal, step, &mut kb, &mut sink, &[])?;
    }
    Ok(kb)
}

fn initial_knowledge(spec: &ProtocolSpec, principal: &str) -> RoleKnowledge {
    let mut kb = RoleKnowledge { known: BTreeMap::new(), opaque: BTreeMap::new(), slots: 0 };
    for p in &spec.principals {
        kb.learn_const(&Term::atom(&p.id, crate::term::Sort::Agent));
    }
    for a in &spec.public {
        kb.learn_const(&Term::Atom(a.clone()));
    }
    if let Some(p) = spec.principal(principal) {
        for t in &p.knows {
            kb.learn_const(t);
        }
    }
    kb
}

fn placements(spec: &ProtocolSpec) -> Result<Vec<Placement>, CompileError> {
    let mut out = Vec::new();
    for q in &spec.queries {
        let no_point = |reason: String| CompileError::NoAcceptancePoint { query: q.to_string(), reason };
        match q {
            Query::Secrecy { .. } => {}
            Query::Authentication { claimant, peer, on } => {
                let first_send = spec
                    .steps
                    .iter()
                    .find(|s| s.is_message() && s.sender == *claimant && s.element(on).is_some())
                    .ok_or_else(|| no_point(format!("{claimant} never sends {on}")))?;
                let candidates: Vec<&StepSpec> =
                    spec.steps.iter().filter(|s| s.id >= first_send.id).collect();
                let end = candidates
                    .iter()
                    .rev()
                    .find(|s| verifies(spec, s, peer, on))
                    .or_else(|| candidates.iter().rev().find(|s| receives(s, peer, on)))
                    .ok_or_else(|| no_point(format!("{peer} never receives or checks {on}")))?;
                let begin = spec
                    .steps
                    .iter().rfind(|s| s.id <= end.id && s.is_message() && s.sender == *claimant && s.element(on).is_some())
                    .expect("first send precedes the acceptance point");
                out.push(Placement {
                    label: q.slug(),
                    begin: Some((claimant.clone(), begin.id)),
                    end: (peer.clone(), end.id),
                    claimant: Some(claimant.clone()),
                    peer: Some(peer.clone()),
                    element: on.clone(),
                });
            }
            Query::Uniqueness { on } => {
                let find = |pred: &dyn Fn(&StepSpec, &str) -> bool| {
                    spec.steps.iter().rev().find_map(|s| {
                        spec.principals.iter().find(|p| pred(s, &p.id)).map(|p| (p.id.clone(), s.id))
                    })
                };
                let end = find(&|s, p| verifies(spec, s, p, on))
                    .or_else(|| find(&|s, p| receives(s, p, on)))
                    .ok_or_else(|| no_point(format!("nobody receives or checks {on}")))?;
                out.push(Placement {
                    label: q.slug(),
                    begin: None,
                    end,
                    claimant: None,
                    peer: None,
                    element: on.clone(),
                });
            }
        }
    }
    Ok(out)
}

fn event_args(p: &Placement, value: Expr) -> Vec<Expr> {
    let mut args = Vec::new();
    for who in [&p.claimant, &p.peer].into_iter().flatten() {
        args.push(Expr::Const(Term::atom(who, crate::term::Sort::Agent)));
    }
    args.push(value);
    args
}

fn compile_step(
    spec: &ProtocolSpec,
    principal: &str,
    step: &StepSpec,
    kb: &mut RoleKnowledge,
    out: &mut Vec<Action>,
    placements: &[Placement],
) -> Result<(), CompileError> {
    let not_composable = |element: &str, term: &Term| CompileError::NotComposable {
        principal: principal.to_string(),
        step: step.id,
        element: element.to_string(),
        term: term.to_string(),
    };
    let acts = step.sender == principal;
    if acts {
        for atom in &step.fresh {
            let slot = kb.slot();
            out.push(Action::Fresh { slot, atom: atom.clone() });
            kb.known.insert(Term::Atom(atom.clone()), Expr::Slot(slot));
        }
    }
    match step.kind {
        StepKind::Compute if acts => {
            for e in &step.elements {
                let expr = kb.compose(&e.term).ok_or_else(|| not_composable(&e.name, &e.term))?;
                if !kb.known.contains_key(&e.term) {
                    let slot = kb.slot();
                    out.push(Action::Assign { slot, expr });
                    kb.known.insert(e.term.clone(), Expr::Slot(slot));
                }
            }
        }
        StepKind::Check if acts => {
            for e in &step.elements {
                let slot = match (kb.opaque.get(&e.term), kb.known.get(&e.term)) {
                    (Some(s), _) => *s,
                    (None, Some(Expr::Slot(s))) => *s,
                    _ => return Err(not_composable(&e.name, &e.term)),
                };
                let expr = match kb.known.get(&e.term) {
                    Some(x) if *x != Expr::Slot(slot) => x.clone(),
                    _ => kb.compose_fresh(&e.term).ok_or_else(|| not_composable(&e.name, &e.term))?,
                };
                out.push(Action::CheckEqual { step: step.id, element: e.name.clone(), slot, expr });
                push_ends(placements, principal, step.id, &e.name, Expr::Slot(slot), out);
            }
        }
        StepKind::Send | StepKind::OutOfBand if acts => {
            let mut elements = Vec::new();
            for e in &step.elements {
                let expr = kb.compose(&e.term).ok_or_else(|| not_composable(&e.name, &e.term))?;
                for p in placements {
                    if p.begin.as_ref().is_some_and(|(who, at)| who == principal && *at == step.id)
                        && p.element == e.name
                    {
                        out.push(Action::Event {
                            kind: EventKind::Begin,
                            label: p.label.clone(),
                            args: event_args(p, expr.clone()),
                        });
                    }
                }
                elements.push((e.name.clone(), expr));
            }
            out.push(Action::Send {
                step: step.id,
                channel: step.channel.expect("message steps have a channel"),
                to: step.receiver.clone().expect("message steps have a receiver"),
                elements,
            });
        }
        StepKind::Send | StepKind::OutOfBand if step.receiver.as_deref() == Some(principal) => {
            let mut elements = Vec::new();
            for e in &step.elements {
                let opaque = checked_later(spec, step.id, principal, &e.name);
                elements.push((e.name.clone(), kb.pattern(&e.term, opaque)));
            }
            let slots: Vec<(String, usize)> = elements.iter().map(|(n, p)| (n.clone(), p.slot)).collect();
            out.push(Action::Receive {
                step: step.id,
                channel: step.channel.expect("message steps have a channel"),
                from: step.sender.clone(),
                elements,
            });
            for (name, slot) in slots {
                push_ends(placements, principal, step.id, &name, Expr::Slot(slot), out);
            }
        }
        _ => {}
    }
    Ok(())
}

fn push_ends(placements: &[Placement], principal: &str, step: StepId, element: &str, value: Expr, out: &mut Vec<Action>) {
    for p in placements {
        if p.end.0 == principal && p.end.1 == step && p.element == element {
            out.push(Action::Event { kind: EventKind::End, label: p.label.clone(), args: event_args(p, value.clone()) });
        }
    }
}

/// One process per principal, in declaration order.
pub fn compile(spec: &ProtocolSpec) -> Result<Vec<RoleProcess>, CompileError> {
    let placements = placements(spec)?;
    let mut processes = Vec::new();
    for principal in &spec.principals {
        let mut kb = initial_knowledge(spec, &principal.id);
        let mut actions = Vec::new();
        for step in &spec.steps {
            compile_step(spec, &principal.id, step, &mut kb, &mut actions, &placements)?;
        }
        link_block_checks(&mut actions);
        processes.push(RoleProcess { principal: principal.id.clone(), slots: kb.slots, actions });
    }
    Ok(processes)
}

/// Records on each opaque element the check it will later face, provided
/// nothing reads the slot before that check.
fn link_block_checks(actions: &mut [Action]) {
    for r in 0..actions.len() {
        let Action::Receive { elements, .. } = &actions[r] else { continue };
        let mut expects = Vec::new();
        for (_, pat) in elements {
            if pat.check != PatternCheck::Any {
                expects.push(None);
                continue;
            }
            let mut expect = None;
            let mut crossed = false;
            for a in &actions[r + 1..] {
                match a {
                    Action::CheckEqual { slot, expr, .. } if *slot == pat.slot => {
                        expect = Some((expr.clone(), crossed));
                        break;
                    }
                    Action::Receive { .. } => crossed = true,
                    a if a.reads(pat.slot) => break,
                    _ => {}
                }
            }
            expects.push(expect);
        }
        if let Action::Receive { elements, .. } = &mut actions[r] {
            for ((_, pat), e) in elements.iter_mut().zip(expects) {
                if let Some((expr, deferred)) = e {
                    pat.expect = Some(expr);
                    pat.deferred = deferred;
                }
            }
        }
    }
}
