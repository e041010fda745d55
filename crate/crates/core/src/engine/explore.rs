//! Bounded search over interleavings of honest sessions and attacker moves.
//!
//! After a role instance receives a message it runs all of its local
//! actions up to its next receive in one transition. The search is
//! uniform-cost on (injections, events) with a generation counter as the
//! final tie-break, so the first violation popped for each query has a
//! minimal trace under that order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::process::{Action, EventKind, PatternCheck, RecvPattern, RoleProcess};
use super::trace::{AttackTrace, Instance, TraceEvent, Witness};
use crate::spec::{AttackerModel, CapabilityKind, ChannelClass, ProtocolSpec, Query, StepId};
use crate::term::{standard_rules, Atom, DeductionRule, KnowledgeError, KnowledgeSet, Sort, Term};

pub const DEFAULT_STATE_CEILING: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub sessions_per_role: usize,
    pub attacker_fresh_budget: usize,
    /// `None` uses the specification's default bound.
    pub depth_bound: Option<usize>,
    pub state_ceiling: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            sessions_per_role: 2,
            attacker_fresh_budget: 2,
            depth_bound: None,
            state_ceiling: DEFAULT_STATE_CEILING,
        }
    }
}

impl SessionConfig {
    pub fn with_sessions(sessions_per_role: usize) -> Self {
        SessionConfig { sessions_per_role: sessions_per_role.max(1), ..Self::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub states_explored: usize,
    pub states_seen: usize,
    pub transitions: usize,
    pub max_closure_size: usize,
    /// Not serialized so reports stay byte-stable.
    #[serde(skip)]
    pub wall_time_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Compile(#[from] super::process::CompileError),
    #[error(transparent)]
    Closure(#[from] KnowledgeError),
    #[error("search exceeded the ceiling of {ceiling} states ({} explored)", stats.states_explored)]
    SearchBudgetExceeded { ceiling: usize, stats: SearchStats },
    #[error("replay diverged at event {index}")]
    ReplayDivergence { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum QueryVerdict {
    HoldsWithinBounds,
    Violated { trace: AttackTrace },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: Query,
    #[serde(flatten)]
    pub verdict: QueryVerdict,
}

impl QueryResult {
    pub fn holds(&self) -> bool {
        self.verdict == QueryVerdict::HoldsWithinBounds
    }

    pub fn trace(&self) -> Option<&AttackTrace> {
        match &self.verdict {
            QueryVerdict::Violated { trace } => Some(trace),
            QueryVerdict::HoldsWithinBounds => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub sessions_per_role: usize,
    pub results: Vec<QueryResult>,
    pub stats: SearchStats,
    /// Every term the attacker observed in some explored state.
    #[serde(skip)]
    pub observed: BTreeSet<Term>,
}

impl VerificationResult {
    pub fn all_hold(&self) -> bool {
        self.results.iter().all(QueryResult::holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &AttackTrace> {
        self.results.iter().filter_map(QueryResult::trace)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Attacker-side facts taken from the specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackerContext {
    pub model: AttackerModel,
    /// Public atoms, principal names and directory entries.
    pub initial: Vec<Term>,
    pub default_depth_bound: usize,
}

impl AttackerContext {
    pub fn from_spec(spec: &ProtocolSpec) -> Self {
        let mut initial: Vec<Term> = spec.principals.iter().map(|p| Term::atom(&p.id, Sort::Agent)).collect();
        initial.extend(spec.public.iter().map(|a| Term::Atom(a.clone())));
        for cap in spec.attacker.effective() {
            if cap.kind != CapabilityKind::KnowPublicDirectory {
                continue;
            }
            for name in &cap.directory {
                if let Some(t) = find_atom(spec, name).or_else(|| spec.element_term(name).cloned()) {
                    initial.push(t);
                }
            }
        }
        AttackerContext { model: spec.attacker.clone(), initial, default_depth_bound: spec.default_depth_bound() }
    }

    fn can(&self, kind: CapabilityKind, channel: ChannelClass, element: Option<&str>) -> bool {
        self.model.effective().iter().any(|c| c.kind == kind && c.applies_to(Some(channel), element))
    }

    /// Whether the attacker reads `element` sent over `channel`.
    pub fn sees(&self, channel: ChannelClass, element: &str) -> bool {
        match channel {
            ChannelClass::Insecure | ChannelClass::Authenticated => {
                self.can(CapabilityKind::EavesdropWired, channel, Some(element))
                    || self.can(CapabilityKind::EavesdropWireless, channel, Some(element))
            }
            ChannelClass::ConfidentialAuthenticated => false,
            ChannelClass::OutOfBandKeypad => self.can(CapabilityKind::ObserveKeypadInput, channel, Some(element)),
        }
    }

    pub fn injects(&self, channel: ChannelClass) -> bool {
        channel.accepts_injection() && self.can(CapabilityKind::InjectMessages, channel, None)
    }
}

fn find_atom(spec: &ProtocolSpec, name: &str) -> Option<Term> {
    let in_steps = spec.steps.iter().flat_map(|s| s.elements.iter().map(|e| &e.term));
    let in_knows = spec.principals.iter().flat_map(|p| p.knows.iter());
    in_steps
        .chain(in_knows)
        .flat_map(|t| t.atoms())
        .find(|a| &*a.name == name)
        .map(|a| Term::Atom(a.clone()))
        .or_else(|| spec.public.iter().find(|a| &*a.name == name).map(|a| Term::Atom(a.clone())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LabelKind {
    Auth,
    Unique,
}

/// Everything fixed for one search.
struct World<'a> {
    processes: &'a [RoleProcess],
    ctx: &'a AttackerContext,
    sessions: usize,
    rules: Vec<DeductionRule>,
    depth_bound: usize,
    labels: BTreeMap<String, (usize, LabelKind)>,
    /// Concrete secrecy targets per query index.
    targets: BTreeMap<usize, Vec<Term>>,
    /// Fresh atom names with their sort.
    fresh: BTreeMap<String, Sort>,
    adversary: Vec<Term>,
    instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct InstState {
    pc: usize,
    env: Vec<Option<Term>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Pending {
    step: StepId,
    to: String,
    /// Set on channels the attacker cannot redirect: only the receiver
    /// instance with this session number may take the message.
    session: Option<usize>,
    payload: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    insts: Vec<InstState>,
    pending: Vec<Pending>,
    observed: BTreeSet<Term>,
    begins: BTreeSet<(String, Vec<Term>)>,
    accepted: BTreeMap<(String, Term), usize>,
    /// Highest attacker atom index injected so far. Attacker atoms are
    /// interchangeable, so only the next unused one is ever introduced.
    adv_used: usize,
}

struct Violation {
    query: usize,
    /// Number of transition events to keep.
    keep: usize,
    witness: Witness,
    learn: Option<TraceEvent>,
}

struct Outcome {
    state: State,
    events: Vec<TraceEvent>,
    violations: Vec<Violation>,
    observed_new: Vec<Term>,
}

impl<'a> World<'a> {
    fn new(
        processes: &'a [RoleProcess],
        ctx: &'a AttackerContext,
        config: &SessionConfig,
        queries: &'a [Query],
    ) -> Self {
        let sessions = config.sessions_per_role.max(1);
        let mut fresh = BTreeMap::new();
        for p in processes {
            for a in &p.actions {
                if let Action::Fresh { atom, .. } = a {
                    fresh.insert(atom.name.to_string(), atom.sort);
                }
            }
        }
        let mut labels = BTreeMap::new();
        let mut targets = BTreeMap::new();
        for (i, q) in queries.iter().enumerate() {
            match q {
                Query::Secrecy { target } => {
                    targets.insert(i, instantiate_all(target, &fresh, sessions));
                }
                Query::Authentication { .. } => {
                    labels.insert(q.slug(), (i, LabelKind::Auth));
                }
                Query::Uniqueness { .. } => {
                    labels.insert(q.slug(), (i, LabelKind::Unique));
                }
            }
        }
        let adversary = (1..=config.attacker_fresh_budget)
            .map(|i| Term::atom(&format!("adv#{i}"), Sort::Nonce))
            .collect();
        let instances = processes
            .iter()
            .flat_map(|p| (1..=sessions).map(move |s| Instance { role: p.principal.clone(), session: s }))
            .collect();
        World {
            processes,
            ctx,
            sessions,
            rules: standard_rules(),
            depth_bound: config.depth_bound.unwrap_or(ctx.default_depth_bound),
            labels,
            targets,
            fresh,
            adversary,
            instances,
        }
    }

    fn process_of(&self, inst: usize) -> &RoleProcess {
        &self.processes[inst / self.sessions]
    }

    fn initial(&self) -> Result<(Outcome, Arc<KnowledgeSet>), EngineError> {
        let mut observed: BTreeSet<Term> = self.ctx.initial.iter().cloned().collect();
        observed.extend(self.adversary.iter().cloned());
        let mut state = State {
            insts: self
                .instances
                .iter()
                .enumerate()
                .map(|(i, _)| InstState { pc: 0, env: vec![None; self.process_of(i).slots] })
                .collect(),
            pending: Vec::new(),
            observed: observed.clone(),
            begins: BTreeSet::new(),
            accepted: BTreeMap::new(),
            adv_used: 0,
        };
        let mut events = Vec::new();
        let mut violations = Vec::new();
        let mut observed_new = Vec::new();
        for i in 0..self.instances.len() {
            let out = self
                .run(&state, i, None)
                .expect("initial blocks contain no receives and cannot fail checks");
            let offset = events.len();
            violations.extend(out.violations.into_iter().map(|mut v| {
                v.keep += offset;
                v
            }));
            events.extend(out.events);
            observed_new.extend(out.observed_new);
            state = out.state;
        }
        let kb = KnowledgeSet::close_with_ceiling(
            state.observed.iter().cloned(),
            &self.rules,
            self.depth_bound,
            crate::term::DEFAULT_CLOSURE_CEILING,
        )?;
        Ok((Outcome { state, events, violations, observed_new }, Arc::new(kb)))
    }

    /// Delivers `payload` to instance `i`, consuming the matching pending
    /// message when the delivery is honest.
    fn deliver(&self, state: &State, i: usize, payload: &Term, honest: bool) -> Option<Outcome> {
        if !honest {
            return self.run(state, i, Some(payload));
        }
        let Some(Action::Receive { step, .. }) = self.process_of(i).actions.get(state.insts[i].pc) else {
            return None;
        };
        let session = self.instances[i].session;
        let at = state.pending.iter().position(|p| {
            p.step == *step
                && p.to == self.process_of(i).principal
                && p.session.is_none_or(|s| s == session)
                && p.payload == *payload
        })?;
        let mut base = state.clone();
        base.pending.remove(at);
        self.run(&base, i, Some(payload))
    }

    /// Runs instance `i` from its current position. With `payload`, the
    /// instance must be waiting at a receive, which consumes it first.
    fn run(&self, state: &State, i: usize, payload: Option<&Term>) -> Option<Outcome> {
        let proc = self.process_of(i);
        let instance = &self.instances[i];
        let mut st = state.clone();
        let mut events = Vec::new();
        let mut violations = Vec::new();
        let mut observed_new = Vec::new();
        let inst = &mut st.insts[i];
        if let Some(payload) = payload {
            let Some(Action::Receive { step, elements, .. }) = proc.actions.get(inst.pc) else {
                return None;
            };
            let parts = payload.untuple(elements.len())?;
            for ((_, pat), value) in elements.iter().zip(&parts) {
                if !pat.matches(value, &mut inst.env) {
                    return None;
                }
            }
            events.push(TraceEvent::HonestReceive { instance: instance.clone(), step: *step, term: payload.clone() });
            inst.pc += 1;
        }
        while let Some(action) = proc.actions.get(inst.pc) {
            match action {
                Action::Receive { .. } => break,
                Action::Fresh { slot, atom } => {
                    inst.env[*slot] = Some(Term::atom(&format!("{}#{}", atom.name, instance.session), atom.sort));
                }
                Action::Assign { slot, expr } => inst.env[*slot] = Some(expr.eval(&inst.env)?),
                Action::CheckEqual { slot, expr, .. } => {
                    if inst.env[*slot] != Some(expr.eval(&inst.env)?) {
                        return None;
                    }
                }
                Action::Send { step, channel, to, elements } => {
                    let values = elements.iter().map(|(_, e)| e.eval(&inst.env)).collect::<Option<Vec<_>>>()?;
                    for ((name, _), v) in elements.iter().zip(&values) {
                        if self.ctx.sees(*channel, name) && st.observed.insert(v.clone()) {
                            observed_new.push(v.clone());
                        }
                    }
                    let term = Term::tuple(values);
                    events.push(TraceEvent::HonestSend {
                        instance: instance.clone(),
                        step: *step,
                        channel: *channel,
                        term: term.clone(),
                    });
                    let session = session_bound(*channel).then_some(instance.session);
                    let p = Pending { step: *step, to: to.clone(), session, payload: term };
                    let at = st.pending.binary_search(&p).unwrap_or_else(|e| e);
                    st.pending.insert(at, p);
                }
                Action::Event { kind, label, args } => {
                    let args = args.iter().map(|a| a.eval(&inst.env)).collect::<Option<Vec<_>>>()?;
                    match kind {
                        EventKind::Begin => {
                            st.begins.insert((label.clone(), args.clone()));
                            events.push(TraceEvent::Begin { label: label.clone(), args });
                        }
                        EventKind::End => {
                            events.push(TraceEvent::End { label: label.clone(), args: args.clone() });
                            let Some(&(query, kind)) = self.labels.get(label) else { continue };
                            match kind {
                                LabelKind::Auth if !st.begins.contains(&(label.clone(), args.clone())) => {
                                    violations.push(Violation {
                                        query,
                                        keep: events.len(),
                                        witness: Witness::Correspondence { label: label.clone(), args },
                                        learn: None,
                                    });
                                }
                                LabelKind::Auth => {}
                                LabelKind::Unique => {
                                    let value = args.last().cloned().expect("events carry a value");
                                    let n = st.accepted.entry((label.clone(), value.clone())).or_insert(0);
                                    *n += 1;
                                    if *n == 2 {
                                        violations.push(Violation {
                                            query,
                                            keep: events.len(),
                                            witness: Witness::Duplicate { label: label.clone(), value },
                                            learn: None,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
            inst.pc += 1;
        }
        Some(Outcome { state: st, events, violations, observed_new })
    }

    fn extend(&self, kb: &Arc<KnowledgeSet>, new: &[Term]) -> Result<Arc<KnowledgeSet>, EngineError> {
        if new.is_empty() {
            Ok(kb.clone())
        } else {
            Ok(Arc::new(kb.extended(new.iter().cloned())?))
        }
    }

    fn secrecy_violations(&self, kb: &KnowledgeSet, skip: &BTreeSet<usize>, keep: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        for (q, targets) in &self.targets {
            if skip.contains(q) {
                continue;
            }
            for t in targets {
                if !kb.contains(t) {
                    continue;
                }
                if let Some(d) = kb.derivation(t) {
                    out.push(Violation {
                        query: *q,
                        keep,
                        learn: Some(TraceEvent::AttackerLearn { term: t.clone(), rule: d.last_rule().to_string() }),
                        witness: Witness::Derivation { derivation: d },
                    });
                    break;
                }
            }
        }
        out
    }

    /// Enabled transitions from `state`, honest deliveries first.
    fn successors(&self, state: &State, kb: &KnowledgeSet) -> Vec<(Option<ChannelClass>, usize, Term)> {
        let mut honest = Vec::new();
        let mut injected = Vec::new();
        for (i, inst) in state.insts.iter().enumerate() {
            let proc = self.process_of(i);
            let Some(Action::Receive { step, channel, elements, .. }) = proc.actions.get(inst.pc) else { continue };
            let mut seen = BTreeSet::new();
            let session = self.instances[i].session;
            for p in &state.pending {
                if p.step == *step
                    && p.to == proc.principal
                    && p.session.is_none_or(|s| s == session)
                    && seen.insert(&p.payload)
                {
                    honest.push((None, i, p.payload.clone()));
                }
            }
            if self.ctx.injects(*channel) {
                let adv = (state.adv_used + 1).min(self.adversary.len());
                for payload in self.injections(elements, &inst.env, kb, adv) {
                    injected.push((Some(*channel), i, payload));
                }
            }
        }
        honest.extend(injected);
        honest
    }

    /// A delivery that commutes with every other transition and cannot be
    /// disabled: a session-bound message whose handler emits no events.
    /// Taking it alone loses no reachable violation.
    fn silent(
        &self,
        state: &State,
        successors: &[(Option<ChannelClass>, usize, Term)],
    ) -> Option<(Option<ChannelClass>, usize, Term)> {
        successors.iter().find_map(|(channel, i, payload)| {
            let Some(Action::Receive { channel: c, .. }) = self.process_of(*i).actions.get(state.insts[*i].pc) else {
                return None;
            };
            if channel.is_some() || !session_bound(*c) || self.ctx.injects(*c) {
                return None;
            }
            let out = self.deliver(state, *i, payload, true)?;
            let quiet = out.events.iter().all(|e| !matches!(e, TraceEvent::Begin { .. } | TraceEvent::End { .. }));
            quiet.then(|| (None, *i, payload.clone()))
        })
    }

    /// Candidate payloads the attacker can build for a receive.
    fn injections(
        &self,
        elements: &[(String, RecvPattern)],
        env: &[Option<Term>],
        kb: &KnowledgeSet,
        adv: usize,
    ) -> Vec<Term> {
        let mut per_element: Vec<Vec<Term>> = Vec::new();
        for (_, pat) in elements {
            let mut cands: Vec<Term> = match &pat.expect {
                Some(e) => match e.eval(env) {
                    Some(v) if !pat.deferred => vec![v],
                    _ => self.against_check(pat, e, env, kb, adv),
                },
                None => self.candidates(pat, env, kb, adv).into_iter().collect(),
            };
            cands.retain(|c| {
                let mut scratch = env.to_vec();
                kb.contains(c) && (depends_on_unbound(pat, env) || pat.matches(c, &mut scratch))
            });
            cands.sort_by(|a, b| a.cmp_by_size(b));
            if cands.is_empty() {
                return Vec::new();
            }
            per_element.push(cands);
        }
        let mut out = vec![Vec::new()];
        for cands in per_element {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Term>| {
                    cands.iter().map(move |c| {
                        let mut v = prefix.clone();
                        v.push(c.clone());
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(Term::tuple).collect()
    }

    /// Candidates for an opaque slot that is only compared later: the ones
    /// that can still pass the comparison, plus a single representative of
    /// those that cannot (they all behave alike until the comparison fails).
    fn against_check(
        &self,
        pat: &RecvPattern,
        expect: &super::process::Expr,
        env: &[Option<Term>],
        kb: &KnowledgeSet,
        adv: usize,
    ) -> Vec<Term> {
        let mut all: Vec<Term> = self.candidates(pat, env, kb, adv).into_iter().collect();
        if let Some(v) = expect.eval(env) {
            all.push(v);
        }
        all.sort_by(|a, b| a.cmp_by_size(b));
        all.dedup();
        let (fitting, doomed): (Vec<Term>, Vec<Term>) = all.into_iter().partition(|c| expect.fits(c, env));
        let mut out: Vec<Term> = fitting.into_iter().filter(|c| kb.contains(c)).collect();
        if pat.deferred {
            out.extend(doomed.into_iter().find(|c| kb.contains(c)));
        }
        out
    }

    /// Typed candidates: atoms stand only for atoms of the same sort or for
    /// attacker atoms, compound positions only for terms of the same shape.
    fn candidates(&self, pat: &RecvPattern, env: &[Option<Term>], kb: &KnowledgeSet, adv: usize) -> BTreeSet<Term> {
        let analysed_with = |pred: &dyn Fn(&Term) -> bool| -> BTreeSet<Term> {
            kb.analysed().filter(|t| pred(t)).cloned().collect()
        };
        match &pat.check {
            PatternCheck::Eq(e) => match e.eval(env) {
                Some(v) => [v].into(),
                None => self.shapes(&pat.shape, adv),
            },
            PatternCheck::Pair(l, r) => {
                let ls = self.candidates(l, env, kb, adv);
                let rs = self.candidates(r, env, kb, adv);
                ls.iter().flat_map(|a| rs.iter().map(move |b| Term::pair(a.clone(), b.clone()))).collect()
            }
            PatternCheck::SDec { key, inner } => match key.eval(env) {
                Some(k) => {
                    let mut out = analysed_with(&|t| matches!(t, Term::SEnc(_, kk) if **kk == k));
                    out.extend(self.candidates(inner, env, kb, adv).into_iter().map(|m| Term::senc(m, k.clone())));
                    out
                }
                None => self.shapes(&pat.shape, adv),
            },
            PatternCheck::XorKey { key, plain } => match key.eval(env) {
                Some(k) => {
                    let mut out = analysed_with(&|t| matches!(t, Term::XorMask(_, kk) if **kk == k));
                    out.extend(self.candidates(plain, env, kb, adv).into_iter().map(|m| Term::xor(m, k.clone())));
                    out
                }
                None => self.shapes(&pat.shape, adv),
            },
            PatternCheck::XorPlain { plain, key } => match plain.eval(env) {
                Some(m) => {
                    let mut out = analysed_with(&|t| matches!(t, Term::XorMask(p, _) if **p == m));
                    out.extend(self.candidates(key, env, kb, adv).into_iter().map(|k| Term::xor(m.clone(), k)));
                    out
                }
                None => self.shapes(&pat.shape, adv),
            },
            PatternCheck::Any => {
                let mut out: BTreeSet<Term> =
                    kb.analysed().filter(|t| typed_match(&pat.shape, t, adv)).cloned().collect();
                out.extend(self.shapes(&pat.shape, adv));
                out
            }
        }
    }

    /// Concrete terms shaped like a specification term, with every atom
    /// replaced by a value of the same kind the attacker might hold.
    fn shapes(&self, shape: &Term, adv: usize) -> BTreeSet<Term> {
        match shape {
            Term::Atom(a) => self.leaves(a, adv),
            _ => {
                let f = shape.functor().expect("compound");
                let mut acc: Vec<Vec<Term>> = vec![Vec::new()];
                for arg in shape.args() {
                    let opts = self.shapes(arg, adv);
                    acc = acc
                        .into_iter()
                        .flat_map(|prefix| {
                            opts.iter().map(move |o| {
                                let mut v = prefix.clone();
                                v.push(o.clone());
                                v
                            })
                        })
                        .collect();
                }
                acc.into_iter().map(|args| Term::apply(f, args)).collect()
            }
        }
    }

    fn leaves(&self, a: &Atom, adv: usize) -> BTreeSet<Term> {
        let mut out: BTreeSet<Term> = self.adversary[..adv].iter().cloned().collect();
        if self.fresh.contains_key(&*a.name) {
            for s in 1..=self.sessions {
                out.insert(Term::atom(&format!("{}#{s}", a.name), a.sort));
            }
        } else {
            out.insert(Term::Atom(a.clone()));
        }
        out
    }
}

fn adv_index(t: &Term) -> usize {
    t.atoms().filter_map(|a| a.name.strip_prefix("adv#")?.parse().ok()).max().unwrap_or(0)
}

fn typed_match(shape: &Term, t: &Term, adv: usize) -> bool {
    match (shape, t) {
        (Term::Atom(a), Term::Atom(b)) => b.sort == a.sort || (1..=adv).contains(&adv_index(t)),
        (Term::Atom(_), _) => false,
        _ => {
            shape.functor() == t.functor()
                && shape.args().into_iter().zip(t.args()).all(|(x, y)| typed_match(x, y, adv))
        }
    }
}

/// Channels whose messages the attacker can neither inject into nor
/// redirect to another session.
fn session_bound(channel: ChannelClass) -> bool {
    matches!(channel, ChannelClass::ConfidentialAuthenticated | ChannelClass::OutOfBandKeypad)
}

fn depends_on_unbound(pat: &RecvPattern, env: &[Option<Term>]) -> bool {
    use super::process::Expr;
    fn expr_unbound(e: &Expr, env: &[Option<Term>]) -> bool {
        match e {
            Expr::Const(_) => false,
            Expr::Slot(i) => env.get(*i).is_none_or(Option::is_none),
            Expr::App(_, args) => args.iter().any(|a| expr_unbound(a, env)),
        }
    }
    match &pat.check {
        PatternCheck::Any => false,
        PatternCheck::Eq(e) => expr_unbound(e, env),
        PatternCheck::Pair(l, r) => depends_on_unbound(l, env) || depends_on_unbound(r, env),
        PatternCheck::SDec { key, inner: p } | PatternCheck::XorKey { key, plain: p } => {
            expr_unbound(key, env) || depends_on_unbound(p, env)
        }
        PatternCheck::XorPlain { plain, key } => expr_unbound(plain, env) || depends_on_unbound(key, env),
    }
}

/// All instantiations of fresh atoms in `target` with session numbers.
fn instantiate_all(target: &Term, fresh: &BTreeMap<String, Sort>, sessions: usize) -> Vec<Term> {
    let mut names: Vec<String> = target
        .atoms()
        .filter(|a| fresh.contains_key(&*a.name))
        .map(|a| a.name.to_string())
        .collect();
    names.sort();
    names.dedup();
    let mut combos: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new()];
    for n in &names {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (1..=sessions).map(move |s| {
                    let mut c = c.clone();
                    c.insert(n.clone(), s);
                    c
                })
            })
            .collect();
    }
    combos.iter().map(|c| rename(target, c)).collect()
}

fn rename(t: &Term, sessions: &BTreeMap<String, usize>) -> Term {
    match t {
        Term::Atom(a) => match sessions.get(&*a.name) {
            Some(s) => Term::atom(&format!("{}#{s}", a.name), a.sort),
            None => t.clone(),
        },
        _ => Term::apply(
            t.functor().expect("compound"),
            t.args().into_iter().map(|a| rename(a, sessions)).collect(),
        ),
    }
}

struct Node {
    parent: Option<usize>,
    events: Vec<TraceEvent>,
}

fn trace_of(nodes: &[Node], id: usize, last: &[TraceEvent]) -> Vec<TraceEvent> {
    let mut chain = Vec::new();
    let mut cur = nodes[id].parent;
    while let Some(i) = cur {
        chain.push(i);
        cur = nodes[i].parent;
    }
    let mut events = Vec::new();
    for i in chain.into_iter().rev() {
        events.extend(nodes[i].events.iter().cloned());
    }
    events.extend(last.iter().cloned());
    events
}

/// Exhaustive bounded search.
pub fn explore(
    processes: &[RoleProcess],
    ctx: &AttackerContext,
    config: &SessionConfig,
    queries: &[Query],
) -> Result<VerificationResult, EngineError> {
    let started = Instant::now();
    let world = World::new(processes, ctx, config, queries);
    let mut stats = SearchStats::default();
    let mut found: BTreeMap<usize, AttackTrace> = BTreeMap::new();
    let mut observed_union = BTreeSet::new();

    let (init, kb0) = world.initial()?;
    let mut nodes: Vec<Node> = Vec::new();
    let mut frontier: HashMap<usize, (State, Arc<KnowledgeSet>, Vec<Violation>)> = HashMap::new();
    let mut best: HashMap<State, (usize, usize)> = HashMap::new();
    let mut done: std::collections::HashSet<State> = std::collections::HashSet::new();
    let mut heap = BinaryHeap::new();

    let mut init_violations = init.violations;
    init_violations.extend(world.secrecy_violations(&kb0, &BTreeSet::new(), init.events.len()));
    nodes.push(Node { parent: None, events: init.events });
    best.insert(init.state.clone(), (0, 0));
    frontier.insert(0, (init.state, kb0, init_violations));
    heap.push(Reverse(((0usize, 0usize), 0usize)));

    while let Some(Reverse((cost, id))) = heap.pop() {
        if found.len() == queries.len() {
            break;
        }
        let (state, kb, violations) = frontier.remove(&id).expect("queued nodes have a frontier entry");
        for v in violations {
            if found.contains_key(&v.query) {
                continue;
            }
            let mut last: Vec<TraceEvent> = nodes[id].events[..v.keep].to_vec();
            last.extend(v.learn);
            found.insert(
                v.query,
                AttackTrace { violated: queries[v.query].clone(), events: trace_of(&nodes, id, &last), witness: v.witness },
            );
        }
        if found.len() == queries.len() || done.contains(&state) {
            continue;
        }
        if best.get(&state).is_some_and(|b| *b < cost) {
            continue;
        }
        done.insert(state.clone());
        stats.states_explored += 1;
        stats.max_closure_size = stats.max_closure_size.max(kb.analysed_len());
        observed_union.extend(state.observed.iter().cloned());

        let mut successors = world.successors(&state, &kb);
        if let Some(t) = world.silent(&state, &successors) {
            successors = vec![t];
        }
        for (channel, inst, payload) in successors {
            let Some(mut out) = world.deliver(&state, inst, &payload, channel.is_none()) else { continue };
            if channel.is_some() {
                out.state.adv_used = out.state.adv_used.max(adv_index(&payload));
            }
            stats.transitions += 1;
            let mut events = Vec::with_capacity(out.events.len() + 1);
            if let Some(channel) = channel {
                events.push(TraceEvent::AttackerInject { channel, term: payload.clone() });
            }
            let offset = events.len();
            events.extend(out.events);
            let kb2 = world.extend(&kb, &out.observed_new)?;
            let mut violations: Vec<Violation> = out
                .violations
                .into_iter()
                .filter(|v| !found.contains_key(&v.query))
                .map(|mut v| {
                    v.keep += offset;
                    v
                })
                .collect();
            if !out.observed_new.is_empty() {
                let skip: BTreeSet<usize> = found.keys().copied().collect();
                violations.extend(world.secrecy_violations(&kb2, &skip, events.len()));
            }
            let new_cost = (cost.0 + usize::from(channel.is_some()), cost.1 + events.len());
            let improves = best.get(&out.state).is_none_or(|b| new_cost < *b);
            if !improves && violations.is_empty() {
                continue;
            }
            if improves {
                best.insert(out.state.clone(), new_cost);
            }
            if best.len() > config.state_ceiling {
                stats.states_seen = best.len();
                stats.wall_time_ms = started.elapsed().as_millis();
                return Err(EngineError::SearchBudgetExceeded { ceiling: config.state_ceiling, stats });
            }
            let nid = nodes.len();
            nodes.push(Node { parent: Some(id), events });
            frontier.insert(nid, (out.state, kb2, violations));
            heap.push(Reverse((new_cost, nid)));
        }
    }

    stats.states_seen = best.len();
    stats.wall_time_ms = started.elapsed().as_millis();
    let results = queries
        .iter()
        .enumerate()
        .map(|(i, q)| QueryResult {
            query: q.clone(),
            verdict: match found.remove(&i) {
                Some(trace) => QueryVerdict::Violated { trace },
                None => QueryVerdict::HoldsWithinBounds,
            },
        })
        .collect();
    Ok(VerificationResult { sessions_per_role: world.sessions, results, stats, observed: observed_union })
}

/// Re-executes a trace. `Ok(true)` when the violation is reproduced.
pub fn replay(
    trace: &AttackTrace,
    processes: &[RoleProcess],
    ctx: &AttackerContext,
    config: &SessionConfig,
    queries: &[Query],
) -> Result<bool, EngineError> {
    let events = &trace.events;
    if events.is_empty() {
        return Err(EngineError::ReplayDivergence { index: 0 });
    }
    let world = World::new(processes, ctx, config, queries);
    let Some(query) = queries.iter().position(|q| *q == trace.violated) else {
        return Ok(false);
    };
    let (init, mut kb) = world.initial()?;
    let mut reproduced = BTreeSet::new();
    let compare = |produced: &[TraceEvent], at: usize| -> Result<(), EngineError> {
        for (j, e) in produced.iter().enumerate() {
            match events.get(at + j) {
                Some(t) if t != e => return Err(EngineError::ReplayDivergence { index: at + j }),
                _ => {}
            }
        }
        Ok(())
    };
    compare(&init.events, 0)?;
    let note = |vs: &[Violation], base: usize, reproduced: &mut BTreeSet<usize>| {
        for v in vs {
            if base + v.keep <= events.len() {
                reproduced.insert(v.query);
            }
        }
    };
    note(&init.violations, 0, &mut reproduced);
    let mut state = init.state;
    let mut idx = init.events.len();
    while idx < events.len() {
        let (channel, start) = match &events[idx] {
            TraceEvent::AttackerLearn { term, .. } => {
                if !kb.contains(term) {
                    return Err(EngineError::ReplayDivergence { index: idx });
                }
                idx += 1;
                continue;
            }
            TraceEvent::AttackerInject { channel, term } => {
                let derivable = kb.contains(term)
                    || matches!(events.get(idx + 1), Some(TraceEvent::HonestReceive { term: t, .. }) if t == term)
                        && term_parts_derivable(&world, &state, &events[idx + 1], &kb);
                if !world.ctx.injects(*channel) || !derivable {
                    return Err(EngineError::ReplayDivergence { index: idx });
                }
                (Some(*channel), idx + 1)
            }
            TraceEvent::HonestReceive { .. } => (None, idx),
            _ => return Err(EngineError::ReplayDivergence { index: idx }),
        };
        let TraceEvent::HonestReceive { instance, step, term } = events
            .get(start)
            .ok_or(EngineError::ReplayDivergence { index: start })?
        else {
            return Err(EngineError::ReplayDivergence { index: start });
        };
        if let (Some(_), TraceEvent::AttackerInject { term: injected, .. }) = (channel, &events[idx]) {
            if injected != term {
                return Err(EngineError::ReplayDivergence { index: start });
            }
        }
        let Some(i) = world.instances.iter().position(|x| x == instance) else {
            return Err(EngineError::ReplayDivergence { index: start });
        };
        let proc = world.process_of(i);
        match proc.actions.get(state.insts[i].pc) {
            Some(Action::Receive { step: s, channel: c, .. })
                if s == step && channel.is_none_or(|ch| ch == *c) => {}
            _ => return Err(EngineError::ReplayDivergence { index: start }),
        }
        let out = world
            .deliver(&state, i, term, channel.is_none())
            .ok_or(EngineError::ReplayDivergence { index: start })?;
        compare(&out.events, start)?;
        note(&out.violations, start, &mut reproduced);
        kb = world.extend(&kb, &out.observed_new)?;
        state = out.state;
        idx = start + out.events.len();
    }
    if let Some(targets) = world.targets.get(&query) {
        if targets.iter().any(|t| kb.contains(t)) {
            reproduced.insert(query);
        }
    }
    Ok(reproduced.contains(&query))
}

/// An injected message is derivable when each of its elements is.
fn term_parts_derivable(world: &World, state: &State, recv: &TraceEvent, kb: &KnowledgeSet) -> bool {
    let TraceEvent::HonestReceive { instance, term, .. } = recv else { return false };
    let Some(i) = world.instances.iter().position(|x| x == instance) else { return false };
    let Some(Action::Receive { elements, .. }) = world.process_of(i).actions.get(state.insts[i].pc) else {
        return false;
    };
    term.untuple(elements.len()).is_some_and(|parts| parts.iter().all(|p| kb.contains(p)))
}
