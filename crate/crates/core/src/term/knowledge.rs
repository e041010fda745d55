//! Attacker knowledge and its deductive closure.
//!
//! The closure is kept in two parts. The *analysed* set holds the base
//! terms plus everything obtained by destructor rules; it is materialised
//! and carries a witness for every derived member. Terms built by
//! constructor rules are decided on demand by backward search over the
//! analysed set. Together they denote exactly the least fixpoint of all
//! rules with conclusions restricted to the depth bound: applying a
//! destructor to a constructed term only yields its (already derivable)
//! arguments.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rules::{Bindings, DeductionRule, Pattern};
use super::Term;

pub const DEFAULT_CLOSURE_CEILING: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnowledgeError {
    #[error("closure exceeded the ceiling of {ceiling} analysed terms")]
    ClosureBudgetExceeded { ceiling: usize },
}

/// Derivation tree witnessing that a term is derivable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivation {
    /// The term is a member of the base.
    Known(Term),
    Step {
        rule: String,
        conclusion: Term,
        premises: Vec<Derivation>,
    },
}

impl Derivation {
    pub fn conclusion(&self) -> &Term {
        match self {
            Derivation::Known(t) => t,
            Derivation::Step { conclusion, .. } => conclusion,
        }
    }

    /// Name of the last rule applied, or `"known"` for a base term.
    pub fn last_rule(&self) -> &str {
        match self {
            Derivation::Known(_) => "known",
            Derivation::Step { rule, .. } => rule,
        }
    }

    /// Re-checks the tree bottom-up. Returns the derived term when every
    /// leaf is in `base` and every step is justified by the named rule.
    pub fn replay(&self, base: &BTreeSet<Term>, rules: &[DeductionRule]) -> Option<Term> {
        match self {
            Derivation::Known(t) => base.contains(t).then(|| t.clone()),
            Derivation::Step { rule, conclusion, premises } => {
                let rule = rules.iter().find(|r| r.name == rule)?;
                let premise_terms = premises
                    .iter()
                    .map(|p| p.replay(base, rules))
                    .collect::<Option<Vec<_>>>()?;
                rule.justifies(&premise_terms, conclusion).then(|| conclusion.clone())
            }
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            Derivation::Known(_) => 0,
            Derivation::Step { premises, .. } => 1 + premises.iter().map(Derivation::steps).sum::<usize>(),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    order: usize,
    witness: Option<(&'static str, Vec<Term>)>,
}

/// Deductively closed attacker knowledge.
#[derive(Debug, Clone)]
pub struct KnowledgeSet {
    rules: Arc<[DeductionRule]>,
    depth_bound: usize,
    ceiling: usize,
    base: BTreeSet<Term>,
    analysed: BTreeMap<Term, Entry>,
}

/// Closes `base` under `rules` with the default term ceiling.
pub fn close(
    base: impl IntoIterator<Item = Term>,
    rules: &[DeductionRule],
    depth_bound: usize,
) -> Result<KnowledgeSet, KnowledgeError> {
    KnowledgeSet::close_with_ceiling(base, rules, depth_bound, DEFAULT_CLOSURE_CEILING)
}

/// Membership test with a witness when the goal is derivable.
pub fn derivable(kb: &KnowledgeSet, goal: &Term) -> (bool, Option<Derivation>) {
    let d = kb.derivation(goal);
    (d.is_some(), d)
}

impl KnowledgeSet {
    pub fn close_with_ceiling(
        base: impl IntoIterator<Item = Term>,
        rules: &[DeductionRule],
        depth_bound: usize,
        ceiling: usize,
    ) -> Result<KnowledgeSet, KnowledgeError> {
        let mut kb = KnowledgeSet {
            rules: rules.into(),
            depth_bound,
            ceiling,
            base: BTreeSet::new(),
            analysed: BTreeMap::new(),
        };
        kb.absorb(base)?;
        Ok(kb)
    }

    /// Returns the closure of `self.base() ∪ terms`.
    pub fn extended(&self, terms: impl IntoIterator<Item = Term>) -> Result<KnowledgeSet, KnowledgeError> {
        let mut kb = self.clone();
        kb.absorb(terms)?;
        Ok(kb)
    }

    fn absorb(&mut self, terms: impl IntoIterator<Item = Term>) -> Result<(), KnowledgeError> {
        let mut fresh = false;
        for t in terms {
            if self.base.insert(t.clone()) {
                fresh = true;
                if let Some(entry) = self.analysed.get_mut(&t) {
                    entry.witness = None;
                } else {
                    let order = self.analysed.len();
                    self.analysed.insert(t, Entry { order, witness: None });
                }
            }
        }
        if fresh {
            self.saturate()?;
        }
        Ok(())
    }

    fn saturate(&mut self) -> Result<(), KnowledgeError> {
        let destructors: Vec<(DeductionRule, usize)> = self
            .rules
            .iter()
            .filter_map(|r| r.major_premise().map(|i| (r.clone(), i)))
            .collect();
        loop {
            let mut added = false;
            for (rule, major) in &destructors {
                let snapshot: Vec<Term> = self.analysed.keys().cloned().collect();
                for candidate in &snapshot {
                    let mut b = Bindings::new();
                    if !rule.premises[*major].match_into(candidate, &mut b) {
                        continue;
                    }
                    let Some(premises) = self.side_premises(rule, *major, candidate, &b) else {
                        continue;
                    };
                    let Some(conclusion) = rule.conclusion.instantiate(&b) else { continue };
                    if conclusion.depth() > self.depth_bound || self.analysed.contains_key(&conclusion) {
                        continue;
                    }
                    if self.analysed.len() >= self.ceiling {
                        return Err(KnowledgeError::ClosureBudgetExceeded { ceiling: self.ceiling });
                    }
                    let order = self.analysed.len();
                    self.analysed.insert(
                        conclusion,
                        Entry { order, witness: Some((rule.name, premises)) },
                    );
                    added = true;
                }
            }
            if !added {
                return Ok(());
            }
        }
    }

    /// Instantiates the non-major premises of a destructor and checks they
    /// are all derivable.
    fn side_premises(&self, rule: &DeductionRule, major: usize, major_term: &Term, b: &Bindings) -> Option<Vec<Term>> {
        let mut out = Vec::with_capacity(rule.premises.len());
        for (i, p) in rule.premises.iter().enumerate() {
            if i == major {
                out.push(major_term.clone());
                continue;
            }
            let t = p.instantiate(b)?;
            if !self.contains(&t) {
                return None;
            }
            out.push(t);
        }
        Some(out)
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn rules(&self) -> &[DeductionRule] {
        &self.rules
    }

    pub fn base(&self) -> &BTreeSet<Term> {
        &self.base
    }

    /// Base terms plus everything obtained by destructors, in structural order.
    pub fn analysed(&self) -> impl Iterator<Item = &Term> {
        self.analysed.keys()
    }

    pub fn analysed_len(&self) -> usize {
        self.analysed.len()
    }

    /// The recorded witness `(rule, premises)` of an analysed, non-base term.
    pub fn witness(&self, t: &Term) -> Option<(&'static str, &[Term])> {
        self.analysed
            .get(t)
            .and_then(|e| e.witness.as_ref())
            .map(|(r, p)| (*r, p.as_slice()))
    }

    pub fn contains(&self, goal: &Term) -> bool {
        self.holds(goal, &mut Vec::new())
    }

    /// `derive` without building the witness tree.
    fn holds(&self, goal: &Term, in_progress: &mut Vec<Term>) -> bool {
        if self.analysed.contains_key(goal) {
            return true;
        }
        if goal.depth() > self.depth_bound || in_progress.contains(goal) {
            return false;
        }
        in_progress.push(goal.clone());
        let found = self.rules.iter().filter(|r| !r.is_destructor()).any(|rule| {
            let mut b = Bindings::new();
            rule.conclusion.match_into(goal, &mut b) && self.holds_all(&rule.premises, b, in_progress)
        });
        in_progress.pop();
        found
    }

    fn holds_all(&self, premises: &[Pattern], bindings: Bindings, in_progress: &mut Vec<Term>) -> bool {
        let Some((first, rest)) = premises.split_first() else {
            return true;
        };
        if let Some(t) = first.instantiate(&bindings) {
            return self.holds(&t, in_progress) && self.holds_all(rest, bindings, in_progress);
        }
        self.analysed.keys().any(|member| {
            let mut b = bindings.clone();
            first.match_into(member, &mut b) && self.holds_all(rest, b, in_progress)
        })
    }

    pub fn derivation(&self, goal: &Term) -> Option<Derivation> {
        self.derive(goal, usize::MAX, &mut Vec::new())
    }

    /// Backward search. Only analysed members with `order < limit` may be
    /// used, which keeps witness expansion acyclic.
    fn derive(&self, goal: &Term, limit: usize, in_progress: &mut Vec<Term>) -> Option<Derivation> {
        if let Some(entry) = self.analysed.get(goal).filter(|e| e.order < limit) {
            return Some(match &entry.witness {
                None => Derivation::Known(goal.clone()),
                Some((rule, premises)) => Derivation::Step {
                    rule: rule.to_string(),
                    conclusion: goal.clone(),
                    premises: premises
                        .iter()
                        .map(|p| {
                            self.derive(p, entry.order, &mut Vec::new())
                                .expect("witness premise derivable before its conclusion")
                        })
                        .collect(),
                },
            });
        }
        if goal.depth() > self.depth_bound || in_progress.contains(goal) {
            return None;
        }
        in_progress.push(goal.clone());
        let mut found = None;
        for rule in self.rules.iter().filter(|r| !r.is_destructor()) {
            let mut b = Bindings::new();
            if !rule.conclusion.match_into(goal, &mut b) {
                continue;
            }
            if let Some(premises) = self.solve(&rule.premises, b, limit, in_progress) {
                found = Some(Derivation::Step {
                    rule: rule.name.to_string(),
                    conclusion: goal.clone(),
                    premises,
                });
                break;
            }
        }
        in_progress.pop();
        found
    }

    fn solve(
        &self,
        premises: &[Pattern],
        bindings: Bindings,
        limit: usize,
        in_progress: &mut Vec<Term>,
    ) -> Option<Vec<Derivation>> {
        let Some((first, rest)) = premises.split_first() else {
            return Some(Vec::new());
        };
        if let Some(t) = first.instantiate(&bindings) {
            let d = self.derive(&t, limit, in_progress)?;
            let mut tail = self.solve(rest, bindings, limit, in_progress)?;
            tail.insert(0, d);
            return Some(tail);
        }
        for (member, entry) in &self.analysed {
            if entry.order >= limit {
                continue;
            }
            let mut b = bindings.clone();
            if !first.match_into(member, &mut b) {
                continue;
            }
            let Some(d) = self.derive(member, limit, in_progress) else { continue };
            if let Some(mut tail) = self.solve(rest, b, limit, in_progress) {
                tail.insert(0, d);
                return Some(tail);
            }
        }
        None
    }
}
