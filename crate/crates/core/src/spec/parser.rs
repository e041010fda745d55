//! Parser for the `.proto-spec` format.
//!
//! ```text
//! protocol <name>
//! goal "<free text>"
//! public <atom>[:sort], ...
//! principal <id> [trusted] [knows <term>, ...]
//! trust <key>, ...
//! attacker dolev_yao
//! capability +<name>[(<element>, ...)] [on <scope>]
//! step <n> [fresh <atom>[:sort], ...] <sender> -> <receiver> over <channel>: <elem>=<term> [@<provenance>], ...
//! step <n> [fresh <atom>[:sort], ...] compute <principal>: <elem>=<term>, ...
//! step <n> check <principal>: <elem>, ...
//! require step <n> <elem>: <property>, ...
//! query secrecy <term> | query auth <claimant> <peer> on <elem> | query unique <elem>
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use super::lexer::{lex_line, Spanned, Tok};
use super::{
    AttackerModel, CapabilityDelta, CapabilityKind, ChannelClass, Element, Principal, ProtocolSpec, Provenance,
    Query, Sign, StepId, StepKind, StepSpec, TrustProperty, TrustSet,
};
use crate::term::{Atom, Functor, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("{line}:{col}: syntax error: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("{line}:{col}: step {step}, element `{element}`: atom `{atom}` is used before it is declared")]
    Causality { line: usize, col: usize, step: String, element: String, atom: String },
    #[error("{line}:{col}: unknown capability `{name}`")]
    UnknownCapability { line: usize, col: usize, name: String },
    #[error("{line}:{col}: dangling reference to `{name}` ({context})")]
    DanglingReference { line: usize, col: usize, name: String, context: String },
    #[error("{line}:{col}: {message}")]
    Invalid { line: usize, col: usize, message: String },
}

impl SpecError {
    pub fn line(&self) -> usize {
        match self {
            SpecError::Syntax { line, .. }
            | SpecError::Causality { line, .. }
            | SpecError::UnknownCapability { line, .. }
            | SpecError::DanglingReference { line, .. }
            | SpecError::Invalid { line, .. } => *line,
        }
    }
}

type Result<T> = std::result::Result<T, SpecError>;

/// Parses and validates a protocol specification.
pub fn parse(source: &str) -> Result<ProtocolSpec> {
    let mut p = Parser::default();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let toks = lex_line(raw).map_err(|e| SpecError::Syntax { line, col: e.col, expected: e.expected })?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor { toks: &toks, pos: 0, line, end_col: raw.chars().count() + 1 };
        p.line(&mut cur)?;
    }
    p.finish()
}

struct Cursor<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn syntax(&self, expected: impl Into<String>) -> SpecError {
        let expected = match self.peek() {
            Some(t) => format!("{}, found {}", expected.into(), t.describe()),
            None => format!("{}, found end of line", expected.into()),
        };
        SpecError::Syntax { line: self.line, col: self.col(), expected }
    }

    fn invalid(&self, col: usize, message: impl Into<String>) -> SpecError {
        SpecError::Invalid { line: self.line, col, message: message.into() }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize)> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let out = (s.clone(), self.col());
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("`{kw}`"))),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.syntax(format!("`{c}`")))
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn step_id(&mut self) -> Result<(StepId, usize)> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Number(n)) => {
                let id = n.parse::<StepId>().map_err(|_| self.syntax("a positive step number"))?;
                self.pos += 1;
                Ok((id, col))
            }
            _ => Err(self.syntax("a step number")),
        }
    }

    fn end(&self) -> Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.syntax("end of line"))
        }
    }
}

/// How bare identifiers inside a term are resolved.
enum TermMode<'a> {
    /// Declaration context: unknown atoms are declared, `name:sort` allowed.
    Declare { default: Sort },
    /// Atoms must already be declared.
    Use { step: &'a str, element: &'a str },
    /// Query context: atoms or element names.
    Query,
}

struct PendingRequirement {
    step: StepId,
    element: String,
    props: TrustSet,
    line: usize,
    col: usize,
}

enum PendingQuery {
    Secrecy(Vec<Spanned>, usize),
    Auth { claimant: (String, usize), peer: (String, usize), on: (String, usize), line: usize },
    Unique { on: (String, usize), line: usize },
}

#[derive(Default)]
struct Parser {
    name: Option<String>,
    goals: Vec<String>,
    principals: Vec<Principal>,
    public: Vec<Atom>,
    trusted_keys: Vec<Atom>,
    attacker: AttackerModel,
    attacker_line: Option<usize>,
    steps: Vec<StepSpec>,
    symbols: BTreeMap<String, Sort>,
    elements: BTreeMap<String, Term>,
    requirements: Vec<PendingRequirement>,
    queries: Vec<PendingQuery>,
}

impl Parser {
    fn line(&mut self, cur: &mut Cursor) -> Result<()> {
        let (head, col) = cur.ident("a directive")?;
        if self.name.is_none() && head != "protocol" {
            return Err(SpecError::Syntax { line: cur.line, col, expected: "`protocol <name>` first".into() });
        }
        match head.as_str() {
            "protocol" => {
                if self.name.is_some() {
                    return Err(cur.invalid(col, "duplicate `protocol` line"));
                }
                self.name = Some(cur.ident("a protocol name")?.0);
            }
            "goal" => match cur.peek() {
                Some(Tok::Str(s)) => {
                    self.goals.push(s.clone());
                    cur.pos += 1;
                }
                _ => return Err(cur.syntax("a quoted goal")),
            },
            "public" => loop {
                let atom = self.declare_atom(cur, Sort::Constant, true)?;
                self.public.push(atom);
                if !cur.eat_sym(',') {
                    break;
                }
            },
            "principal" => self.principal(cur)?,
            "trust" => loop {
                let (name, col) = cur.ident("a key name")?;
                let sort = *self
                    .symbols
                    .get(&name)
                    .ok_or_else(|| SpecError::DanglingReference {
                        line: cur.line,
                        col,
                        name: name.clone(),
                        context: "trusted key must be declared first".into(),
                    })?;
                self.trusted_keys.push(Atom::new(name, sort));
                if !cur.eat_sym(',') {
                    break;
                }
            },
            "attacker" => {
                let (base, col) = cur.ident("an attacker model")?;
                if base != "dolev_yao" {
                    return Err(SpecError::Syntax { line: cur.line, col, expected: "`dolev_yao`".into() });
                }
                if self.attacker_line.is_some() {
                    return Err(cur.invalid(col, "duplicate `attacker` line"));
                }
                self.attacker_line = Some(cur.line);
            }
            "capability" => self.capability(cur)?,
            "step" => self.step(cur)?,
            "require" => self.require(cur)?,
            "query" => self.query(cur)?,
            _ => {
                return Err(SpecError::Syntax { line: cur.line, col, expected: format!("a directive, found `{head}`") })
            }
        }
        cur.end()
    }

    fn declare_atom(&mut self, cur: &mut Cursor, default: Sort, unique: bool) -> Result<Atom> {
        let (name, col) = cur.ident("an atom name")?;
        let sort = self.sort_annotation(cur)?.unwrap_or(default);
        if let Some(prev) = self.symbols.get(&name) {
            if unique {
                return Err(cur.invalid(col, format!("atom `{name}` is already declared")));
            }
            if *prev != sort {
                return Err(cur.invalid(col, format!("atom `{name}` redeclared with sort {sort} (was {prev})")));
            }
        }
        self.symbols.insert(name.clone(), sort);
        Ok(Atom::new(name, sort))
    }

    fn sort_annotation(&self, cur: &mut Cursor) -> Result<Option<Sort>> {
        if !cur.eat_sym(':') {
            return Ok(None);
        }
        let (s, col) = cur.ident("a sort")?;
        s.parse::<Sort>()
            .map(Some)
            .map_err(|_| SpecError::Syntax { line: cur.line, col, expected: format!("a sort, found `{s}`") })
    }

    fn term(&mut self, cur: &mut Cursor, mode: &TermMode) -> Result<Term> {
        let (name, col) = cur.ident("a term")?;
        if cur.peek() == Some(&Tok::Sym('(')) {
            let functor = Functor::from_keyword(&name).ok_or_else(|| SpecError::Syntax {
                line: cur.line,
                col,
                expected: format!("one of pair, senc, mac, hash, xor; found `{name}`"),
            })?;
            cur.sym('(')?;
            let mut args = vec![self.term(cur, mode)?];
            while cur.eat_sym(',') {
                args.push(self.term(cur, mode)?);
            }
            if args.len() != functor.arity() {
                return Err(cur.invalid(col, format!("`{name}` takes {} argument(s)", functor.arity())));
            }
            cur.sym(')')?;
            return Ok(Term::apply(functor, args));
        }
        match mode {
            TermMode::Declare { default } => {
                let annotated = self.sort_annotation(cur)?;
                let sort = match (annotated, self.symbols.get(&name)) {
                    (Some(s), Some(prev)) if s != *prev => {
                        return Err(cur.invalid(col, format!("atom `{name}` redeclared with sort {s} (was {prev})")))
                    }
                    (Some(s), _) => s,
                    (None, Some(prev)) => *prev,
                    (None, None) => *default,
                };
                self.symbols.insert(name.clone(), sort);
                Ok(Term::atom(&name, sort))
            }
            TermMode::Use { step, element } => match self.symbols.get(&name) {
                Some(sort) => Ok(Term::atom(&name, *sort)),
                None if self.elements.contains_key(&name) => Ok(self.elements[&name].clone()),
                None => Err(SpecError::Causality {
                    line: cur.line,
                    col,
                    step: step.to_string(),
                    element: element.to_string(),
                    atom: name,
                }),
            },
            TermMode::Query => {
                if let Some(sort) = self.symbols.get(&name) {
                    Ok(Term::atom(&name, *sort))
                } else if let Some(t) = self.elements.get(&name) {
                    Ok(t.clone())
                } else {
                    Err(SpecError::DanglingReference {
                        line: cur.line,
                        col,
                        name,
                        context: "secrecy query names neither an atom nor an element".into(),
                    })
                }
            }
        }
    }

    fn principal(&mut self, cur: &mut Cursor) -> Result<()> {
        let (id, col) = cur.ident("a principal id")?;
        if self.principals.iter().any(|p| p.id == id) {
            return Err(cur.invalid(col, format!("principal `{id}` declared twice")));
        }
        match self.symbols.get(&id) {
            Some(Sort::Agent) | None => {}
            Some(other) => return Err(cur.invalid(col, format!("`{id}` is already an atom of sort {other}"))),
        }
        self.symbols.insert(id.clone(), Sort::Agent);
        let trusted = cur.eat_keyword("trusted");
        let mut knows = Vec::new();
        if cur.eat_keyword("knows") {
            loop {
                knows.push(self.term(cur, &TermMode::Declare { default: Sort::Data })?);
                if !cur.eat_sym(',') {
                    break;
                }
            }
        }
        self.principals.push(Principal { id, trusted, knows });
        Ok(())
    }

    fn capability(&mut self, cur: &mut Cursor) -> Result<()> {
        let sign = if cur.eat_sym('+') {
            Sign::Plus
        } else if cur.eat_sym('-') {
            Sign::Minus
        } else {
            return Err(cur.syntax("`+` or `-`"));
        };
        let (name, col) = cur.ident("a capability name")?;
        let capability = name
            .parse::<CapabilityKind>()
            .map_err(|_| SpecError::UnknownCapability { line: cur.line, col, name: name.clone() })?;
        let mut directory = Vec::new();
        if cur.eat_sym('(') {
            loop {
                directory.push(cur.ident("an element name")?.0);
                if !cur.eat_sym(',') {
                    break;
                }
            }
            cur.sym(')')?;
        }
        if !directory.is_empty() && capability != CapabilityKind::KnowPublicDirectory {
            return Err(cur.invalid(col, format!("`{name}` takes no element list")));
        }
        let scope = if cur.eat_keyword("on") { Some(cur.ident("a channel or element")?.0) } else { None };
        let delta = CapabilityDelta { sign, capability, directory, scope };
        if !delta.is_consistent_with_base() {
            let why = match sign {
                Sign::Plus => "the base model already grants it",
                Sign::Minus => "the base model does not grant it",
            };
            return Err(cur.invalid(col, format!("delta `{delta}` is inconsistent: {why}")));
        }
        self.attacker.deltas.push(delta);
        Ok(())
    }

    fn step(&mut self, cur: &mut Cursor) -> Result<()> {
        let (id, id_col) = cur.step_id()?;
        if self.steps.iter().any(|s| s.id == id) {
            return Err(cur.invalid(id_col, format!("step {id} defined twice")));
        }
        let mut fresh = Vec::new();
        if cur.eat_keyword("fresh") {
            loop {
                fresh.push(self.declare_atom(cur, Sort::Nonce, true)?);
                if !cur.eat_sym(',') {
                    break;
                }
            }
        }
        let line = cur.line;
        let step_label = id.to_string();
        let (kind, sender, receiver, channel) = if cur.eat_keyword("compute") {
            (StepKind::Compute, self.principal_ref(cur)?, None, None)
        } else if cur.eat_keyword("check") {
            if !fresh.is_empty() {
                return Err(cur.invalid(id_col, "check steps cannot generate fresh atoms"));
            }
            (StepKind::Check, self.principal_ref(cur)?, None, None)
        } else {
            let sender = self.principal_ref(cur)?;
            if cur.peek() != Some(&Tok::Arrow) {
                return Err(cur.syntax("`->`, `compute` or `check`"));
            }
            cur.pos += 1;
            let receiver_col = cur.col();
            let receiver = self.principal_ref(cur)?;
            if receiver == sender {
                return Err(cur.invalid(receiver_col, "a principal cannot send to itself"));
            }
            cur.keyword("over")?;
            let (ch, col) = cur.ident("a channel class")?;
            let channel = ch.parse::<ChannelClass>().map_err(|_| SpecError::Syntax {
                line,
                col,
                expected: format!(
                    "a channel class (insecure, authenticated, confidential_authenticated, out_of_band_keypad), found `{ch}`"
                ),
            })?;
            let kind = if channel == ChannelClass::OutOfBandKeypad { StepKind::OutOfBand } else { StepKind::Send };
            (kind, sender, Some(receiver), Some(channel))
        };
        cur.sym(':')?;

        let mut elements: Vec<Element> = Vec::new();
        loop {
            let (name, col) = cur.ident("an element name")?;
            if elements.iter().any(|e| e.name == name) {
                return Err(cur.invalid(col, format!("element `{name}` appears twice in step {id}")));
            }
            let element = if kind == StepKind::Check {
                let term = self.elements.get(&name).cloned().ok_or_else(|| SpecError::DanglingReference {
                    line,
                    col,
                    name: name.clone(),
                    context: format!("step {id} checks an element that was never sent or computed"),
                })?;
                Element { name, term, provenance: Provenance::Computed }
            } else {
                // A bare name re-sends an element defined at an earlier step.
                let known = self.elements.get(&name).cloned();
                let term = match known {
                    Some(t) if !cur.eat_sym('=') => t,
                    Some(_) => self.term(cur, &TermMode::Use { step: &step_label, element: &name })?,
                    None => {
                        cur.sym('=')?;
                        self.term(cur, &TermMode::Use { step: &step_label, element: &name })?
                    }
                };
                let provenance = if cur.eat_sym('@') {
                    let (p, pcol) = cur.ident("a provenance")?;
                    p.parse::<Provenance>()
                        .map_err(|_| SpecError::Syntax { line, col: pcol, expected: format!("a provenance, found `{p}`") })?
                } else {
                    default_provenance(kind, channel, &term, &fresh)
                };
                match self.elements.get(&name) {
                    Some(prev) if *prev != term => {
                        return Err(cur.invalid(col, format!("element `{name}` was defined as `{prev}` earlier")))
                    }
                    _ => {
                        self.elements.insert(name.clone(), term.clone());
                    }
                }
                Element { name, term, provenance }
            };
            elements.push(element);
            if !cur.eat_sym(',') {
                break;
            }
        }
        self.steps.push(StepSpec {
            id,
            kind,
            sender,
            receiver,
            channel,
            elements,
            requirements: Vec::new(),
            fresh,
            line,
        });
        Ok(())
    }

    fn principal_ref(&self, cur: &mut Cursor) -> Result<String> {
        let (id, col) = cur.ident("a principal id")?;
        if self.principal_index(&id).is_none() {
            return Err(SpecError::DanglingReference {
                line: cur.line,
                col,
                name: id,
                context: "undeclared principal".into(),
            });
        }
        Ok(id)
    }

    fn principal_index(&self, id: &str) -> Option<usize> {
        self.principals.iter().position(|p| p.id == id)
    }

    fn require(&mut self, cur: &mut Cursor) -> Result<()> {
        cur.keyword("step")?;
        let (step, _) = cur.step_id()?;
        let (element, col) = cur.ident("an element name")?;
        cur.sym(':')?;
        let mut props = TrustSet::new();
        let mut saw_none = false;
        loop {
            let (p, pcol) = cur.ident("a trust property")?;
            let prop = p.parse::<TrustProperty>().map_err(|_| SpecError::Syntax {
                line: cur.line,
                col: pcol,
                expected: format!(
                    "a trust property (none, authenticity, confidentiality, integrity, uniqueness), found `{p}`"
                ),
            })?;
            saw_none |= prop == TrustProperty::None;
            props.insert(prop);
            if !cur.eat_sym(',') {
                break;
            }
        }
        if saw_none && !props.requirements().is_empty() {
            return Err(cur.invalid(col, "`none` cannot be combined with other properties"));
        }
        self.requirements.push(PendingRequirement { step, element, props, line: cur.line, col });
        Ok(())
    }

    fn query(&mut self, cur: &mut Cursor) -> Result<()> {
        let (kind, col) = cur.ident("a query kind")?;
        let line = cur.line;
        match kind.as_str() {
            "secrecy" => {
                let toks = cur.toks[cur.pos..].to_vec();
                if toks.is_empty() {
                    return Err(cur.syntax("a term"));
                }
                cur.pos = cur.toks.len();
                self.queries.push(PendingQuery::Secrecy(toks, line));
            }
            "auth" => {
                let claimant = cur.ident("a claimant principal")?;
                let peer = cur.ident("a peer principal")?;
                cur.keyword("on")?;
                let on = cur.ident("an element name")?;
                self.queries.push(PendingQuery::Auth { claimant, peer, on, line });
            }
            "unique" => {
                let on = cur.ident("an element name")?;
                self.queries.push(PendingQuery::Unique { on, line });
            }
            _ => {
                return Err(SpecError::Syntax {
                    line,
                    col,
                    expected: format!("`secrecy`, `auth` or `unique`, found `{kind}`"),
                })
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<ProtocolSpec> {
        let Some(name) = self.name.take() else {
            return Err(SpecError::Syntax { line: 1, col: 1, expected: "`protocol <name>`".into() });
        };
        if self.principals.is_empty() {
            return Err(SpecError::Invalid { line: 1, col: 1, message: "at least one principal is required".into() });
        }
        check_step_numbering(&self.steps)?;

        for req in std::mem::take(&mut self.requirements) {
            let step = self.steps.iter_mut().find(|s| s.id == req.step).ok_or_else(|| SpecError::DanglingReference {
                line: req.line,
                col: req.col,
                name: req.step.to_string(),
                context: "requirement names a step that does not exist".into(),
            })?;
            if step.element(&req.element).is_none() {
                return Err(SpecError::DanglingReference {
                    line: req.line,
                    col: req.col,
                    name: req.element,
                    context: format!("step {} has no such element", req.step),
                });
            }
            match step.requirements.iter_mut().find(|(e, _)| *e == req.element) {
                Some((_, set)) => req.props.iter().for_each(|p| set.insert(p)),
                None => step.requirements.push((req.element, req.props)),
            }
        }

        for delta in &self.attacker.deltas {
            for entry in &delta.directory {
                if !self.symbols.contains_key(entry) && !self.elements.contains_key(entry) {
                    return Err(SpecError::DanglingReference {
                        line: self.attacker_line.unwrap_or(1),
                        col: 1,
                        name: entry.clone(),
                        context: "directory entry is neither an atom nor an element".into(),
                    });
                }
            }
        }

        let mut queries = Vec::new();
        for q in std::mem::take(&mut self.queries) {
            queries.push(self.resolve_query(q)?);
        }

        Ok(ProtocolSpec {
            name,
            goals: self.goals,
            principals: self.principals,
            public: self.public,
            trusted_keys: self.trusted_keys,
            attacker: self.attacker,
            steps: self.steps,
            queries,
        })
    }

    fn resolve_query(&mut self, q: PendingQuery) -> Result<Query> {
        let element_exists = |p: &Parser, (name, col): &(String, usize), line: usize| {
            if p.elements.contains_key(name) {
                Ok(name.clone())
            } else {
                Err(SpecError::DanglingReference {
                    line,
                    col: *col,
                    name: name.clone(),
                    context: "query names an unknown element".into(),
                })
            }
        };
        let principal_exists = |p: &Parser, (name, col): &(String, usize), line: usize| {
            if p.principal_index(name).is_some() {
                Ok(name.clone())
            } else {
                Err(SpecError::DanglingReference {
                    line,
                    col: *col,
                    name: name.clone(),
                    context: "query names an unknown principal".into(),
                })
            }
        };
        Ok(match q {
            PendingQuery::Secrecy(toks, line) => {
                let end_col = toks.last().map_or(1, |t| t.col + 1);
                let mut cur = Cursor { toks: &toks, pos: 0, line, end_col };
                let target = self.term(&mut cur, &TermMode::Query)?;
                cur.end()?;
                Query::Secrecy { target }
            }
            PendingQuery::Auth { claimant, peer, on, line } => Query::Authentication {
                claimant: principal_exists(self, &claimant, line)?,
                peer: principal_exists(self, &peer, line)?,
                on: element_exists(self, &on, line)?,
            },
            PendingQuery::Unique { on, line } => Query::Uniqueness { on: element_exists(self, &on, line)? },
        })
    }
}

fn default_provenance(kind: StepKind, channel: Option<ChannelClass>, term: &Term, fresh: &[Atom]) -> Provenance {
    if channel == Some(ChannelClass::OutOfBandKeypad) {
        return Provenance::EnteredViaKeypad;
    }
    let is_fresh = term.as_atom().is_some_and(|a| fresh.contains(a));
    match (kind, is_fresh) {
        (_, true) => Provenance::Generated,
        (StepKind::Compute, false) => Provenance::Computed,
        _ => Provenance::Relayed,
    }
}

/// Step numbers start at 1 and are dense; sub-messages of one number are
/// numbered 1, 2, ... and cannot be mixed with a plain step of that number.
fn check_step_numbering(steps: &[StepSpec]) -> Result<()> {
    let mut prev: Option<StepId> = None;
    for s in steps {
        let ok = match prev {
            None => s.id.major == 1 && matches!(s.id.minor, None | Some(1)),
            Some(p) if s.id.major == p.major => matches!((p.minor, s.id.minor), (Some(a), Some(b)) if b == a + 1),
            Some(p) => s.id.major == p.major + 1 && matches!(s.id.minor, None | Some(1)),
        };
        if !ok {
            let expected = match prev {
                None => "1".to_string(),
                Some(p) => match p.minor {
                    Some(m) => format!("{}.{} or {}", p.major, m + 1, p.major + 1),
                    None => format!("{}", p.major + 1),
                },
            };
            return Err(SpecError::Invalid {
                line: s.line,
                col: 1,
                message: format!("step {} is out of sequence (expected {expected})", s.id),
            });
        }
        prev = Some(s.id);
    }
    Ok(())
}
