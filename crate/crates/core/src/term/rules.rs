use std::collections::BTreeMap;
use std::fmt;

use super::{Functor, Term};

/// Term pattern with named variables, used in deduction rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Var(&'static str),
    App(Functor, Vec<Pattern>),
}

pub type Bindings = BTreeMap<&'static str, Term>;

impl Pattern {
    fn app(f: Functor, args: Vec<Pattern>) -> Pattern {
        Pattern::App(f, args)
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Pattern::Var(_))
    }

    pub fn vars(&self, out: &mut Vec<&'static str>) {
        match self {
            Pattern::Var(v) => {
                if !out.contains(v) {
                    out.push(v)
                }
            }
            Pattern::App(_, args) => args.iter().for_each(|a| a.vars(out)),
        }
    }

    pub fn is_ground_under(&self, bindings: &Bindings) -> bool {
        match self {
            Pattern::Var(v) => bindings.contains_key(v),
            Pattern::App(_, args) => args.iter().all(|a| a.is_ground_under(bindings)),
        }
    }

    /// Extends `bindings` so that the pattern equals `term`. Returns false
    /// (leaving `bindings` possibly partially extended) on mismatch.
    pub fn match_into(&self, term: &Term, bindings: &mut Bindings) -> bool {
        match self {
            Pattern::Var(v) => match bindings.get(v) {
                Some(bound) => bound == term,
                None => {
                    bindings.insert(v, term.clone());
                    true
                }
            },
            Pattern::App(f, args) => {
                if term.functor() != Some(*f) {
                    return false;
                }
                args.iter()
                    .zip(term.args())
                    .all(|(p, t)| p.match_into(t, bindings))
            }
        }
    }

    /// Instantiates the pattern; `None` if a variable is unbound.
    pub fn instantiate(&self, bindings: &Bindings) -> Option<Term> {
        match self {
            Pattern::Var(v) => bindings.get(v).cloned(),
            Pattern::App(f, args) => {
                let args = args
                    .iter()
                    .map(|a| a.instantiate(bindings))
                    .collect::<Option<Vec<_>>>()?;
                Some(Term::apply(*f, args))
            }
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(v) => f.write_str(v),
            Pattern::App(func, args) => {
                write!(f, "{}(", func.keyword())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A Horn-style deduction rule of the attacker.
///
/// Rules whose conclusion is a variable are *destructors*: their first
/// non-variable premise is the major premise, matched against analysed
/// knowledge. All other rules are *constructors*, applied backwards from a
/// goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeductionRule {
    pub name: &'static str,
    pub premises: Vec<Pattern>,
    pub conclusion: Pattern,
}

impl DeductionRule {
    /// Panics if a conclusion variable is missing from every premise.
    pub fn new(name: &'static str, premises: Vec<Pattern>, conclusion: Pattern) -> Self {
        let mut premise_vars = Vec::new();
        premises.iter().for_each(|p| p.vars(&mut premise_vars));
        let mut concl_vars = Vec::new();
        conclusion.vars(&mut concl_vars);
        for v in concl_vars {
            assert!(premise_vars.contains(&v), "rule {name}: variable {v} invented by conclusion");
        }
        DeductionRule { name, premises, conclusion }
    }

    pub fn is_destructor(&self) -> bool {
        self.conclusion.is_var()
    }

    /// Index of the major premise of a destructor.
    pub fn major_premise(&self) -> Option<usize> {
        if !self.is_destructor() {
            return None;
        }
        self.premises.iter().position(|p| !p.is_var())
    }

    /// Checks that `conclusion` follows from `premises` by this rule.
    pub fn justifies(&self, premises: &[Term], conclusion: &Term) -> bool {
        if premises.len() != self.premises.len() {
            return false;
        }
        let mut b = Bindings::new();
        self.premises
            .iter()
            .zip(premises)
            .all(|(p, t)| p.match_into(t, &mut b))
            && self.conclusion.instantiate(&b).as_ref() == Some(conclusion)
    }
}

impl fmt::Display for DeductionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.name)?;
        for (i, p) in self.premises.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, " |- {}", self.conclusion)
    }
}

/// The Dolev-Yao rule set with the keystream rules for `XorMask`.
///
/// `Mac` and `Hash` have constructors only.
pub fn standard_rules() -> Vec<DeductionRule> {
    use Functor::*;
    use Pattern::Var;
    let (m, k, x, y) = (Var("m"), Var("k"), Var("x"), Var("y"));
    let app = Pattern::app;
    vec![
        DeductionRule::new("pair", vec![x.clone(), y.clone()], app(Pair, vec![x.clone(), y.clone()])),
        DeductionRule::new("fst", vec![app(Pair, vec![x.clone(), y.clone()])], x.clone()),
        DeductionRule::new("snd", vec![app(Pair, vec![x.clone(), y.clone()])], y.clone()),
        DeductionRule::new("senc", vec![m.clone(), k.clone()], app(SEnc, vec![m.clone(), k.clone()])),
        DeductionRule::new("sdec", vec![app(SEnc, vec![m.clone(), k.clone()]), k.clone()], m.clone()),
        DeductionRule::new("mac", vec![m.clone(), k.clone()], app(Mac, vec![m.clone(), k.clone()])),
        DeductionRule::new("hash", vec![m.clone()], app(Hash, vec![m.clone()])),
        DeductionRule::new("xor-mask", vec![m.clone(), k.clone()], app(XorMask, vec![m.clone(), k.clone()])),
        DeductionRule::new(
            "xor-recover-key",
            vec![m.clone(), app(XorMask, vec![m.clone(), k.clone()])],
            k.clone(),
        ),
        DeductionRule::new(
            "xor-recover-plain",
            vec![k.clone(), app(XorMask, vec![m.clone(), k.clone()])],
            m.clone(),
        ),
        DeductionRule::new(
            "xor-reuse",
            vec![app(XorMask, vec![Var("m1"), k.clone()]), Var("m1"), Var("m2")],
            app(XorMask, vec![Var("m2"), k]),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Sort;

    fn a(n: &str) -> Term {
        Term::atom(n, Sort::Data)
    }

    #[test]
    fn rule_names_are_unique() {
        let rules = standard_rules();
        let mut names: Vec<_> = rules.iter().map(|r| r.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), rules.len());
    }

    #[test]
    fn no_destructor_for_mac_or_hash() {
        for r in standard_rules() {
            if let Some(i) = r.major_premise() {
                let Pattern::App(f, _) = &r.premises[i] else { unreachable!() };
                assert!(!matches!(f, Functor::Mac | Functor::Hash), "{}", r.name);
            }
        }
    }

    #[test]
    fn justifies_checks_structure() {
        let rules = standard_rules();
        let sdec = rules.iter().find(|r| r.name == "sdec").unwrap();
        let c = Term::senc(a("m"), a("k"));
        assert!(sdec.justifies(&[c.clone(), a("k")], &a("m")));
        assert!(!sdec.justifies(&[c, a("j")], &a("m")));

        let recover = rules.iter().find(|r| r.name == "xor-recover-key").unwrap();
        assert!(recover.justifies(&[a("c"), Term::xor(a("c"), a("k"))], &a("k")));
        assert!(!recover.justifies(&[a("d"), Term::xor(a("c"), a("k"))], &a("k")));
    }

    #[test]
    #[should_panic(expected = "invented")]
    fn rules_cannot_invent_variables() {
        DeductionRule::new("bad", vec![Pattern::Var("x")], Pattern::Var("y"));
    }

    #[test]
    fn display_is_readable() {
        let rules = standard_rules();
        let reuse = rules.iter().find(|r| r.name == "xor-reuse").unwrap();
        assert_eq!(reuse.to_string(), "xor-reuse: xor(m1, k), m1, m2 |- xor(m2, k)");
    }
}
