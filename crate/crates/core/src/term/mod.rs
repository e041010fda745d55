//! Symbolic message algebra.
//!
//! Terms are finite trees compared structurally. The only non-free
//! behaviour is carried by the deduction rules in [`rules`], which give
//! `XorMask` its keystream-recovery and keystream-reuse semantics without
//! any associative-commutative normalisation.

mod knowledge;
mod rules;

pub use knowledge::{close, derivable, Derivation, KnowledgeError, KnowledgeSet, DEFAULT_CLOSURE_CEILING};
pub use rules::{standard_rules, Bindings, DeductionRule, Pattern};

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Sort of an atomic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sort {
    Agent,
    Nonce,
    Key,
    Data,
    Constant,
}

impl Sort {
    pub const ALL: [Sort; 5] = [Sort::Agent, Sort::Nonce, Sort::Key, Sort::Data, Sort::Constant];

    pub fn as_str(self) -> &'static str {
        match self {
            Sort::Agent => "agent",
            Sort::Nonce => "nonce",
            Sort::Key => "key",
            Sort::Data => "data",
            Sort::Constant => "constant",
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sort::ALL
            .into_iter()
            .find(|sort| sort.as_str() == s)
            .ok_or_else(|| format!("unknown sort `{s}`"))
    }
}

/// A named atom. Two atoms are equal iff both name and sort match.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub name: Arc<str>,
    pub sort: Sort,
}

impl Atom {
    pub fn new(name: impl Into<Arc<str>>, sort: Sort) -> Self {
        Atom { name: name.into(), sort }
    }
}

/// A symbolic message.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Atom(Atom),
    Pair(Arc<Term>, Arc<Term>),
    SEnc(Arc<Term>, Arc<Term>),
    Mac(Arc<Term>, Arc<Term>),
    Hash(Arc<Term>),
    /// Stream-cipher output: `plain` masked with the keystream of `key`.
    XorMask(Arc<Term>, Arc<Term>),
}

/// Top-level constructor of a term, used by pattern matching and rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functor {
    Pair,
    SEnc,
    Mac,
    Hash,
    XorMask,
}

impl Functor {
    pub fn keyword(self) -> &'static str {
        match self {
            Functor::Pair => "pair",
            Functor::SEnc => "senc",
            Functor::Mac => "mac",
            Functor::Hash => "hash",
            Functor::XorMask => "xor",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Functor::Hash => 1,
            _ => 2,
        }
    }

    pub fn from_keyword(word: &str) -> Option<Functor> {
        Some(match word {
            "pair" => Functor::Pair,
            "senc" => Functor::SEnc,
            "mac" => Functor::Mac,
            "hash" => Functor::Hash,
            "xor" => Functor::XorMask,
            _ => return None,
        })
    }
}

impl Term {
    pub fn atom(name: &str, sort: Sort) -> Term {
        Term::Atom(Atom::new(name, sort))
    }

    pub fn pair(left: Term, right: Term) -> Term {
        Term::Pair(Arc::new(left), Arc::new(right))
    }

    pub fn senc(payload: Term, key: Term) -> Term {
        Term::SEnc(Arc::new(payload), Arc::new(key))
    }

    pub fn mac(payload: Term, key: Term) -> Term {
        Term::Mac(Arc::new(payload), Arc::new(key))
    }

    pub fn hash(payload: Term) -> Term {
        Term::Hash(Arc::new(payload))
    }

    pub fn xor(plain: Term, key: Term) -> Term {
        Term::XorMask(Arc::new(plain), Arc::new(key))
    }

    /// Builds a term from a functor and its arguments.
    ///
    /// Panics if the argument count does not match the functor's arity.
    pub fn apply(functor: Functor, mut args: Vec<Term>) -> Term {
        assert_eq!(args.len(), functor.arity(), "arity mismatch for {}", functor.keyword());
        if functor == Functor::Hash {
            return Term::hash(args.pop().unwrap());
        }
        let right = args.pop().unwrap();
        let left = args.pop().unwrap();
        match functor {
            Functor::Pair => Term::pair(left, right),
            Functor::SEnc => Term::senc(left, right),
            Functor::Mac => Term::mac(left, right),
            Functor::XorMask => Term::xor(left, right),
            Functor::Hash => unreachable!(),
        }
    }

    /// Right-nested tuple of the given terms; a single term is returned as is.
    ///
    /// Panics on an empty list.
    pub fn tuple(mut items: Vec<Term>) -> Term {
        let mut acc = items.pop().expect("tuple of zero terms");
        while let Some(prev) = items.pop() {
            acc = Term::pair(prev, acc);
        }
        acc
    }

    pub fn functor(&self) -> Option<Functor> {
        match self {
            Term::Atom(_) => None,
            Term::Pair(..) => Some(Functor::Pair),
            Term::SEnc(..) => Some(Functor::SEnc),
            Term::Mac(..) => Some(Functor::Mac),
            Term::Hash(_) => Some(Functor::Hash),
            Term::XorMask(..) => Some(Functor::XorMask),
        }
    }

    pub fn args(&self) -> Vec<&Term> {
        match self {
            Term::Atom(_) => Vec::new(),
            Term::Hash(a) => vec![a],
            Term::Pair(a, b) | Term::SEnc(a, b) | Term::Mac(a, b) | Term::XorMask(a, b) => vec![a, b],
        }
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Syntactic depth; atoms have depth 1.
    pub fn depth(&self) -> usize {
        1 + self.args().into_iter().map(Term::depth).max().unwrap_or(0)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.args().into_iter().map(Term::size).sum::<usize>()
    }

    /// All subterms including `self`, in pre-order.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            let args = t.args();
            stack.extend(args.into_iter().rev());
        }
        out
    }

    /// Atoms occurring in the term, in pre-order, with repetitions.
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.subterms().into_iter().filter_map(Term::as_atom)
    }

    /// Ordering by size first, then structural order.
    pub fn cmp_by_size(&self, other: &Term) -> Ordering {
        self.size().cmp(&other.size()).then_with(|| self.cmp(other))
    }

    /// Splits a right-nested tuple into `n` components.
    pub fn untuple(&self, n: usize) -> Option<Vec<Term>> {
        let mut out = Vec::with_capacity(n);
        let mut cur = self;
        for _ in 1..n {
            match cur {
                Term::Pair(l, r) => {
                    out.push((**l).clone());
                    cur = r;
                }
                _ => return None,
            }
        }
        if n > 0 {
            out.push(cur.clone());
        }
        Some(out)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => f.write_str(&a.name),
            Term::Hash(a) => write!(f, "hash({a})"),
            Term::Pair(a, b) => write!(f, "pair({a}, {b})"),
            Term::SEnc(a, b) => write!(f, "senc({a}, {b})"),
            Term::Mac(a, b) => write!(f, "mac({a}, {b})"),
            Term::XorMask(a, b) => write!(f, "xor({a}, {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> Term {
        Term::atom(n, Sort::Data)
    }

    #[test]
    fn atoms_differ_by_sort() {
        assert_ne!(Term::atom("x", Sort::Key), Term::atom("x", Sort::Nonce));
        assert_eq!(Term::atom("x", Sort::Key), Term::atom("x", Sort::Key));
    }

    #[test]
    fn depth_and_size() {
        let t = Term::senc(Term::pair(a("m"), a("n")), a("k"));
        assert_eq!(t.depth(), 3);
        assert_eq!(t.size(), 5);
        assert_eq!(a("m").depth(), 1);
    }

    #[test]
    fn tuple_roundtrip() {
        let items = vec![a("x"), a("y"), Term::hash(a("z"))];
        let t = Term::tuple(items.clone());
        assert_eq!(t.to_string(), "pair(x, pair(y, hash(z)))");
        assert_eq!(t.untuple(3).unwrap(), items);
        assert_eq!(a("x").untuple(1).unwrap(), vec![a("x")]);
        assert!(a("x").untuple(2).is_none());
    }

    #[test]
    fn size_ordering_prefers_smaller() {
        let small = a("z");
        let big = Term::hash(a("a"));
        assert_eq!(small.cmp_by_size(&big), Ordering::Less);
    }

    #[test]
    fn xor_is_not_commutative() {
        assert_ne!(Term::xor(a("m"), a("k")), Term::xor(a("k"), a("m")));
    }
}
