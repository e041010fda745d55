//! Independent derivability oracle and random term generators.
//!
//! The oracle saturates the rule set forward over the finite universe of
//! subterms of the base and the goal. Conclusions outside that universe
//! can only matter as parts of the goal, so the restriction is complete.
//! Rules are written out by hand here rather than taken from the crate.

#![allow(dead_code)]

use std::collections::BTreeSet;

use protoscope::{Sort, Term};
use rand::seq::SliceRandom;
use rand::Rng;

fn subterms(t: &Term, out: &mut BTreeSet<Term>) {
    if !out.insert(t.clone()) {
        return;
    }
    match t {
        Term::Atom(_) => {}
        Term::Hash(a) => subterms(a, out),
        Term::Pair(a, b) | Term::SEnc(a, b) | Term::Mac(a, b) | Term::XorMask(a, b) => {
            subterms(a, out);
            subterms(b, out);
        }
    }
}

/// Exhaustive forward saturation. `depth_bound` limits rule conclusions.
pub fn brute_derivable(base: &[Term], goal: &Term, depth_bound: usize) -> bool {
    let mut universe = BTreeSet::new();
    for t in base.iter().chain(std::iter::once(goal)) {
        subterms(t, &mut universe);
    }
    let universe: Vec<Term> = universe.into_iter().collect();
    let mut known: BTreeSet<Term> = base.iter().cloned().collect();
    loop {
        let mut grew = false;
        for u in &universe {
            if known.contains(u) || u.depth() > depth_bound {
                continue;
            }
            if derivable_in_one_step(u, &known) {
                known.insert(u.clone());
                grew = true;
            }
        }
        if !grew {
            return known.contains(goal);
        }
    }
}

fn derivable_in_one_step(u: &Term, known: &BTreeSet<Term>) -> bool {
    let has = |t: &Term| known.contains(t);
    // Constructors.
    let built = match u {
        Term::Atom(_) => false,
        Term::Hash(a) => has(a),
        Term::Pair(a, b) | Term::SEnc(a, b) | Term::Mac(a, b) | Term::XorMask(a, b) => has(a) && has(b),
    };
    if built {
        return true;
    }
    for k in known {
        match k {
            Term::Pair(a, b) if **a == *u || **b == *u => return true,
            Term::SEnc(m, key) if **m == *u && has(key) => return true,
            Term::XorMask(m, key) => {
                if **key == *u && has(m) {
                    return true;
                }
                if **m == *u && has(key) {
                    return true;
                }
                if let Term::XorMask(m2, key2) = u {
                    if key2 == key && has(m) && has(m2) {
                        return true;
                    }
                }
            }
            _ => {}
        }
    }
    false
}

pub fn atom_pool() -> Vec<Term> {
    let mut pool = Vec::new();
    for (i, sort) in [Sort::Data, Sort::Nonce, Sort::Key, Sort::Key, Sort::Agent, Sort::Data].into_iter().enumerate() {
        pool.push(Term::atom(&format!("a{i}"), sort));
    }
    pool
}

/// Random term of depth at most `depth` over `atoms`, counting an atom as depth 1.
pub fn random_term<R: Rng>(rng: &mut R, atoms: &[Term], depth: usize) -> Term {
    if depth <= 1 || rng.gen_bool(0.3) {
        return atoms.choose(rng).unwrap().clone();
    }
    let mut sub = || random_term(rng, atoms, depth - 1);
    let (a, b) = (sub(), sub());
    match rng.gen_range(0..5) {
        0 => Term::pair(a, b),
        1 => Term::senc(a, b),
        2 => Term::mac(a, b),
        3 => Term::hash(a),
        _ => Term::xor(a, b),
    }
}

/// Base of at most `max_terms` terms, each of depth at most `depth`.
pub fn random_base<R: Rng>(rng: &mut R, max_terms: usize, depth: usize) -> Vec<Term> {
    let atoms = atom_pool();
    let n = rng.gen_range(1..=max_terms);
    (0..n).map(|_| random_term(rng, &atoms, depth)).collect()
}

/// Goals biased towards interesting cases: subterms of the base,
/// constructions over them, and unrelated terms.
pub fn random_goal<R: Rng>(rng: &mut R, base: &[Term], depth: usize) -> Term {
    let mut parts = BTreeSet::new();
    for t in base {
        subterms(t, &mut parts);
    }
    let parts: Vec<Term> = parts.into_iter().collect();
    match rng.gen_range(0..3) {
        0 => parts.choose(rng).unwrap().clone(),
        1 => random_term(rng, &parts, 2),
        _ => random_term(rng, &atom_pool(), depth),
    }
}
