//! Fixtures shared by the criterion benches.

use protoscope::cases;
use protoscope::{ProtocolSpec, Sort, Term};
use rand::seq::SliceRandom;
use rand::Rng;

/// Spec of a bundled study, or of one of its variants.
pub fn study_spec(name: &str, variant: Option<&str>) -> ProtocolSpec {
    let study = cases::load(name).expect("bundled study loads");
    match variant {
        Some(v) => study.variant(v).expect("variant exists").spec.clone(),
        None => study.main.spec,
    }
}

fn term<R: Rng>(rng: &mut R, atoms: &[Term], depth: usize) -> Term {
    if depth <= 1 || rng.gen_bool(0.3) {
        return atoms.choose(rng).unwrap().clone();
    }
    let (a, b) = (term(rng, atoms, depth - 1), term(rng, atoms, depth - 1));
    match rng.gen_range(0..5) {
        0 => Term::pair(a, b),
        1 => Term::senc(a, b),
        2 => Term::mac(a, b),
        3 => Term::hash(a),
        _ => Term::xor(a, b),
    }
}

/// `size` random terms of depth at most `depth` over eight atoms.
pub fn random_base<R: Rng>(rng: &mut R, size: usize, depth: usize) -> Vec<Term> {
    let sorts = [Sort::Data, Sort::Nonce, Sort::Key, Sort::Agent];
    let atoms: Vec<Term> = (0..8).map(|i| Term::atom(&format!("a{i}"), sorts[i % sorts.len()])).collect();
    (0..size).map(|_| term(rng, &atoms, depth)).collect()
}
