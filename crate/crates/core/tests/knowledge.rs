#[path = "support/oracle.rs"]
mod oracle;

use protoscope::{close, derivable, standard_rules, Sort, Term};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use oracle::{brute_derivable, random_base, random_goal};

const BOUND: usize = 5;

#[test]
fn closure_agrees_with_brute_force() {
    let rules = standard_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut yes, mut no) = (0, 0);
    for _ in 0..150 {
        let base = random_base(&mut rng, 6, 3);
        let kb = close(base.clone(), &rules, BOUND).unwrap();
        for _ in 0..20 {
            let goal = random_goal(&mut rng, &base, 3);
            let expected = brute_derivable(&base, &goal, BOUND);
            let (got, witness) = derivable(&kb, &goal);
            assert_eq!(got, expected, "base {base:?} goal {goal}");
            if let Some(w) = witness {
                let base_set = base.iter().cloned().collect();
                assert_eq!(w.replay(&base_set, &rules).as_ref(), Some(&goal));
                yes += 1;
            } else {
                no += 1;
            }
        }
    }
    assert!(yes > 300 && no > 300, "degenerate sample: {yes} derivable, {no} not");
}

#[test]
fn oracle_handles_the_keystream_rules() {
    let a = |n: &str| Term::atom(n, Sort::Data);
    let k = Term::atom("k", Sort::Key);
    assert!(brute_derivable(&[a("c"), Term::xor(a("c"), k.clone())], &k, BOUND));
    assert!(brute_derivable(&[Term::xor(a("m1"), k.clone()), a("m1"), a("m2")], &Term::xor(a("m2"), k.clone()), BOUND));
    assert!(!brute_derivable(&[Term::mac(a("m"), k.clone())], &k, BOUND));
}
