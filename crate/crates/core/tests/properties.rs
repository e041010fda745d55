#[path = "support/oracle.rs"]
mod oracle;
#[path = "support/specgen.rs"]
mod specgen;

use std::collections::BTreeSet;

use proptest::prelude::*;
use protoscope::engine::{replay_spec, verify};
use protoscope::{check_spec, close, default_defeat_rules, parse, standard_rules, CapabilityDelta, CapabilityKind, SessionConfig, Term};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BOUND: usize = 5;

fn base_and_goals() -> impl Strategy<Value = (Vec<Term>, Vec<Term>, Vec<Term>)> {
    any::<u64>().prop_map(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = oracle::random_base(&mut rng, 4, 3);
        let mut large = small.clone();
        large.extend(oracle::random_base(&mut rng, 3, 3));
        let goals = (0..10).map(|_| oracle::random_goal(&mut rng, &large, 3)).collect();
        (small, large, goals)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closure_is_monotone((small, large, goals) in base_and_goals()) {
        let rules = standard_rules();
        let a = close(small, &rules, BOUND).unwrap();
        let b = close(large, &rules, BOUND).unwrap();
        let analysed_b: BTreeSet<&Term> = b.analysed().collect();
        prop_assert!(a.analysed().all(|t| analysed_b.contains(t)));
        for g in &goals {
            prop_assert!(!a.contains(g) || b.contains(g), "{}", g);
        }
    }

    #[test]
    fn closure_is_idempotent((base, _, goals) in base_and_goals()) {
        let rules = standard_rules();
        let once = close(base, &rules, BOUND).unwrap();
        let twice = close(once.analysed().cloned().collect::<Vec<_>>(), &rules, BOUND).unwrap();
        prop_assert_eq!(once.analysed().collect::<Vec<_>>(), twice.analysed().collect::<Vec<_>>());
        for g in &goals {
            prop_assert_eq!(once.contains(g), twice.contains(g));
        }
    }

    #[test]
    fn witnesses_replay((base, _, goals) in base_and_goals()) {
        let rules = standard_rules();
        let kb = close(base.clone(), &rules, BOUND).unwrap();
        let set: BTreeSet<Term> = base.into_iter().collect();
        for g in goals.iter().chain(kb.analysed()) {
            if let Some(d) = kb.derivation(g) {
                let replayed = d.replay(&set, &rules);
                prop_assert_eq!(replayed.as_ref(), Some(g));
            }
        }
    }
}

#[test]
fn deltas_are_sound_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rules = default_defeat_rules();
    for _ in 0..250 {
        let source = specgen::random_spec(&mut rng);
        let spec = parse(&source).unwrap_or_else(|e| panic!("{e}\n{source}"));
        let report = check_spec(&spec, &rules);
        assert_eq!(report.passed(), report.conflicts.is_empty());
        for kind in CapabilityKind::ALL {
            let removed = check_spec(&spec.with_delta(CapabilityDelta::minus(kind)), &rules);
            let kept: Vec<_> = report.conflicts.iter().filter(|c| c.capability != kind.as_str()).cloned().collect();
            assert_eq!(removed.conflicts, kept, "-{kind}\n{source}");
            if !kind.in_base_model() {
                let added = check_spec(&spec.with_delta(CapabilityDelta::plus(kind)), &rules);
                assert!(added.conflicts.len() >= report.conflicts.len(), "+{kind}\n{source}");
            }
        }
    }
}

#[test]
fn random_specs_verify_deterministically_with_replayable_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let config = SessionConfig::with_sessions(1);
    let mut violations = 0;
    for _ in 0..200 {
        let source = specgen::random_spec(&mut rng);
        let spec = parse(&source).unwrap();
        let first = verify(&spec, &config).unwrap_or_else(|e| panic!("{e}\n{source}"));
        let second = verify(&spec, &config).unwrap();
        assert_eq!(first.to_json(), second.to_json(), "{source}");
        for t in first.violations() {
            assert!(replay_spec(&spec, t, &config).unwrap(), "{}\n{source}", t.to_text());
            violations += 1;
        }
    }
    assert!(violations > 20, "only {violations} violations in the sample");
}
