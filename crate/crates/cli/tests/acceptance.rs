//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;
#[path = "../../core/tests/support/specgen.rs"]
mod specgen;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use protoscope::cases::{self, bundled_root};
use protoscope::engine::{replay_spec, verify};
use protoscope::{
    check_spec, close, default_defeat_rules, derivable, parse, standard_rules, CapabilityDelta, CapabilityKind,
    ConflictReport, Query, SessionConfig, Sort, Term, TraceEvent, TrustProperty, VerificationResult,
};
use protoscope_cli::{cmd_check, cmd_verify, CheckArgs, Format, VerifyArgs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ONE_SECOND: Duration = Duration::from_secs(1);

type Verdict = Result<String, String>;
type Check = (&'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn case(name: &str) -> PathBuf {
    bundled_root().join(name).join("spec.proto-spec")
}

fn verify_json(file: PathBuf) -> (i32, VerificationResult) {
    let out = cmd_verify(&VerifyArgs {
        file,
        sessions: 2,
        depth: None,
        format: Format::Json,
        trace_out: None,
        with_phase1: false,
        rules: None,
    });
    let result = VerificationResult::from_json(&out.output).expect("verify prints a result");
    (out.code, result)
}

fn mana3_phase1() -> Verdict {
    let start = Instant::now();
    let out = cmd_check(&CheckArgs { file: case("mana3"), rules: None, format: Format::Json });
    let elapsed = start.elapsed();
    let report = ConflictReport::from_json(&out.output).map_err(|e| e.to_string())?;
    ensure(out.code == 2 && !report.passed(), format!("exit {}", out.code))?;
    ensure(report.conflicts.len() == 1, format!("{} conflicts", report.conflicts.len()))?;
    let c = &report.conflicts[0];
    ensure(
        c.step.to_string() == "2"
            && c.element == "R"
            && c.property == TrustProperty::Confidentiality
            && c.capability == "observe_keypad_input",
        format!("conflict is ({}, {}, {}, {})", c.step, c.element, c.property, c.capability),
    )?;
    within(elapsed, ONE_SECOND)?;
    Ok(format!("1 conflict (2, R, confidentiality, observe_keypad_input), exit 2, {elapsed:.2?}"))
}

fn mana3_counterfactual() -> Verdict {
    let start = Instant::now();
    let study = cases::load("mana3").map_err(|e| e.to_string())?;
    let spec = study.spec().with_delta(CapabilityDelta::minus(CapabilityKind::ObserveKeypadInput));
    let report = check_spec(&spec, &default_defeat_rules());
    let elapsed = start.elapsed();
    ensure(report.passed() && report.conflicts.is_empty(), format!("{} conflicts", report.conflicts.len()))?;
    within(elapsed, ONE_SECOND)?;
    Ok(format!("0 conflicts with -observe_keypad_input, {elapsed:.2?}"))
}

fn wep_attack() -> Verdict {
    let start = Instant::now();
    let (code, result) = verify_json(case("wep_ska"));
    let elapsed = start.elapsed();
    ensure(code == 3, format!("exit {code}"))?;
    let spec = cases::load("wep_ska").map_err(|e| e.to_string())?.main.spec;
    let config = SessionConfig::with_sessions(2);
    let mut secrecy = false;
    let mut auth = None;
    for r in &result.results {
        let trace = r.trace().ok_or_else(|| format!("{} holds", r.query))?;
        ensure(replay_spec(&spec, trace, &config) == Ok(true), format!("trace for {} does not replay", r.query))?;
        match &r.query {
            Query::Secrecy { .. } => secrecy = true,
            Query::Authentication { .. } => auth = Some(trace),
            q => return Err(format!("unexpected query {q}")),
        }
    }
    let auth = auth.ok_or("no authentication query")?;
    ensure(secrecy, "no secrecy query")?;

    let first = auth.first_injection().ok_or("auth trace has no injection")?;
    ensure(
        auth.events[..first].iter().all(|e| e.is_honest() || matches!(e, TraceEvent::Begin { .. })),
        "attacker events before the first injection",
    )?;
    let TraceEvent::AttackerInject { term: injected, .. } = &auth.events[first] else { unreachable!() };
    let tail = &auth.events[first + 1..];
    let accepted = matches!(
        tail,
        [TraceEvent::HonestReceive { instance, term, .. }, TraceEvent::End { .. }]
            if instance.role == "AP" && term == injected && matches!(term, Term::XorMask(..))
    );
    ensure(accepted, "trace does not end with AP accepting the injected xor term")?;
    ensure(result.stats.states_explored < 1_000_000, format!("{} states", result.stats.states_explored))?;
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "secrecy and auth violated, traces replay, {} honest events then 1 injection, {} states, {elapsed:.2?}",
        first, result.stats.states_explored
    ))
}

fn wep_fix() -> Verdict {
    let start = Instant::now();
    let (code, result) = verify_json(bundled_root().join("wep_ska/fresh-iv.proto-spec"));
    let elapsed = start.elapsed();
    ensure(code == 0 && result.all_hold(), format!("exit {code}"))?;
    ensure(result.results.len() == 2, format!("{} queries", result.results.len()))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("both queries hold within bounds, {} states, {elapsed:.2?}", result.stats.states_explored))
}

fn chat_srp_pass() -> Verdict {
    let start = Instant::now();
    let check = cmd_check(&CheckArgs { file: case("chat_srp"), rules: None, format: Format::Json });
    let report = ConflictReport::from_json(&check.output).map_err(|e| e.to_string())?;
    ensure(check.code == 0 && report.conflicts.is_empty(), format!("{} conflicts", report.conflicts.len()))?;
    let (code, result) = verify_json(case("chat_srp"));
    let elapsed = start.elapsed();
    ensure(code == 0 && result.all_hold(), format!("exit {code}"))?;
    let names: Vec<String> = result.results.iter().map(|r| r.query.to_string()).collect();
    let expected =
        ["secrecy(hash(pair(nonce, email)))", "secrecy(ID)", "auth(User, WS on ticket)", "unique(ticket)"];
    ensure(names == expected, format!("queries {names:?}"))?;
    within(elapsed, Duration::from_secs(120))?;
    Ok(format!("0 conflicts, 4 queries hold, {} states, {elapsed:.2?}", result.stats.states_explored))
}

fn oracle_equivalence() -> Verdict {
    const BOUND: usize = 5;
    let start = Instant::now();
    let rules = standard_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut agree, mut total, mut positive) = (0, 0, 0);
    for _ in 0..500 {
        let base = oracle::random_base(&mut rng, 6, 3);
        let kb = close(base.clone(), &rules, BOUND).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let goal = oracle::random_goal(&mut rng, &base, 3);
            let expected = oracle::brute_derivable(&base, &goal, BOUND);
            total += 1;
            positive += usize::from(expected);
            agree += usize::from(derivable(&kb, &goal).0 == expected);
        }
    }
    let elapsed = start.elapsed();
    ensure(agree == total, format!("{agree}/{total} agree"))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("{agree}/{total} agree ({positive} derivable), {elapsed:.2?}"))
}

fn xor_rules() -> Verdict {
    let rules = standard_rules();
    let d = |n: &str| Term::atom(n, Sort::Data);
    let k = Term::atom("k", Sort::Key);
    let holds = |base: Vec<Term>, goal: &Term| close(base, &rules, 4).map(|kb| kb.contains(goal)).unwrap_or(false);
    ensure(holds(vec![d("c"), Term::xor(d("c"), k.clone())], &k), "{c, xor(c,k)} does not derive k")?;
    ensure(
        holds(vec![Term::xor(d("m1"), k.clone()), d("m1"), d("m2")], &Term::xor(d("m2"), k.clone())),
        "{xor(m1,k), m1, m2} does not derive xor(m2,k)",
    )?;
    ensure(!holds(vec![Term::mac(d("m"), k.clone())], &k), "{mac(m,k)} derives k")?;
    Ok("key recovery, keystream reuse, mac opacity".into())
}

fn property_suite() -> Verdict {
    const INSTANCES: usize = 200;
    let start = Instant::now();
    let rules = standard_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..INSTANCES {
        let small = oracle::random_base(&mut rng, 4, 3);
        let mut large = small.clone();
        large.extend(oracle::random_base(&mut rng, 2, 3));
        let a = close(small, &rules, 5).map_err(|e| e.to_string())?;
        let b = close(large.clone(), &rules, 5).map_err(|e| e.to_string())?;
        let in_b: BTreeSet<&Term> = b.analysed().collect();
        ensure(a.analysed().all(|t| in_b.contains(t)), format!("closure instance {i} not monotone"))?;
        let again = close(b.analysed().cloned().collect::<Vec<_>>(), &rules, 5).map_err(|e| e.to_string())?;
        ensure(again.analysed().eq(b.analysed()), format!("closure instance {i} not idempotent"))?;
        for _ in 0..5 {
            let g = oracle::random_goal(&mut rng, &large, 3);
            ensure(!a.contains(&g) || b.contains(&g), format!("closure instance {i} loses {g}"))?;
            ensure(again.contains(&g) == b.contains(&g), format!("closure instance {i} changes on {g}"))?;
        }
    }

    let defeat = default_defeat_rules();
    let config = SessionConfig::with_sessions(1);
    let mut traces = 0;
    for i in 0..INSTANCES {
        let source = specgen::random_spec(&mut rng);
        let spec = parse(&source).map_err(|e| format!("spec {i}: {e}"))?;
        let report = check_spec(&spec, &defeat);
        for kind in CapabilityKind::ALL {
            let minus = check_spec(&spec.with_delta(CapabilityDelta::minus(kind)), &defeat);
            let kept: Vec<_> = report.conflicts.iter().filter(|c| c.capability != kind.as_str()).cloned().collect();
            ensure(minus.conflicts == kept, format!("spec {i}: -{kind} is unsound"))?;
            if !kind.in_base_model() {
                let plus = check_spec(&spec.with_delta(CapabilityDelta::plus(kind)), &defeat);
                ensure(plus.conflicts.len() >= report.conflicts.len(), format!("spec {i}: +{kind} drops conflicts"))?;
            }
        }
        let first = verify(&spec, &config).map_err(|e| format!("spec {i}: {e}"))?;
        let second = verify(&spec, &config).map_err(|e| format!("spec {i}: {e}"))?;
        ensure(first.to_json() == second.to_json(), format!("spec {i}: nondeterministic"))?;
        for t in first.violations() {
            ensure(replay_spec(&spec, t, &config) == Ok(true), format!("spec {i}: {} does not replay", t.violated))?;
            traces += 1;
        }
    }
    Ok(format!(
        "{INSTANCES} closure instances, {INSTANCES} specs, {traces} traces replayed, {:.2?}",
        start.elapsed()
    ))
}

fn main() -> ExitCode {
    let criteria: [Check; 8] = [
        ("1 mana3 phase-1 conflict", mana3_phase1),
        ("2 mana3 without keypad observation", mana3_counterfactual),
        ("3 wep_ska attack at 2 sessions", wep_attack),
        ("4 wep_ska fresh IV", wep_fix),
        ("5 chat_srp full pass", chat_srp_pass),
        ("6 deduction oracle", oracle_equivalence),
        ("7 xor rules", xor_rules),
        ("8 property suite", property_suite),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
