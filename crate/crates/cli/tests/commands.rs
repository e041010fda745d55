use std::path::PathBuf;
use std::process::Command;

use protoscope::cases::bundled_root;
use protoscope::{ConflictReport, VerificationResult};
use protoscope_cli::{cmd_check, cmd_verify, CheckArgs, Format, VerifyArgs, PHASE1_LABEL, PHASE2_LABEL};

fn case(name: &str) -> PathBuf {
    bundled_root().join(name).join("spec.proto-spec")
}

fn check(file: PathBuf, format: Format) -> CheckArgs {
    CheckArgs { file, rules: None, format }
}

fn verify(file: PathBuf) -> VerifyArgs {
    VerifyArgs { file, sessions: 2, depth: None, format: Format::Text, trace_out: None, with_phase1: false, rules: None }
}

#[test]
fn check_exit_codes() {
    let mana = cmd_check(&check(case("mana3"), Format::Text));
    assert_eq!(mana.code, 2);
    assert!(mana.output.contains("observe_keypad_input"));
    let chat = cmd_check(&check(case("chat_srp"), Format::Text));
    assert_eq!(chat.code, 0);
    assert!(chat.output.contains(PHASE1_LABEL));
    assert_eq!(cmd_check(&check(PathBuf::from("/nonexistent.proto-spec"), Format::Text)).code, 1);
}

#[test]
fn check_json_round_trips() {
    let out = cmd_check(&check(case("mana3"), Format::Json));
    let report = ConflictReport::from_json(&out.output).unwrap();
    assert_eq!(report.conflicts.len(), 1);
    assert_eq!(report.to_json() + "\n", out.output);
}

#[test]
fn custom_rules_replace_the_default_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("rules.json");
    std::fs::write(&rules, "[]").unwrap();
    let out = cmd_check(&CheckArgs { rules: Some(rules.clone()), ..check(case("mana3"), Format::Text) });
    assert_eq!(out.code, 0);
    std::fs::write(&rules, "{").unwrap();
    assert_eq!(cmd_check(&CheckArgs { rules: Some(rules), ..check(case("mana3"), Format::Text) }).code, 1);
}

#[test]
fn verify_writes_traces_on_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_verify(&VerifyArgs {
        trace_out: Some(dir.path().to_path_buf()),
        format: Format::Json,
        ..verify(case("wep_ska"))
    });
    assert_eq!(out.code, 3);
    let result = VerificationResult::from_json(&out.output).unwrap();
    assert_eq!(result.violations().count(), 2);
    for t in result.violations() {
        let text = std::fs::read_to_string(dir.path().join(t.file_name())).unwrap();
        assert_eq!(text, t.to_text());
    }
}

#[test]
fn verify_passes_chat_srp() {
    let out = cmd_verify(&verify(case("chat_srp")));
    assert_eq!(out.code, 0, "{}", out.output);
    assert!(out.output.contains(PHASE2_LABEL));
}

#[test]
fn with_phase1_stops_at_conflicts() {
    let out = cmd_verify(&VerifyArgs { with_phase1: true, ..verify(case("mana3")) });
    assert_eq!(out.code, 2);
    assert!(!out.output.contains("sessions per role"));
}

#[test]
fn spec_without_queries_verifies_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("empty.proto-spec");
    std::fs::write(&file, "protocol hello\npublic hi\nprincipal A\nprincipal B\nstep 1 A -> B over insecure: m=hi\n")
        .unwrap();
    let out = cmd_verify(&VerifyArgs { format: Format::Json, ..verify(file) });
    assert_eq!(out.code, 0, "{}", out.output);
    assert!(VerificationResult::from_json(&out.output).unwrap().results.is_empty());
}

#[test]
fn binary_honours_the_state_ceiling_variable() {
    let bin = env!("CARGO_BIN_EXE_protoscope");
    let status = Command::new(bin)
        .args(["verify", case("chat_srp").to_str().unwrap()])
        .env("PROTOSCOPE_STATE_CEILING", "10")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(4));
    assert!(String::from_utf8(status.stdout).unwrap().contains("states explored: 10"));

    let bad = Command::new(bin).args(["verify", "--sessions", "0", "x"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let check = Command::new(bin).args(["check", case("mana3").to_str().unwrap()]).output().unwrap();
    assert_eq!(check.status.code(), Some(2));
}
