//! Bundled case studies with their golden reports and traces.
//!
//! Layout, relative to the corpus root:
//!
//! ```text
//! <name>/spec.proto-spec
//! <name>/<variant>.proto-spec          optional alternative models
//! <name>/expected/phase1.json          ConflictReport
//! <name>/expected/phase2.json          Phase2Expectation
//! <name>/expected/<variant>.phase2.json
//! <name>/expected/trace-*.txt          one per violated query
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, validate_trace_text, EngineError, QueryVerdict, SessionConfig, VerificationResult};
use crate::informal::{check_spec, default_defeat_rules, ConflictReport};
use crate::spec::{parse, CapabilityDelta, ProtocolSpec};

pub const STUDIES: [&str; 3] = ["mana3", "wep_ska", "chat_srp"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown case study `{0}`")]
    UnknownStudy(String),
    #[error("corpus file {path}: {reason}")]
    CorpusCorrupt { path: PathBuf, reason: String },
}

fn corrupt(path: &Path, reason: impl fmt::Display) -> CorpusError {
    CorpusError::CorpusCorrupt { path: path.to_path_buf(), reason: reason.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedVerdict {
    HoldsWithinBounds,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedQuery {
    /// Query in its display form, e.g. `auth(WD, AP on resp)`.
    pub query: String,
    pub verdict: ExpectedVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Phase2Expectation {
    /// Phase 1 fails, so the symbolic phase is not reached.
    Skipped,
    Run { sessions_per_role: usize, queries: Vec<ExpectedQuery> },
}

impl Phase2Expectation {
    /// Expectation matching an engine result, with trace file names.
    pub fn from_result(result: &VerificationResult) -> Self {
        let queries = result
            .results
            .iter()
            .map(|r| ExpectedQuery {
                query: r.query.to_string(),
                verdict: if r.holds() { ExpectedVerdict::HoldsWithinBounds } else { ExpectedVerdict::Violated },
                trace: r.trace().map(|t| t.file_name()),
            })
            .collect();
        Phase2Expectation::Run { sessions_per_role: result.sessions_per_role, queries }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("expectation serializes")
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    /// `spec` for the main model, otherwise the variant's file stem.
    pub name: String,
    pub source: String,
    pub spec: ProtocolSpec,
    pub phase2: Phase2Expectation,
}

#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub name: String,
    pub dir: PathBuf,
    pub main: Model,
    pub phase1: ConflictReport,
    pub variants: Vec<Model>,
    /// Golden trace texts keyed by file name.
    pub traces: BTreeMap<String, String>,
}

impl CaseStudy {
    pub fn spec(&self) -> &ProtocolSpec {
        &self.main.spec
    }

    pub fn variant(&self, name: &str) -> Option<&Model> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// Directory of the corpus shipped with this crate.
pub fn bundled_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("cases")
}

pub fn load(name: &str) -> Result<CaseStudy, CorpusError> {
    load_from(&bundled_root(), name)
}

pub fn load_from(root: &Path, name: &str) -> Result<CaseStudy, CorpusError> {
    if !STUDIES.contains(&name) {
        return Err(CorpusError::UnknownStudy(name.to_string()));
    }
    let dir = root.join(name);
    let expected = dir.join("expected");
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| corrupt(p, e));

    let phase1_path = expected.join("phase1.json");
    let phase1 = ConflictReport::from_json(&read(&phase1_path)?).map_err(|e| corrupt(&phase1_path, e))?;
    if phase1.passed() != phase1.conflicts.is_empty() {
        return Err(corrupt(&phase1_path, "verdict disagrees with the conflict list"));
    }

    let mut traces = BTreeMap::new();
    let entries = fs::read_dir(&expected).map_err(|e| corrupt(&expected, e))?;
    let mut names: Vec<String> =
        entries.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    for f in names.iter().filter(|f| f.starts_with("trace-") && f.ends_with(".txt")) {
        let path = expected.join(f);
        let text = read(&path)?;
        validate_trace_text(&text).map_err(|e| corrupt(&path, e))?;
        traces.insert(f.clone(), text);
    }

    let model = |name: &str, spec_path: PathBuf, phase2_path: PathBuf| -> Result<Model, CorpusError> {
        let source = read(&spec_path)?;
        let spec = parse(&source).map_err(|e| corrupt(&spec_path, e))?;
        let phase2: Phase2Expectation =
            serde_json::from_str(&read(&phase2_path)?).map_err(|e| corrupt(&phase2_path, e))?;
        if let Phase2Expectation::Run { queries, .. } = &phase2 {
            for q in queries {
                match (&q.verdict, &q.trace) {
                    (ExpectedVerdict::Violated, Some(t)) if traces.contains_key(t) => {}
                    (ExpectedVerdict::Violated, _) => {
                        return Err(corrupt(&phase2_path, format!("no golden trace for {}", q.query)))
                    }
                    (ExpectedVerdict::HoldsWithinBounds, None) => {}
                    (ExpectedVerdict::HoldsWithinBounds, Some(_)) => {
                        return Err(corrupt(&phase2_path, format!("{} holds but names a trace", q.query)))
                    }
                }
            }
        }
        Ok(Model { name: name.to_string(), source, spec, phase2 })
    };

    let main = model("spec", dir.join("spec.proto-spec"), expected.join("phase2.json"))?;
    let mut variants = Vec::new();
    let mut stems: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| corrupt(&dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_string_lossy().strip_suffix(".proto-spec").map(str::to_string))
        .filter(|s| s != "spec")
        .collect();
    stems.sort();
    for stem in stems {
        variants.push(model(&stem, dir.join(format!("{stem}.proto-spec")), expected.join(format!("{stem}.phase2.json")))?);
    }
    Ok(CaseStudy { name: name.to_string(), dir, main, phase1, variants, traces })
}

/// Outcome of re-running one study against its goldens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StudyOutcome {
    pub name: String,
    pub passed: bool,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusReport {
    pub studies: Vec<StudyOutcome>,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.studies.iter().all(|s| s.passed)
    }
}

impl fmt::Display for CorpusReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.studies {
            writeln!(f, "{}: {}", s.name, if s.passed { "pass" } else { "FAIL" })?;
            for m in &s.mismatches {
                writeln!(f, "  {m}")?;
            }
        }
        Ok(())
    }
}

/// Files the current engine would write for the study in `dir`, keyed by
/// path relative to `dir`. Only the spec files need to exist, so this also
/// bootstraps a new study. Phase 2 runs at the default session bound.
pub fn render_expected(dir: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let engine_err = |path: &Path, e: EngineError| corrupt(path, e);
    let mut stems: Vec<String> = fs::read_dir(dir)
        .map_err(|e| corrupt(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_string_lossy().strip_suffix(".proto-spec").map(str::to_string))
        .collect();
    stems.sort();
    let mut out = BTreeMap::new();
    for stem in stems {
        let path = dir.join(format!("{stem}.proto-spec"));
        let source = fs::read_to_string(&path).map_err(|e| corrupt(&path, e))?;
        let spec = parse(&source).map_err(|e| corrupt(&path, e))?;
        let report = check_spec(&spec, &default_defeat_rules());
        let expectation = if report.passed() {
            let result = engine::verify(&spec, &SessionConfig::default()).map_err(|e| engine_err(&path, e))?;
            for t in result.violations() {
                out.insert(format!("expected/{}", t.file_name()), t.to_text());
            }
            Phase2Expectation::from_result(&result)
        } else {
            Phase2Expectation::Skipped
        };
        if stem == "spec" {
            out.insert("expected/phase1.json".to_string(), report.to_json() + "\n");
            out.insert("expected/phase2.json".to_string(), expectation.to_json() + "\n");
        } else {
            out.insert(format!("expected/{stem}.phase2.json"), expectation.to_json() + "\n");
        }
    }
    Ok(out)
}

/// Both phases of one run of a model.
#[derive(Debug, Clone)]
pub struct StudyRun {
    pub phase1: ConflictReport,
    /// `None` when phase 1 failed and the symbolic phase was not reached.
    pub phase2: Option<VerificationResult>,
}

/// Runs a model with extra capability deltas applied on top of its own.
/// Phase 2 only runs when phase 1 passes.
pub fn run_model(
    spec: &ProtocolSpec,
    overrides: &[CapabilityDelta],
    config: &SessionConfig,
) -> Result<StudyRun, EngineError> {
    let spec = overrides.iter().fold(spec.clone(), |s, d| s.with_delta(d.clone()));
    let phase1 = check_spec(&spec, &default_defeat_rules());
    let phase2 = if phase1.passed() { Some(engine::verify(&spec, config)?) } else { None };
    Ok(StudyRun { phase1, phase2 })
}

/// Runs every bundled study against its goldens.
pub fn run_all() -> CorpusReport {
    run_all_at(&bundled_root())
}

pub fn run_all_at(root: &Path) -> CorpusReport {
    let studies = STUDIES
        .iter()
        .map(|name| {
            let mismatches = match load_from(root, name) {
                Err(e) => vec![e.to_string()],
                Ok(study) => compare(&study),
            };
            StudyOutcome { name: name.to_string(), passed: mismatches.is_empty(), mismatches }
        })
        .collect();
    CorpusReport { studies }
}

fn compare(study: &CaseStudy) -> Vec<String> {
    let mut mismatches = Vec::new();
    let report = check_spec(study.spec(), &default_defeat_rules());
    if report != study.phase1 {
        mismatches.push(format!("phase 1 differs: got {} conflict(s)", report.conflicts.len()));
    }
    for model in std::iter::once(&study.main).chain(&study.variants) {
        let phase1_passed = check_spec(&model.spec, &default_defeat_rules()).passed();
        match (&model.phase2, phase1_passed) {
            (Phase2Expectation::Skipped, false) => {}
            (Phase2Expectation::Skipped, true) => {
                mismatches.push(format!("{}: phase 1 passes but phase 2 is expected to be skipped", model.name))
            }
            (Phase2Expectation::Run { .. }, false) => {
                mismatches.push(format!("{}: phase 1 fails before phase 2 can run", model.name))
            }
            (Phase2Expectation::Run { sessions_per_role, queries }, true) => {
                match engine::verify(&model.spec, &SessionConfig::with_sessions(*sessions_per_role)) {
                    Err(e) => mismatches.push(format!("{}: {e}", model.name)),
                    Ok(result) => compare_phase2(study, &model.name, queries, &result, &mut mismatches),
                }
            }
        }
    }
    mismatches
}

fn compare_phase2(
    study: &CaseStudy,
    model: &str,
    expected: &[ExpectedQuery],
    result: &VerificationResult,
    mismatches: &mut Vec<String>,
) {
    if expected.len() != result.results.len() {
        mismatches.push(format!("{model}: {} queries expected, {} reported", expected.len(), result.results.len()));
    }
    for (want, got) in expected.iter().zip(&result.results) {
        if want.query != got.query.to_string() {
            mismatches.push(format!("{model}: expected query {}, found {}", want.query, got.query));
            continue;
        }
        match (&got.verdict, want.verdict) {
            (QueryVerdict::HoldsWithinBounds, ExpectedVerdict::HoldsWithinBounds) => {}
            (QueryVerdict::Violated { trace }, ExpectedVerdict::Violated) => {
                let golden = want.trace.as_ref().and_then(|f| study.traces.get(f));
                if golden != Some(&trace.to_text()) {
                    mismatches.push(format!("{model}: trace for {} differs from its golden file", want.query));
                }
            }
            _ => mismatches.push(format!("{model}: verdict for {} changed", want.query)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_study_is_rejected() {
        assert!(matches!(load("tls"), Err(CorpusError::UnknownStudy(_))));
    }

    #[test]
    fn bundled_studies_load() {
        let mana = load("mana3").unwrap();
        assert_eq!(mana.spec().steps.len(), 14);
        assert_eq!(mana.spec().attacker.deltas.len(), 1);
        assert_eq!(mana.main.phase2, Phase2Expectation::Skipped);
        let wep = load("wep_ska").unwrap();
        assert_eq!(wep.spec().message_count(), 4);
        assert!(wep.variant("fresh-iv").is_some());
        let chat = load("chat_srp").unwrap();
        assert_eq!(chat.spec().principals.len(), 4);
        assert_eq!(chat.spec().numbered_steps(), 18);
    }

    #[test]
    fn mana3_override_reaches_phase_two() {
        let mana = load("mana3").unwrap();
        let minus = CapabilityDelta::minus(crate::spec::CapabilityKind::ObserveKeypadInput);
        let run = run_model(mana.spec(), &[minus], &SessionConfig::with_sessions(1)).unwrap();
        assert!(run.phase1.passed());
        assert!(run.phase2.unwrap().all_hold());
        let run = run_model(mana.spec(), &[], &SessionConfig::with_sessions(1)).unwrap();
        assert!(!run.phase1.passed() && run.phase2.is_none());
    }

    #[test]
    fn corrupt_golden_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        let src = bundled_root().join("wep_ska");
        let dst = tmp.path().join("wep_ska");
        fs::create_dir_all(dst.join("expected")).unwrap();
        for rel in ["spec.proto-spec", "expected/phase1.json", "expected/phase2.json"] {
            fs::copy(src.join(rel), dst.join(rel)).unwrap();
        }
        fs::write(dst.join("expected/trace-secrecy-k.txt"), "not a trace\n").unwrap();
        match load_from(tmp.path(), "wep_ska") {
            Err(CorpusError::CorpusCorrupt { path, .. }) => assert!(path.ends_with("trace-secrecy-k.txt")),
            other => panic!("expected corruption, got {other:?}"),
        }
        fs::remove_file(dst.join("expected/trace-secrecy-k.txt")).unwrap();
        assert!(matches!(load_from(tmp.path(), "wep_ska"), Err(CorpusError::CorpusCorrupt { .. })));
    }
}
