//! Command implementations behind the `protoscope` binary.
//!
//! Each command returns its exit status together with what it would print,
//! so the commands can be driven from tests without spawning a process.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use protoscope::engine::{self, EngineError, VerificationResult};
use protoscope::{check_spec, default_defeat_rules, parse, parse_rules, ConflictReport, ProtocolSpec, SessionConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFLICTS: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

pub const PHASE1_LABEL: &str = "PAL1-equivalent";
pub const PHASE2_LABEL: &str = "PAL2-equivalent";

/// Environment variable overriding the state ceiling of the search.
pub const STATE_CEILING_VAR: &str = "PROTOSCOPE_STATE_CEILING";

#[derive(Debug, Parser)]
#[command(name = "protoscope", version, about = "Two-phase protocol design checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check trust requirements against the attacker's capabilities.
    Check(CheckArgs),
    /// Bounded symbolic verification of the specification's queries.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub file: PathBuf,
    /// JSON defeat-rule matrix replacing the default one.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub sessions: u32,
    /// Term depth bound; defaults to one more than the deepest term in the spec.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Directory for attack traces (text and JSON).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Run the requirement check first and stop if it fails.
    #[arg(long)]
    pub with_phase1: bool,
    /// JSON defeat-rule matrix used by --with-phase1.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

/// Exit status plus the text destined for stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

impl Outcome {
    fn error(message: impl std::fmt::Display) -> Self {
        Outcome { code: EXIT_ERROR, output: format!("error: {message}\n") }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Check(args) => cmd_check(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}

fn load_spec(path: &Path) -> Result<ProtocolSpec, String> {
    let source = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&source).map_err(|e| format!("{}:{e}", path.display()))
}

fn phase1(spec: &ProtocolSpec, rules: Option<&Path>) -> Result<ConflictReport, String> {
    let rules = match rules {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_rules(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => default_defeat_rules(),
    };
    Ok(check_spec(spec, &rules))
}

fn render_phase1(report: &ConflictReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json() + "\n",
        Format::Text if report.passed() => format!("{report}assurance: {PHASE1_LABEL}\n"),
        Format::Text => report.to_string(),
    }
}

pub fn cmd_check(args: &CheckArgs) -> Outcome {
    let report = match load_spec(&args.file).and_then(|spec| phase1(&spec, args.rules.as_deref())) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let code = if report.passed() { EXIT_OK } else { EXIT_CONFLICTS };
    Outcome { code, output: render_phase1(&report, args.format) }
}

pub fn state_ceiling() -> Result<usize, String> {
    match std::env::var(STATE_CEILING_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| format!("{STATE_CEILING_VAR} must be a positive integer, got `{v}`")),
        Err(_) => Ok(engine::DEFAULT_STATE_CEILING),
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let spec = match load_spec(&args.file) {
        Ok(s) => s,
        Err(e) => return Outcome::error(e),
    };
    let mut output = String::new();
    if args.with_phase1 {
        let report = match phase1(&spec, args.rules.as_deref()) {
            Ok(r) => r,
            Err(e) => return Outcome::error(e),
        };
        if args.format == Format::Text || !report.passed() {
            output.push_str(&render_phase1(&report, args.format));
        }
        if !report.passed() {
            return Outcome { code: EXIT_CONFLICTS, output };
        }
    }
    let state_ceiling = match state_ceiling() {
        Ok(c) => c,
        Err(e) => return Outcome::error(e),
    };
    let config = SessionConfig {
        sessions_per_role: args.sessions as usize,
        depth_bound: args.depth,
        state_ceiling,
        ..SessionConfig::default()
    };
    let result = match engine::verify(&spec, &config) {
        Ok(r) => r,
        Err(EngineError::SearchBudgetExceeded { ceiling, stats }) => {
            let _ = writeln!(output, "search budget of {ceiling} states exceeded");
            let _ = writeln!(
                output,
                "states explored: {}, states seen: {}, transitions: {}, largest closure: {}",
                stats.states_explored, stats.states_seen, stats.transitions, stats.max_closure_size
            );
            return Outcome { code: EXIT_BUDGET, output };
        }
        Err(e) => return Outcome::error(e),
    };
    if let Some(dir) = &args.trace_out {
        if let Err(e) = write_traces(dir, &result) {
            return Outcome::error(format!("{}: {e}", dir.display()));
        }
    }
    match args.format {
        Format::Json => output.push_str(&(result.to_json() + "\n")),
        Format::Text => output.push_str(&render_result(&result)),
    }
    let code = if result.all_hold() { EXIT_OK } else { EXIT_VIOLATION };
    Outcome { code, output }
}

fn write_traces(dir: &Path, result: &VerificationResult) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for t in result.violations() {
        let name = t.file_name();
        fs::write(dir.join(&name), t.to_text())?;
        fs::write(dir.join(name.replace(".txt", ".json")), t.to_json() + "\n")?;
    }
    Ok(())
}

fn render_result(result: &VerificationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sessions per role: {}", result.sessions_per_role);
    for r in &result.results {
        let verdict = if r.holds() { "holds within bounds" } else { "VIOLATED" };
        let _ = writeln!(out, "{}: {verdict}", r.query);
        if let Some(t) = r.trace() {
            for line in t.to_text().lines().skip(1) {
                let _ = writeln!(out, "  {line}");
            }
        }
    }
    let s = &result.stats;
    let _ = writeln!(
        out,
        "states explored: {}, transitions: {}, largest closure: {}, time: {} ms",
        s.states_explored, s.transitions, s.max_closure_size, s.wall_time_ms
    );
    if result.all_hold() {
        let _ = writeln!(out, "assurance: {PHASE2_LABEL} (bounded)");
    }
    out
}
