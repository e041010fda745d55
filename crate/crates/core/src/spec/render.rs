use std::fmt::Write;

use super::{ProtocolSpec, StepKind, StepSpec};

/// Plain-text sequence diagram with inline requirement tags.
///
/// ```text
/// protocol mana3
/// principals: A, B
/// attacker: dolev_yao +observe_keypad_input
/// ---
/// 2     A -> B      [out_of_band_keypad]  R  [R: confidentiality, authenticity]
/// ```
pub fn render_tagged_diagram(spec: &ProtocolSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "protocol {}", spec.name);
    for goal in &spec.goals {
        let _ = writeln!(out, "goal: {goal}");
    }
    let principals: Vec<String> = spec
        .principals
        .iter()
        .map(|p| if p.trusted { format!("{} (trusted)", p.id) } else { p.id.clone() })
        .collect();
    let _ = writeln!(out, "principals: {}", principals.join(", "));
    let mut attacker = String::from("dolev_yao");
    for d in &spec.attacker.deltas {
        let _ = write!(attacker, " {d}");
    }
    let _ = writeln!(out, "attacker: {attacker}");
    if spec.steps.is_empty() {
        return out;
    }
    let _ = writeln!(out, "---");

    let arrows: Vec<String> = spec.steps.iter().map(arrow).collect();
    let width = arrows.iter().map(|a| a.chars().count()).max().unwrap_or(0);
    let id_width = spec.steps.iter().map(|s| s.id.to_string().len()).max().unwrap_or(1);
    for (step, arrow) in spec.steps.iter().zip(&arrows) {
        let mut line = format!("{:<id_width$}  {:<width$}  ", step.id.to_string(), arrow);
        let names: Vec<&str> = step.elements.iter().map(|e| e.name.as_str()).collect();
        line.push_str(&names.join(", "));
        if !step.fresh.is_empty() {
            let fresh: Vec<&str> = step.fresh.iter().map(|a| &*a.name).collect();
            let _ = write!(line, "  (fresh {})", fresh.join(", "));
        }
        for (element, props) in &step.requirements {
            let _ = write!(line, "  [{element}: {props}]");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn arrow(step: &StepSpec) -> String {
    match step.kind {
        StepKind::Compute => format!("{} computes", step.sender),
        StepKind::Check => format!("{} checks", step.sender),
        StepKind::Send | StepKind::OutOfBand => format!(
            "{} -> {} [{}]",
            step.sender,
            step.receiver.as_deref().unwrap_or("?"),
            step.channel.map_or("?", |c| c.as_str())
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse;

    #[test]
    fn header_only_for_empty_spec() {
        let spec = parse("protocol p\ngoal \"g\"\nprincipal A\n").unwrap();
        assert_eq!(render_tagged_diagram(&spec), "protocol p\ngoal: g\nprincipals: A\nattacker: dolev_yao\n");
    }

    #[test]
    fn tags_are_inline() {
        let src = "\
protocol p
principal A
principal B
capability +observe_keypad_input
step 1 fresh R A -> B over out_of_band_keypad: R=R
step 2 compute B: h=hash(R)
require step 1 R: confidentiality, authenticity
";
        let text = render_tagged_diagram(&parse(src).unwrap());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "attacker: dolev_yao +observe_keypad_input");
        assert_eq!(lines[4], "1  A -> B [out_of_band_keypad]  R  (fresh R)  [R: confidentiality, authenticity]");
        assert_eq!(lines[5], "2  B computes                   h");
    }
}
