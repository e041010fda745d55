//! Random small protocol specifications in the text format.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

const CHANNELS: [&str; 4] = ["insecure", "authenticated", "confidential_authenticated", "out_of_band_keypad"];
const PROPERTIES: [&str; 4] = ["confidentiality", "integrity", "authenticity", "uniqueness"];
const PLUS: [&str; 2] = ["+observe_keypad_input", "+forge_mac_realtime"];
const MINUS: [&str; 4] = ["-eavesdrop_wired", "-inject_messages", "-eavesdrop_wireless", "-forge_sender"];

fn term<R: Rng>(rng: &mut R, atoms: &[String], depth: usize) -> String {
    if depth <= 1 || rng.gen_bool(0.4) {
        return atoms.choose(rng).unwrap().clone();
    }
    let mut sub = || term(rng, atoms, depth - 1);
    let (a, b) = (sub(), sub());
    match rng.gen_range(0..5) {
        0 => format!("pair({a}, {b})"),
        1 => format!("senc({a}, {b})"),
        2 => format!("mac({a}, {b})"),
        3 => format!("hash({a})"),
        _ => format!("xor({a}, {b})"),
    }
}

/// Two principals sharing `k`, two to four messages, random tags, deltas
/// and queries. Every generated spec parses and compiles.
pub fn random_spec<R: Rng>(rng: &mut R) -> String {
    let mut out = String::from("protocol random\npublic hello\nprincipal A knows k:key\nprincipal B knows k\n");
    for d in PLUS.iter().chain(&MINUS) {
        if rng.gen_bool(0.2) {
            out.push_str(&format!("capability {d}\n"));
        }
    }
    let steps = rng.gen_range(2..=4);
    let mut own: [Vec<String>; 2] = [vec!["k".into(), "hello".into()], vec!["k".into(), "hello".into()]];
    let mut requires = String::new();
    let mut queries = Vec::new();
    for i in 1..=steps {
        let from = rng.gen_range(0..2);
        let (s, r) = if from == 0 { ("A", "B") } else { ("B", "A") };
        let nonce = format!("n{i}");
        own[from].push(nonce.clone());
        let channel = *CHANNELS.choose(rng).unwrap();
        let body = term(rng, &own[from], 3);
        let prov = if channel == "out_of_band_keypad" { " @entered_via_keypad" } else { "" };
        out.push_str(&format!("step {i} fresh {nonce} {s} -> {r} over {channel}: e{i}={body}{prov}\n"));
        if rng.gen_bool(0.6) {
            let props: Vec<&str> = if rng.gen_bool(0.1) {
                vec!["none"]
            } else {
                let n = rng.gen_range(1..=2);
                PROPERTIES.choose_multiple(rng, n).copied().collect()
            };
            requires.push_str(&format!("require step {i} e{i}: {}\n", props.join(", ")));
        }
        match rng.gen_range(0..4) {
            0 => queries.push(format!("query secrecy {nonce}")),
            1 => queries.push(format!("query auth {s} {r} on e{i}")),
            2 => queries.push(format!("query unique e{i}")),
            _ => {}
        }
    }
    if queries.is_empty() {
        queries.push("query secrecy k".into());
    }
    out.push_str(&requires);
    for q in queries {
        out.push_str(&q);
        out.push('\n');
    }
    out
}
