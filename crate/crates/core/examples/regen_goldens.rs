//! Rewrites the golden files of the bundled corpus from the current engine.
//!
//! cargo run --release -p protoscope-core --example regen_goldens [study...]

use std::fs;

use protoscope::cases::{bundled_root, render_expected, STUDIES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let root = bundled_root();
    for name in STUDIES.iter().filter(|n| args.is_empty() || args.iter().any(|a| a == *n)) {
        let dir = root.join(name);
        let expected = dir.join("expected");
        fs::create_dir_all(&expected)?;
        for entry in fs::read_dir(&expected)? {
            let path = entry?.path();
            if path.file_name().is_some_and(|f| f.to_string_lossy().starts_with("trace-")) {
                fs::remove_file(path)?;
            }
        }
        for (rel, text) in render_expected(&dir)? {
            fs::write(dir.join(&rel), text)?;
            println!("wrote {name}/{rel}");
        }
    }
    Ok(())
}
