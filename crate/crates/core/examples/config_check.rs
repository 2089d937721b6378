//! Parses a config file (or a bundled preset name) and prints either the
//! resolved document and its hash or every problem with its path.
//!
//! cargo run --example config_check -- crates/core/configs/fig2.json

use echo_sim::io::{parse_config, preset, preset_names, ConfigError};

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "fig2".into());
    let parsed = match preset(&arg) {
        Some(job) => Ok(job),
        None => match std::fs::read_to_string(&arg) {
            Ok(text) => parse_config(&text),
            Err(e) => {
                eprintln!("{arg}: {e} (presets: {})", preset_names().join(", "));
                std::process::exit(1);
            }
        },
    };
    match parsed.and_then(|job| job.plan().map(|plan| (job, plan))) {
        Ok((job, plan)) => {
            println!("{}", job.to_json_pretty());
            println!("hash {}", job.hash());
            for w in &plan.warnings {
                println!("warning: {w}");
            }
        }
        Err(ConfigError::Syntax { line, column, message }) => {
            eprintln!("{arg}:{line}:{column}: {message}");
            std::process::exit(1);
        }
        Err(e) => {
            for issue in e.issues() {
                eprintln!("{}: {}", issue.path, issue.message);
            }
            std::process::exit(1);
        }
    }
}
