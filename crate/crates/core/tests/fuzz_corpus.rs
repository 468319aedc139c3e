//! Replays the fuzz corpus seeds through the parsers with the fuzz targets' round-trip check.

use std::fs;
use std::path::Path;

use diqkd_core::io::{behavior_to_json, parse_behavior, parse_state, state_to_json};

fn seeds(target: &str) -> Vec<String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<String> = fs::read_dir(dir)
        .expect("corpus directory exists")
        .map(|e| fs::read_to_string(e.unwrap().path()).unwrap())
        .collect();
    out.sort();
    out
}

#[test]
fn behavior_seeds_round_trip() {
    let seeds = seeds("parse_behavior");
    let mut accepted = 0;
    for text in &seeds {
        if let Ok(b) = parse_behavior(text) {
            assert_eq!(parse_behavior(&behavior_to_json(&b)).unwrap(), b);
            accepted += 1;
        }
    }
    assert!(accepted >= 1 && accepted < seeds.len());
}

#[test]
fn state_seeds_round_trip() {
    let seeds = seeds("parse_state");
    let mut accepted = 0;
    for text in &seeds {
        if let Ok(rho) = parse_state(text) {
            let again = parse_state(&state_to_json(&rho)).unwrap();
            assert_eq!(again.matrix(), rho.matrix());
            accepted += 1;
        }
    }
    assert!(accepted >= 1 && accepted < seeds.len());
}
