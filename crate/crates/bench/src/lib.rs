//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use ssbpr::rational::rat;
use ssbpr::sim::Scenario;
use ssbpr::Rational;

/// One of the scenarios shipped in the repository's `scenarios/` directory.
pub fn shipped_scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::from_path(&path).expect("shipped scenario parses")
}

/// `n` spread-out rationals in a scrambled but fixed order.
pub fn scrambled_values(n: usize) -> Vec<Rational> {
    (0..n as i128).map(|i| rat((i * 7919) % 1009 - 500, 97)).collect()
}
