use std::path::PathBuf;

use proptest::prelude::*;
use vtsirs::equilibrium::{dfe_report, endemic_solve};
use vtsirs::thresholds::{classify, compute_thresholds};
use vtsirs::Scenario;

const VALID: &str = include_str!("../../../scenarios/sweep_beta2.toml");

/// What the numerics fuzz target does with a parsed scenario.
fn exercise(text: &str) {
    let Ok(sc) = Scenario::from_toml_str(text) else {
        return;
    };
    let p = &sc.params;
    let _ = dfe_report(p);
    if let Ok(eq) = endemic_solve(p) {
        if let Ok(t) = compute_thresholds(p, eq.as_ref()) {
            let _ = classify(&t);
        }
    }
    if let Some(sweep) = sc.sweep {
        assert_eq!(sweep.values().len(), sweep.steps);
    }
}

#[test]
fn fuzz_corpus_replays_cleanly() {
    let root: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fuzz", "corpus"]
        .iter()
        .collect();
    let mut seen = 0;
    for target in std::fs::read_dir(&root).unwrap() {
        for entry in std::fs::read_dir(target.unwrap().path()).unwrap() {
            let bytes = std::fs::read(entry.unwrap().path()).unwrap();
            if let Ok(text) = std::str::from_utf8(&bytes) {
                exercise(text);
            }
            seen += 1;
        }
    }
    assert!(seen > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,400}") {
        exercise(&text);
    }

    #[test]
    fn mutated_scenarios_never_panic(edits in proptest::collection::vec((0..VALID.len(), any::<u8>()), 1..6)) {
        let mut bytes = VALID.as_bytes().to_vec();
        for (pos, byte) in edits {
            bytes[pos] = byte;
        }
        if let Ok(text) = String::from_utf8(bytes) {
            exercise(&text);
        }
    }

    #[test]
    fn numeric_extremes_never_panic(
        v in proptest::array::uniform11(prop_oneof![
            Just(0.0), Just(1e-300), Just(1e300), Just(f64::MAX), 0.0..10.0f64
        ])
    ) {
        let names = ["b0", "b1", "beta1", "beta2", "b2", "d", "eps1", "eps2", "alpha", "gamma", "lambda"];
        let mut text = String::from("schema = 1\n[params]\n");
        for (n, x) in names.iter().zip(v) {
            text.push_str(&format!("{n} = {x:e}\n"));
        }
        exercise(&text);
    }
}
