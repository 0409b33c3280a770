#![no_main]

use libfuzzer_sys::fuzz_target;
use vtsirs::equilibrium::{dfe_report, endemic_solve};
use vtsirs::thresholds::{classify, compute_thresholds};
use vtsirs::Scenario;

// Parsed scenarios go through the closed-form parts of the pipeline, which
// must return errors rather than panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
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
    for state in &sc.initial_states {
        let x = state.proportions();
        assert!(x.s() >= 0.0 && x.i() >= 0.0 && x.r() >= 0.0);
    }
});
