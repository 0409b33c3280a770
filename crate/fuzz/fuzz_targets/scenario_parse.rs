#![no_main]

use libfuzzer_sys::fuzz_target;
use vtsirs::Scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(sc) = Scenario::from_toml_str(text) {
            if let Some(sweep) = sc.sweep {
                let values = sweep.values();
                assert_eq!(values.len(), sweep.steps);
                assert_eq!(values.last().copied(), Some(sweep.to));
            }
        }
    }
});
