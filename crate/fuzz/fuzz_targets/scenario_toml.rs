#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = v2sim::scenario::Scenario::from_toml_str(text) {
            // Anything that parses must survive validation and a round trip.
            let _ = s.validate(std::path::Path::new("."));
            if let Ok(again) = s.to_toml_string() {
                assert!(v2sim::scenario::Scenario::from_toml_str(&again).is_ok());
            }
        }
    }
});
