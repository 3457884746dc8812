#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = v2sim::photoion::parse_mode_csv(text, 2.0) {
            assert!(m.validate().is_ok());
        }
    }
});
