#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = v2sim::photoion::parse_cross_section_csv(text) {
            let _ = s.eval(s.threshold_ev() + 0.1);
        }
    }
});
