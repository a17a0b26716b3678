#![no_main]

use libfuzzer_sys::fuzz_target;
use polsum::gridworld::{parse_suite, render_suite};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(suite) = parse_suite(text, "fuzz") {
        // accepted input must survive a render/parse round trip
        let again = parse_suite(&render_suite(&suite), "fuzz").expect("rendered suite parses");
        assert_eq!(again, suite);
    }
});
