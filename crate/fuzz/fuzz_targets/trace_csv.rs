#![no_main]

use libfuzzer_sys::fuzz_target;
use polsum::trace::{parse_trace, write_trace_to};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_trace(data, "fuzz") {
        let mut out = Vec::new();
        write_trace_to(&records, &mut out).expect("writing to memory");
        assert_eq!(parse_trace(out.as_slice(), "fuzz").expect("written trace parses"), records);
    }
});
