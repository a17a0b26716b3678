#![no_main]

use libfuzzer_sys::fuzz_target;
use polsum::config::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = PipelineConfig::from_toml(text, "fuzz") {
        assert_eq!(PipelineConfig::from_toml(&config.to_toml(), "fuzz").expect("round trip"), config);
    }
});
