#![no_main]

use libfuzzer_sys::fuzz_target;
use polsum::gridworld::{Action, FeatureFrame};
use polsum::guardrail::GuardrailSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = serde_json::from_slice::<GuardrailSpec>(data) {
        assert!(spec.entries().iter().all(|e| e.forbidden.len() < Action::COUNT));
        for frame in FeatureFrame::all().step_by(97) {
            let _ = spec.mask(&frame);
        }
    }
});
