#![no_main]

use libfuzzer_sys::fuzz_target;
use polsum::bdr::RuleSet;
use polsum::summary::RulesDocument;

fuzz_target!(|data: &[u8]| {
    if let Ok(rules) = serde_json::from_slice::<RuleSet>(data) {
        let text = serde_json::to_string(&rules).unwrap();
        assert_eq!(serde_json::from_str::<RuleSet>(&text).unwrap(), rules);
    }
    if let Ok(doc) = serde_json::from_slice::<RulesDocument>(data) {
        let _ = doc.model();
    }
});
