#![no_main]

use libfuzzer_sys::fuzz_target;
use svlab::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        // Accepted configs serialize and parse back to themselves.
        let again = serde_json::to_string(&cfg).expect("valid config serializes");
        let back = RunConfig::from_json(&again).expect("serialized config parses");
        assert_eq!(serde_json::to_string(&back).unwrap(), again);
    }
});
