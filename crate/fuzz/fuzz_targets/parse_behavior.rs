#![no_main]

use diqkd_core::io::{behavior_to_json, parse_behavior};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(b) = parse_behavior(text) {
        let again = parse_behavior(&behavior_to_json(&b)).expect("serialised behavior parses");
        assert_eq!(again, b);
    }
});
