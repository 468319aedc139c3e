#![no_main]

use diqkd_core::io::{parse_state, state_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rho) = parse_state(text) {
        let again = parse_state(&state_to_json(&rho)).expect("serialised state parses");
        assert_eq!(again.dims(), rho.dims());
        assert_eq!(again.matrix(), rho.matrix());
    }
});
