#![no_main]

use fuzzdrive::params::{format_params, parse_params};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = parse_params(text) {
        // Anything accepted is valid and survives a write/read cycle.
        p.validate().expect("accepted params must validate");
        assert_eq!(parse_params(&format_params(&p)).expect("round trip"), p);
    }
});
