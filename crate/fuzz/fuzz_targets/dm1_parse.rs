//! Observation-mask decoder: no panics, exact encode/parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use ttc::io::{encode_dm1, parse_dm1};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_dm1(data) {
        let again = parse_dm1(&encode_dm1(&m)).expect("re-encoded mask must parse");
        assert_eq!(again.dims(), m.dims());
        assert_eq!(again.as_slice(), m.as_slice());
    }
});
