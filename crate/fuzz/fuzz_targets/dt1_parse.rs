//! Tensor dump decoder: must never panic, and anything it accepts must
//! survive an encode/parse round trip bit-exactly.

#![no_main]

use libfuzzer_sys::fuzz_target;
use ttc::io::{encode_dt1, parse_dt1};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = parse_dt1(data) {
        let again = parse_dt1(&encode_dt1(&t)).expect("re-encoded tensor must parse");
        assert_eq!(again.dims(), t.dims());
        let bits = |s: &[f64]| s.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(again.as_slice()), bits(t.as_slice()));
    }
});
