//! Binary PGM/PPM decoder: no panics; accepted images re-encode to a
//! canonical form that parses back to the same tensor (pixel values are
//! exact multiples of 1/255, so quantization is lossless here).

#![no_main]

use libfuzzer_sys::fuzz_target;
use ttc::io::{encode_image, parse_image};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = parse_image(data) {
        let bytes = encode_image(&t).expect("parsed image shape must re-encode");
        let again = parse_image(&bytes).expect("canonical encoding must parse");
        assert_eq!(again.dims(), t.dims());
        assert_eq!(again.as_slice(), t.as_slice());
    }
});
