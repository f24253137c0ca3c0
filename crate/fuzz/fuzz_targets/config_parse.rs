//! Key=value config parser: no panics; an accepted map serializes to lines
//! that parse back to the same map.

#![no_main]

use libfuzzer_sys::fuzz_target;
use ttc::config::parse_config_bytes;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = parse_config_bytes(data) {
        let mut text = String::new();
        for (k, v) in &map {
            text.push_str(k);
            text.push('=');
            text.push_str(v);
            text.push('\n');
        }
        let again = parse_config_bytes(text.as_bytes()).expect("serialized map must parse");
        assert_eq!(again, map);
    }
});
