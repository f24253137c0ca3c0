//! Flat `key=value` configuration files.
//!
//! One assignment per line; blank lines and `#` comment lines are skipped;
//! whitespace around keys and values is trimmed; a key assigned twice keeps
//! the last value. The parser only produces the key/value map — interpreting
//! the keys is the caller's job, so unknown keys are not an error here.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parses configuration text into a key → value map (last assignment wins).
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::MalformedInput(format!(
                "config line {}: expected key=value, got {line:?}",
                idx + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::MalformedInput(format!(
                "config line {}: empty key",
                idx + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// [`parse_config`] over raw bytes; non-UTF-8 input is malformed.
pub fn parse_config_bytes(bytes: &[u8]) -> Result<BTreeMap<String, String>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::MalformedInput("config file is not UTF-8".into()))?;
    parse_config(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_assignments_comments_and_blanks() {
        let map = parse_config(
            "# experiment\n\nseed = 7\nscheme=twmac-tt\n  missing_rate =0.9  \nempty=\n",
        )
        .unwrap();
        assert_eq!(map["seed"], "7");
        assert_eq!(map["scheme"], "twmac-tt");
        assert_eq!(map["missing_rate"], "0.9");
        assert_eq!(map["empty"], "");
        assert_eq!(map.len(), 4);
    }

    #[test]
    fn last_assignment_wins() {
        let map = parse_config("a=1\na=2\na = 3\n").unwrap();
        assert_eq!(map["a"], "3");
        assert_eq!(map.len(), 1);
    }

    #[test]
    fn values_may_contain_equals() {
        let map = parse_config("path=x=y.dt1\n").unwrap();
        assert_eq!(map["path"], "x=y.dt1");
    }

    #[test]
    fn rejects_non_assignments() {
        assert_eq!(
            parse_config("seed 7\n").unwrap_err().code(),
            "malformed-input"
        );
        assert!(parse_config("=value\n").is_err());
        assert!(parse_config_bytes(b"\xff\xfe").is_err());
        assert!(parse_config_bytes(b"k=v\n").is_ok());
    }
}
