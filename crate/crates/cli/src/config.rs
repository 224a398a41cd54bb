//! Layering of defaults, the JSON config file and command-line flags.
//!
//! The config file is a JSON object. Keys mirror the long flags (either
//! `snake_case` or `kebab-case`). Top-level scalar keys apply to every
//! subcommand that has a flag of that name; an object under a subcommand's
//! name applies to that subcommand only. Flags given on the command line
//! override both.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

fn normalize(map: &Map<String, Value>) -> Map<String, Value> {
    map.iter().map(|(k, v)| (k.replace('-', "_"), v.clone())).collect()
}

/// Merge `file` (already parsed) under the flags in `args`.
pub fn layer<T: Serialize + DeserializeOwned + Default>(
    subcommand: &str,
    file: Option<&Value>,
    args: &T,
) -> Result<T, CliError> {
    let known = match serde_json::to_value(T::default()).expect("arguments serialize") {
        Value::Object(m) => m,
        _ => unreachable!("argument structs serialize to objects"),
    };
    let mut merged = Map::new();
    if let Some(file) = file {
        let Value::Object(root) = file else {
            return Err(CliError::Usage("config file must hold a JSON object".into()));
        };
        for (k, v) in normalize(root) {
            if !v.is_object() && known.contains_key(&k) {
                merged.insert(k, v);
            }
        }
        if let Some(section) = root.get(subcommand) {
            let Value::Object(section) = section else {
                return Err(CliError::Usage(format!("config section {subcommand:?} must be an object")));
            };
            for (k, v) in normalize(section) {
                if !known.contains_key(&k) {
                    return Err(CliError::Usage(format!("unknown key {k:?} in config section {subcommand:?}")));
                }
                merged.insert(k, v);
            }
        }
    }
    if let Value::Object(flags) = serde_json::to_value(args).expect("arguments serialize") {
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
}

pub fn read_config(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config file {} is not valid JSON: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Default, Serialize, Deserialize, Debug, PartialEq)]
    struct A {
        seed: Option<u64>,
        count: Option<usize>,
        name: Option<String>,
        max_len: Option<usize>,
    }

    #[test]
    fn flags_override_section_override_top_level() {
        let file: Value = serde_json::json!({"seed": 1, "count": 5, "other": true, "a": {"count": 7, "name": "x"}});
        let flags = A { name: Some("y".into()), ..A::default() };
        let got = layer("a", Some(&file), &flags).unwrap();
        assert_eq!(got, A { seed: Some(1), count: Some(7), name: Some("y".into()), max_len: None });
    }

    #[test]
    fn unknown_section_key_is_a_usage_error() {
        let file: Value = serde_json::json!({"a": {"cuont": 7}});
        assert!(matches!(layer("a", Some(&file), &A::default()), Err(CliError::Usage(_))));
    }

    #[test]
    fn kebab_keys_are_accepted() {
        let file: Value = serde_json::json!({"max-len": 4, "a": {"seed": 3}, "b": {"seed": 9}});
        let got = layer("a", Some(&file), &A::default()).unwrap();
        assert_eq!((got.seed, got.max_len), (Some(3), Some(4)));
    }
}
