//! Settings merged from an optional JSON file and command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Reads `file` (a JSON object; `-` in keys is read as `_`), overlays every
/// flag that was given, and deserializes the result.
pub fn resolve<F: Serialize, C: DeserializeOwned>(file: Option<&Path>, flags: &F) -> Result<C, CliError> {
    let mut map = match file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::BadConfig(format!("{}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect(),
                Ok(_) => return Err(CliError::BadConfig(format!("{}: expected a JSON object", p.display()))),
                Err(e) => return Err(CliError::BadConfig(format!("{}: {e}", p.display()))),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags).expect("flags serialize") {
        for (k, v) in given {
            if !v.is_null() {
                map.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::BadConfig(e.to_string()))
}

/// `<path>.<suffix>`, e.g. `results.csv` -> `results.csv.config.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the resolved settings next to `output`.
pub fn write_resolved<C: Serialize>(output: &Path, cfg: &C) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    fs::write(sibling(output, "config.json"), text + "\n")?;
    Ok(())
}

pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Missing(flag.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize)]
    struct Flags {
        n: Option<usize>,
        eps: Option<f64>,
    }

    #[derive(Debug, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Cfg {
        n: usize,
        eps: f64,
        trial_count: usize,
    }

    impl Default for Cfg {
        fn default() -> Self {
            Cfg { n: 4, eps: 0.1, trial_count: 3 }
        }
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"n": 8, "trial-count": 7}"#).unwrap();
        let c: Cfg = resolve(Some(&p), &Flags { n: Some(16), eps: None }).unwrap();
        assert_eq!(c, Cfg { n: 16, eps: 0.1, trial_count: 7 });
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"bogus": 1}"#).unwrap();
        assert!(matches!(resolve::<_, Cfg>(Some(&p), &Flags { n: None, eps: None }), Err(CliError::BadConfig(_))));
    }

    #[test]
    fn sibling_appends() {
        assert_eq!(sibling(Path::new("a/b.csv"), "config.json"), PathBuf::from("a/b.csv.config.json"));
    }
}
