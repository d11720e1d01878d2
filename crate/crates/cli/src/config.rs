// `--config run.json`: an object keyed by long flag names. Keys present in
// the file replace the values given on the command line.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::{CliError, CliResult};

pub fn read_object(path: &Path) -> CliResult<serde_json::Map<String, Value>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(format!(
            "config file {}: expected a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Config(format!("config file {}: {e}", path.display()))),
    }
}

pub fn merge<T: Serialize + DeserializeOwned>(args: T, file: Option<&Path>) -> CliResult<T> {
    let Some(path) = file else {
        return Ok(args);
    };
    overlay(args, read_object(path)?)
}

pub fn overlay<T: Serialize + DeserializeOwned>(args: T, over: serde_json::Map<String, Value>) -> CliResult<T> {
    let mut base = match serde_json::to_value(&args) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("argument structs serialize to objects"),
    };
    for (key, value) in over {
        if !base.contains_key(&key) {
            return Err(CliError::Config(format!("unknown config key '{key}'")));
        }
        base.insert(key, value);
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Config(format!("config: {e}")))
}

pub fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Config(format!("missing required --{flag}")))
}
