//! Config files. A TOML or JSON file is turned into flags that are placed
//! before the command-line flags, so the command line wins on conflict.
//!
//! Keys are flag names (`rho_max` and `rho-max` both work). Values under a
//! table named after the subcommand are used when present; otherwise the
//! top-level keys are.

use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, Result};

pub fn flags_for(path: &Path, text: &str, subcommand: &str) -> Result<Vec<String>> {
    let bad = |msg: String| CliError::Config {
        path: path.to_path_buf(),
        msg,
    };
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let root: Value = if is_json {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))?
    } else {
        let table: toml::Table = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(table).map_err(|e| bad(e.to_string()))?
    };
    let Value::Object(root) = root else {
        return Err(bad("top level must be a table".into()));
    };
    let section = match root.get(subcommand) {
        Some(Value::Object(s)) => s.clone(),
        _ => root,
    };

    let mut args = Vec::new();
    for (key, value) in section {
        if matches!(value, Value::Object(_)) && key != "law_json" && key != "law-json" {
            // another command's section
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => args.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => args.extend([flag, n.to_string()]),
            Value::String(s) => args.extend([flag, s]),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s.clone()),
                        Value::Number(n) => Ok(n.to_string()),
                        other => Err(bad(format!("{key}: unsupported list item {other}"))),
                    })
                    .collect::<Result<_>>()?;
                args.extend([flag, parts.join(",")]);
            }
            obj @ Value::Object(_) => args.extend([flag, obj.to_string()]),
        }
    }
    Ok(args)
}
