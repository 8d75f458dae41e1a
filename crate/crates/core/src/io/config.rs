//! Command-line invocation parsing and layered configuration.
//!
//! A command's configuration starts from its defaults, is overlaid with the
//! JSON object from `--config`, then with each `--key value` override.
//! Dotted keys address nested objects (`--train.gamma 10`). Values are read
//! as JSON when they parse, otherwise as strings. Unknown keys are rejected
//! when the result is deserialized.

use std::fs;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: String,
    pub config: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

impl Invocation {
    /// Parses `<command> [--config PATH] [--out DIR] [--seed N] [--key VALUE]...`.
    pub fn parse<I, S>(args: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut args = args.into_iter().map(Into::into);
        let command = args.next().ok_or_else(|| usage("missing command"))?;
        if command.starts_with("--") {
            return Err(usage(format!("expected a command before {command}")));
        }
        let mut inv = Invocation {
            command,
            config: None,
            overrides: Vec::new(),
            out: None,
            seed: None,
        };
        while let Some(flag) = args.next() {
            let key = flag
                .strip_prefix("--")
                .filter(|k| !k.is_empty())
                .ok_or_else(|| usage(format!("unexpected argument {flag:?}")))?;
            let (key, inline) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), Some(v.to_string())),
                None => (key.to_string(), None),
            };
            let value = match inline {
                Some(v) => v,
                None => args
                    .next()
                    .ok_or_else(|| usage(format!("--{key} needs a value")))?,
            };
            match key.as_str() {
                "config" => inv.config = Some(PathBuf::from(value)),
                "out" => inv.out = Some(PathBuf::from(value)),
                "seed" => {
                    let seed = value
                        .parse()
                        .map_err(|_| usage(format!("--seed expects an unsigned integer, got {value:?}")))?;
                    inv.seed = Some(seed);
                }
                _ => inv.overrides.push((key.replace('-', "_"), value)),
            }
        }
        Ok(inv)
    }

    /// Output directory, defaulting to `mrmap_out/<command>`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("mrmap_out").join(&self.command))
    }

    /// Builds a configuration of type `T`. `seed_path` names the field that
    /// `--seed` sets, as a dotted path.
    pub fn resolve<T>(&self, seed_path: &str) -> Result<T>
    where
        T: Serialize + DeserializeOwned + Default,
    {
        let mut tree = serde_json::to_value(T::default())?;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            let file: Value = serde_json::from_str(&text)
                .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
            if !file.is_object() {
                return Err(usage("config file must hold a JSON object"));
            }
            merge(&mut tree, file);
        }
        for (key, raw) in &self.overrides {
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            set_path(&mut tree, key, value)?;
        }
        if let Some(seed) = self.seed {
            set_path(&mut tree, seed_path, Value::from(seed))?;
        }
        serde_json::from_value(tree).map_err(|e| usage(format!("invalid configuration: {e}")))
    }
}

/// Recursively overlays `patch` onto `base`. Keys absent from `base` are
/// inserted so that deserialization can reject them by name.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(tree: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(usage(format!("malformed key {path:?}")));
        }
        let map: &mut Map<String, Value> = node
            .as_object_mut()
            .ok_or_else(|| usage(format!("key {path:?} descends into a non-object")))?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}
