//! Run-config loading: TOML file, then `--set section.key=value` overrides,
//! then validation that reports every problem at once.

use std::path::Path;

use anyhow::Context;
use ptp_core::mcts::SearchConfig;
use ptp_core::train::{NetSettings, RunConfig, TrainConfig};
use ptp_core::variants::VariantConfig;
use serde::Serialize;
use toml::{Table, Value};

use crate::UsageError;

/// Keys that must be present in the file or overrides.
const REQUIRED: [(&str, &str); 2] = [("problem", "kind"), ("train", "gamma")];

fn keys_of<T: Serialize>(value: &T) -> Vec<String> {
    match Value::try_from(value) {
        Ok(Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn known_keys(section: &str) -> Option<Vec<String>> {
    let mut keys = match section {
        "problem" => vec!["kind".into(), "n".into(), "jobs".into(), "machines".into()],
        "network" => keys_of(&NetSettings::default()),
        "search" => keys_of(&SearchConfig::default()),
        "variant" => keys_of(&VariantConfig::default()),
        "train" => keys_of(&TrainConfig::default()),
        _ => return None,
    };
    if section == "train" {
        keys.push("steps_per_episode".into());
    }
    Some(keys)
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_literal(value: &str) -> Value {
    format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()))
}

/// Applies `section.key=value` overrides in order.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<(), UsageError> {
    for o in overrides {
        let (path, value) = o.split_once('=').ok_or_else(|| UsageError(format!("override {o:?} is not key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| UsageError(format!("override key {path:?} must look like section.key")))?;
        let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
        let Value::Table(t) = entry else {
            return Err(UsageError(format!("{section} is not a section")));
        };
        t.insert(key.to_string(), parse_literal(value.trim()));
    }
    Ok(())
}

/// Checks section and key names, required keys, value types and ranges,
/// collecting every error before failing.
pub fn build(table: Table) -> Result<RunConfig, UsageError> {
    let mut errs = Vec::new();
    for (section, value) in &table {
        let Some(known) = known_keys(section) else {
            errs.push(format!("unknown section [{section}]"));
            continue;
        };
        match value {
            Value::Table(t) => {
                for key in t.keys() {
                    if !known.contains(key) {
                        errs.push(format!("unknown key {section}.{key}"));
                    }
                }
            }
            _ => errs.push(format!("{section} must be a table")),
        }
    }
    for (section, key) in REQUIRED {
        let present = table.get(section).and_then(Value::as_table).is_some_and(|t| t.contains_key(key));
        if !present {
            errs.push(format!("missing required key {section}.{key}"));
        }
    }
    if !errs.is_empty() {
        return Err(UsageError(errs.join("\n")));
    }
    // Per-section deserialisation so type errors in several sections all surface.
    fn section<T: serde::de::DeserializeOwned + Default>(table: &Table, name: &str, errs: &mut Vec<String>) -> T {
        match table.get(name) {
            None => T::default(),
            Some(v) => v.clone().try_into().unwrap_or_else(|e: toml::de::Error| {
                errs.push(format!("[{name}]: {}", e.message()));
                T::default()
            }),
        }
    }
    let problem = table.get("problem").cloned().map(|v| v.try_into()).transpose();
    let problem = match problem {
        Ok(p) => p,
        Err(e) => {
            let e: toml::de::Error = e;
            errs.push(format!("[problem]: {}", e.message()));
            None
        }
    };
    let network: NetSettings = section(&table, "network", &mut errs);
    let search: SearchConfig = section(&table, "search", &mut errs);
    let variant: VariantConfig = section(&table, "variant", &mut errs);
    let train: TrainConfig = section(&table, "train", &mut errs);
    if !errs.is_empty() {
        return Err(UsageError(errs.join("\n")));
    }
    let cfg = RunConfig { problem: problem.expect("checked above"), network, search, variant, train };
    if let Err(ptp_core::train::TrainError::Config(errs)) = cfg.validate() {
        return Err(UsageError(errs.join("\n")));
    }
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| UsageError(format!("{}: {e}", path.display())))?;
    apply_overrides(&mut table, overrides)?;
    Ok(build(table)?)
}
