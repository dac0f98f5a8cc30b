//! Run configuration: a TOML file with a `schema_version` and one table per
//! subcommand, merged under the command-line flags.
//!
//! ```toml
//! schema_version = 1
//!
//! [train]
//! preset = "ad-fofe"
//! seed = 7
//! ```
//!
//! Precedence is built-in defaults, then the file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that relocates relative output paths.
pub const OUT_DIR_ENV: &str = "FOFELM_OUT_DIR";

pub trait CommandArgs: Serialize + DeserializeOwned + Clone {
    const NAME: &'static str;

    fn defaults() -> Self;

    fn config_path(&self) -> Option<&Path>;

    fn set_config_path(&mut self, path: Option<PathBuf>);
}

#[derive(Debug, Deserialize)]
struct RunFile {
    schema_version: u32,
    #[serde(flatten)]
    commands: BTreeMap<String, toml::Table>,
}

fn to_object<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value).expect("arguments serialize") {
        Value::Object(m) => m,
        _ => unreachable!("argument structs serialize to objects"),
    }
}

fn overlay(dst: &mut Map<String, Value>, src: Map<String, Value>) {
    for (k, v) in src {
        if !v.is_null() {
            dst.insert(k, v);
        }
    }
}

/// Reads the table for `command` from a run file, checking the schema
/// version and that every top-level table names a known subcommand.
pub fn load_table(path: &Path, command: &str, known: &[&str]) -> CliResult<Option<toml::Table>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: RunFile = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        )));
    }
    if let Some(unknown) = file.commands.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(CliError::Config(format!(
            "{}: unknown table `{unknown}`",
            path.display()
        )));
    }
    Ok(file.commands.get(command).cloned())
}

/// Merges defaults, the config file table and the flags.
pub fn resolve<T: CommandArgs>(flags: T, known: &[&str]) -> CliResult<T> {
    let mut merged = to_object(&T::defaults());
    let config_path = flags.config_path().map(Path::to_path_buf);
    if let Some(path) = &config_path {
        if let Some(table) = load_table(path, T::NAME, known)? {
            let from_file: T = toml::Value::Table(table).try_into().map_err(|e| {
                CliError::Config(format!("{}: [{}] {e}", path.display(), T::NAME))
            })?;
            overlay(&mut merged, to_object(&from_file));
        }
    }
    overlay(&mut merged, to_object(&flags));
    let mut resolved: T = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Config(e.to_string()))?;
    resolved.set_config_path(config_path);
    Ok(resolved)
}

/// The resolved arguments as a run file that reproduces the invocation.
pub fn to_run_file<T: CommandArgs>(args: &T) -> String {
    let mut doc = toml::Table::new();
    doc.insert("schema_version".into(), toml::Value::Integer(SCHEMA_VERSION.into()));
    let table = toml::Value::try_from(args).expect("arguments serialize to TOML");
    doc.insert(T::NAME.into(), table);
    toml::to_string(&doc).expect("run file serializes")
}

/// `path` relocated under `$FOFELM_OUT_DIR` when it is relative and the
/// variable is set.
pub fn out_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Resolves an output path and creates its parent directory.
pub fn prepare_output(path: &Path) -> CliResult<PathBuf> {
    let path = out_path(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    Ok(path)
}

/// Writes the reproducing run file next to an output artifact.
pub fn write_run_file<T: CommandArgs>(artifact: &Path, args: &T) -> CliResult<PathBuf> {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".config.toml");
    let path = PathBuf::from(name);
    fs::write(&path, to_run_file(args)).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
