use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ApplicationId;
use crate::error::{Error, Result};

pub const ALPHA_SUM_TOLERANCE: f64 = 1e-9;

/// One text source: where it lives, which application it serves, and its
/// original sampling weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub id: String,
    pub path: PathBuf,
    pub application: ApplicationId,
    pub alpha: f64,
}

/// TOML manifest:
///
/// ```toml
/// [[source]]
/// id = "va-user"
/// path = "va.txt"          # relative to the manifest's directory
/// application = "VA"
/// alpha = 0.6
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "source")]
    pub sources: Vec<SourceSpec>,
}

impl Manifest {
    pub fn new(sources: Vec<SourceSpec>) -> Result<Self> {
        let m = Manifest { sources };
        m.validate_weights()?;
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.validate_weights()?;
        Ok(m)
    }

    /// Parses, resolves relative paths against the manifest's directory
    /// and checks that every source file exists and is non-empty.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for s in &mut m.sources {
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
            match fs::metadata(&s.path) {
                Ok(meta) if meta.len() > 0 => {}
                Ok(_) => {
                    return Err(Error::Manifest(format!(
                        "source `{}`: {} is empty",
                        s.id,
                        s.path.display()
                    )))
                }
                Err(_) => {
                    return Err(Error::Manifest(format!(
                        "source `{}`: {} does not exist",
                        s.id,
                        s.path.display()
                    )))
                }
            }
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    fn validate_weights(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Manifest("no sources".into()));
        }
        let mut ids = HashSet::new();
        for s in &self.sources {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate source id `{}`", s.id)));
            }
            if !(0.0..=1.0).contains(&s.alpha) {
                return Err(Error::Manifest(format!(
                    "source `{}`: alpha {} outside [0, 1]",
                    s.id, s.alpha
                )));
            }
        }
        let sum: f64 = self.sources.iter().map(|s| s.alpha).sum();
        if (sum - 1.0).abs() > ALPHA_SUM_TOLERANCE {
            return Err(Error::Manifest(format!(
                "alphas must sum to 1 within {ALPHA_SUM_TOLERANCE:e}, got {sum}"
            )));
        }
        Ok(())
    }

    pub fn sources_for(&self, app: ApplicationId) -> impl Iterator<Item = &SourceSpec> {
        self.sources.iter().filter(move |s| s.application == app)
    }
}
