//! Run configuration: `key = value` lines grouped under `[section]`
//! headers. Parsing keeps section and key order, so [`RunConfig::to_text`]
//! reproduces a canonical file exactly.

use std::path::{Path, PathBuf};

use ini::Ini;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunConfig {
    sections: Vec<(String, Vec<(String, String)>)>,
    /// Directory relative paths are resolved against.
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        let mut sections: Vec<(String, Vec<(String, String)>)> = Vec::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(CliError::usage(format!(
                        "config: key `{key}` appears before any [section]"
                    )));
                }
                continue;
            };
            if sections.iter().any(|(s, _)| s == name) {
                return Err(CliError::usage(format!("config: section [{name}] appears twice")));
            }
            let mut entries: Vec<(String, String)> = Vec::new();
            for (k, v) in props.iter() {
                if entries.iter().any(|(e, _)| e == k) {
                    return Err(CliError::usage(format!("config: key `{name}.{k}` appears twice")));
                }
                entries.push((k.to_string(), v.trim().to_string()));
            }
            sections.push((name.to_string(), entries));
        }
        Ok(Self {
            sections,
            base_dir: PathBuf::new(),
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut ini = Ini::new();
        for (name, entries) in &self.sections {
            let mut s = ini.with_section(Some(name.as_str()));
            for (k, v) in entries {
                s.set(k.as_str(), v.as_str());
            }
        }
        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("ini output is utf-8")
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex_digest(Sha256::digest(self.to_text().as_bytes()).as_slice())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|(s, _)| s == section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, e)| e.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let value = value.into();
        let idx = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[idx].1;
        match entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => entries.push((key.to_string(), value)),
        }
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> CliResult<Option<f64>> {
        self.get(section, key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::usage(format!("config: `{section}.{key}` = `{v}` is not a finite number")))
            })
            .transpose()
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, section: &str, key: &str) -> CliResult<f64> {
        self.f64_opt(section, key)?.ok_or_else(|| missing(section, key))
    }

    pub fn usize_opt(&self, section: &str, key: &str) -> CliResult<Option<usize>> {
        self.get(section, key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    CliError::usage(format!(
                        "config: `{section}.{key}` = `{v}` is not a non-negative integer"
                    ))
                })
            })
            .transpose()
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> CliResult<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(CliError::usage(format!(
                "config: `{section}.{key}` = `{v}` is not a boolean"
            ))),
        }
    }

    /// A path value resolved against the config file's directory.
    pub fn path_opt(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.get(section, key).map(|v| self.base_dir.join(v))
    }

    pub fn require_path(&self, section: &str, key: &str) -> CliResult<PathBuf> {
        self.path_opt(section, key).ok_or_else(|| missing(section, key))
    }

    /// Rejects sections and keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[(&str, &[&str])]) -> CliResult<()> {
        for (section, entries) in &self.sections {
            let Some((_, keys)) = allowed.iter().find(|(s, _)| s == section) else {
                return Err(CliError::usage(format!(
                    "config: unknown section [{section}] for this command"
                )));
            };
            if let Some((k, _)) = entries.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                return Err(CliError::usage(format!(
                    "config: unknown key `{section}.{k}` (allowed: {})",
                    keys.join(", ")
                )));
            }
        }
        Ok(())
    }
}

pub fn missing(section: &str, key: &str) -> CliError {
    CliError::usage(format!("config: missing required key `{section}.{key}`"))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
