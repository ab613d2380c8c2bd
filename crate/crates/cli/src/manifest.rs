//! Output collection and the run manifest written after every command.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex_digest;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical config text.
    pub config_hash: Option<String>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub wall_clock_seconds: f64,
    pub finished_unix_seconds: u64,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex_digest(Sha256::digest(&bytes).as_slice()))
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

/// Collects the files a command writes into its output directory.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    written: Vec<FileDigest>,
    inputs: Vec<FileDigest>,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: hex_digest(Sha256::digest(bytes).as_slice()),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Records an input file by digest.
    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        let path = path.display().to_string();
        if !self.inputs.iter().any(|d| d.path == path) {
            self.inputs.push(FileDigest { path, sha256 });
        }
        Ok(())
    }

    /// Writes the manifest last.
    pub fn finish(self, command: &str, config_hash: Option<String>, elapsed: Duration) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            tool: "qmem".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            inputs: self.inputs,
            outputs: self.written,
            wall_clock_seconds: elapsed.as_secs_f64(),
            finished_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(manifest)
    }
}

/// One discrepancy found by [`verify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub path: String,
    pub reason: String,
}

/// Checks the manifest in `dir` against the files on disk, and the config
/// hash against `config_hash` when given.
pub fn verify(dir: &Path, command: &str, config_hash: Option<&str>) -> CliResult<Vec<Mismatch>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if manifest.command != command {
        return Err(CliError::usage(format!(
            "manifest records command `{}`, not `{command}`",
            manifest.command
        )));
    }
    let mut out = Vec::new();
    if let (Some(expected), Some(actual)) = (manifest.config_hash.as_deref(), config_hash) {
        if expected != actual {
            out.push(Mismatch {
                path: "<config>".into(),
                reason: "canonical config differs".into(),
            });
        }
    }
    let check = |d: &FileDigest, p: &Path, out: &mut Vec<Mismatch>| match sha256_file(p) {
        Ok(h) if h == d.sha256 => {}
        Ok(_) => out.push(Mismatch {
            path: d.path.clone(),
            reason: "digest differs".into(),
        }),
        Err(e) => out.push(Mismatch {
            path: d.path.clone(),
            reason: e.message,
        }),
    };
    for d in &manifest.inputs {
        check(d, Path::new(&d.path), &mut out);
    }
    for d in &manifest.outputs {
        check(d, &dir.join(&d.path), &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        fs::write(&input, "a,b\n1,2\n").unwrap();
        let out_dir = dir.path().join("out");
        let mut out = Outputs::new(&out_dir).unwrap();
        out.input(&input).unwrap();
        out.write("result.txt", b"42\n").unwrap();
        out.finish("fit", Some("abc".into()), Duration::from_millis(5)).unwrap();
        assert!(verify(&out_dir, "fit", Some("abc")).unwrap().is_empty());
        assert_eq!(verify(&out_dir, "fit", Some("abd")).unwrap().len(), 1);
        assert!(verify(&out_dir, "simulate", None).is_err());

        fs::write(&input, "a,b\n1,3\n").unwrap();
        let m = verify(&out_dir, "fit", None).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].path, input.display().to_string());

        fs::write(out_dir.join("result.txt"), b"43\n").unwrap();
        assert_eq!(verify(&out_dir, "fit", None).unwrap().len(), 2);
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_atomic(&p, b"{}").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"{}");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
