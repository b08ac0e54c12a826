//! Run manifests: what was run, on which inputs, and where the outputs went.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, exactly as given.
    pub args: Vec<String>,
    /// `sha256:<hex>` of the configuration file bytes, or of the argument
    /// list for commands configured by flags alone.
    pub config_digest: String,
    /// Configuration file contents, so a replay does not depend on the file.
    pub config: Option<String>,
    pub master_seed: Option<u64>,
    pub library_version: String,
    pub wall_clock_ms: f64,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn digest_label(bytes: &[u8]) -> String {
    format!("sha256:{}", sha256_hex(bytes))
}

pub fn input_file(path: &Path) -> Result<InputFile, CliError> {
    let bytes = read_input(path)?;
    Ok(InputFile { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

/// Where the manifest of a run goes: `manifest.json` inside an output
/// directory, or `<stem>.manifest.json` next to an output file.
pub fn manifest_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join("manifest.json")
    } else {
        let stem = out.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        out.with_file_name(format!("{stem}.manifest.json"))
    }
}

pub fn write(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn read(path: &Path) -> Result<RunManifest, CliError> {
    let bytes = read_input(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::usage(format!("{}: invalid manifest: {e}", path.display())))
}

/// Check that every recorded input still has the recorded contents.
pub fn verify_inputs(m: &RunManifest) -> Result<(), CliError> {
    for input in &m.inputs {
        let now = sha256_hex(&read_input(Path::new(&input.path))?);
        if now != input.sha256 {
            return Err(CliError::usage(format!("input {} changed since the recorded run", input.path)));
        }
    }
    Ok(())
}
