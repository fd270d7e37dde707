//! Output directory handling and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Record of one run, written last as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, A: Serialize> {
    pub subcommand: &'a str,
    pub args: &'a A,
    pub inputs: Vec<InputRecord>,
    pub version: &'a str,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

/// Reads input files (hashing them for the manifest) and writes outputs.
pub struct Run {
    dir: PathBuf,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    pub seed: Option<u64>,
}

impl Run {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), inputs: Vec::new(), outputs: Vec::new(), seed: None })
    }

    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputRecord { path: path.display().to_string(), sha256: hex(&Sha256::digest(&bytes)) });
        String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{} is not UTF-8", path.display())))
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<V: Serialize + ?Sized>(&mut self, name: &str, value: &V) -> Result<(), CliError> {
        let text = dmp_core::io::to_json_string(value)?;
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes a CSV from a header and rows of already formatted fields.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn finish<A: Serialize>(self, subcommand: &str, args: &A, exit_code: i32) -> Result<(), CliError> {
        let manifest = RunManifest {
            subcommand,
            args,
            inputs: self.inputs,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            outputs: self.outputs,
            exit_code,
        };
        let text = dmp_core::io::to_json_string(&manifest)?;
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", path.display())))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Full-precision float field for CSV output.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
