use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every output set. `args` and `working_dir` are enough to
/// repeat the run into another directory with `fsuc rerun`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    /// Effective option values, including defaults.
    pub options: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    /// Seed of any randomised sampling; none of the commands sample today.
    pub seed: Option<u64>,
    pub version: String,
    /// Command-line arguments after the program name, without `--out`.
    pub args: Vec<String>,
    pub working_dir: PathBuf,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], output_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            options: BTreeMap::new(),
            output_dir: output_dir.to_path_buf(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: strip_out(args),
            working_dir: std::env::current_dir().unwrap_or_default(),
        }
    }

    pub fn option(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.options.insert(key.to_string(), value.to_string());
        self
    }

    pub fn write(&self) -> std::io::Result<PathBuf> {
        let path = self.output_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }
}

fn strip_out(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out" || a == "-o" {
            it.next();
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_flag_is_dropped() {
        let args: Vec<String> =
            ["solve", "--system", "s.toml", "--out", "x", "--mode", "fixed", "--out=y"].map(String::from).to_vec();
        assert_eq!(strip_out(&args), ["solve", "--system", "s.toml", "--mode", "fixed"]);
    }
}
