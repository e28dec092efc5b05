use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::commands::{CliError, CliResult};

/// What produced a set of outputs; identical manifests give identical files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub system: String,
    pub config_digest: String,
    pub seed: u64,
    pub rng: String,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, system: &str, digest: String, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            system: system.into(),
            config_digest: digest,
            seed,
            rng: "ChaCha8 (rand_chacha 0.3), one stream per run".into(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

pub struct OutDir {
    pub dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
        Ok(OutDir { dir: dir.to_path_buf() })
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| CliError::runtime(e.to_string()))?;
        f(&mut tmp)?;
        tmp.persist(&path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> CliResult<PathBuf> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::runtime(e.to_string()))?;
            writeln!(w).map_err(|e| CliError::runtime(e.to_string()))
        })
    }

    pub fn finish(&self, mut manifest: RunManifest, outputs: Vec<PathBuf>) -> CliResult<()> {
        manifest.outputs = outputs;
        let name = format!("{}_manifest.json", manifest.command);
        self.write_json(&name, &manifest)?;
        Ok(())
    }
}
