//! Output directory handling and the per-directory run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    toolkit_version: &'a str,
    seed: Option<u64>,
    config: &'a Value,
    inputs: Vec<String>,
    outputs: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock: Option<WallClock>,
}

#[derive(Serialize)]
struct WallClock {
    started_unix_secs: u64,
    elapsed_secs: f64,
}

/// Every file of a command goes through here, from the main thread.
pub struct OutputDir {
    dir: PathBuf,
    timestamps: bool,
    written: Vec<String>,
    started: Instant,
    started_unix: u64,
}

impl OutputDir {
    pub fn create(dir: &Path, timestamps: bool) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            timestamps,
            written: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }

    /// Human-readable start time for plot footers, when enabled.
    pub fn stamp(&self) -> Option<String> {
        self.timestamps.then(|| format!("generated at unix time {}", self.started_unix))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        log::info!("wrote {}", path.display());
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, command: &str, seed: Option<u64>, config: &Value, inputs: &[PathBuf]) -> anyhow::Result<()> {
        let manifest = RunManifest {
            command,
            toolkit_version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: &self.written,
            wall_clock: self.timestamps.then(|| WallClock {
                started_unix_secs: self.started_unix,
                elapsed_secs: self.started.elapsed().as_secs_f64(),
            }),
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
