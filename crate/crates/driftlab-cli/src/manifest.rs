//! Run manifests: every emitted CSV is accompanied by a manifest capturing
//! the exact resolved configuration, seed, tool version, and timing, so a
//! result file can always be traced back to the inputs that produced it.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::config::ResolvedConfig;

#[derive(Debug)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub resolved_seed: u64,
    pub workers: usize,
    pub outputs: Vec<String>,
    pub duration: Duration,
    pub config: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config_path: &Path,
        out_dir: &Path,
        resolved_seed: u64,
        workers: usize,
        config: &ResolvedConfig,
    ) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.to_path_buf(),
            out_dir: out_dir.to_path_buf(),
            resolved_seed,
            workers,
            outputs: Vec::new(),
            duration: Duration::ZERO,
            config: config.canonical_dump(),
        }
    }

    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("tool = driftlab {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("command = {}\n", self.command));
        out.push_str(&format!("config_path = {}\n", self.config_path.display()));
        out.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        out.push_str(&format!("resolved_seed = {}\n", self.resolved_seed));
        out.push_str(&format!("workers = {}\n", self.workers));
        out.push_str(&format!(
            "wall_clock_seconds = {:.3}\n",
            self.duration.as_secs_f64()
        ));
        for o in &self.outputs {
            out.push_str(&format!("output = {o}\n"));
        }
        out.push_str("\n# resolved configuration\n");
        out.push_str(&self.config);
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}
