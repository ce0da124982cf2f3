//! Run manifest and atomic file output.
//!
//! Every artifact goes through [`OutputDir`], which writes to a temp name in
//! the same directory and renames into place, and records the file so the
//! manifest can list everything the run produced. The manifest itself is a
//! flat key-value text file written last, by the same atomic route.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

use crate::config::Config;

/// Output directory handle: atomic writes plus the file ledger.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<OutputDir> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    /// Write `bytes` to `rel` atomically (temp file in the same directory,
    /// then rename) and record it in the ledger.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        atomic_write(&path, bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    /// Like [`OutputDir::write`] but the content is produced by a writer
    /// callback, for artifacts that stream (field dumps).
    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)
            .with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Flat key-value manifest accumulated over a run and written at the end.
pub struct Manifest {
    lines: Vec<(String, String)>,
    started: Instant,
}

impl Manifest {
    pub fn begin(cfg: &Config) -> Manifest {
        let mut m = Manifest { lines: Vec::new(), started: Instant::now() };
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("mode", cfg.mode.name());
        m.push("started_unix", unix_now());
        for (k, v) in cfg.entries() {
            m.push(&format!("config.{k}"), v);
        }
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    /// Record a scalar result.
    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.push(&format!("result.{key}"), value);
    }

    /// Write the manifest, appending the output ledger and timing. Called
    /// once, after every other artifact is on disk.
    pub fn finish(mut self, out: &mut OutputDir) -> Result<()> {
        for (i, f) in out.files().to_vec().iter().enumerate() {
            self.push(&format!("file.{i}"), f);
        }
        self.push("finished_unix", unix_now());
        self.push("elapsed_seconds", format!("{:.3}", self.started.elapsed().as_secs_f64()));
        let mut text = String::new();
        for (k, v) in &self.lines {
            text.push_str(k);
            text.push_str(" = ");
            text.push_str(v);
            text.push('\n');
        }
        out.write("manifest.txt", text.as_bytes())
    }

    /// Best-effort failure manifest so an aborted run still leaves a
    /// diagnostic next to its partial outputs.
    pub fn abort(mut self, out: &mut OutputDir, err: &anyhow::Error) {
        self.push("error", format!("{err:#}"));
        let _ = self.finish(out);
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
