//! Output staging. Files are written into a hidden directory next to the
//! target and moved into place only once the whole run has succeeded.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::TempDir;

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

pub struct Outputs {
    staging: TempDir,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(out_dir: &Path) -> Result<Self, CliError> {
        let parent = match out_dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let staging = tempfile::Builder::new().prefix(".lms-staging-").tempdir_in(&parent)?;
        Ok(Outputs { staging, files: Vec::new() })
    }

    /// Opens a staged file for writing.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        if name.contains('/') || name == MANIFEST || self.files.iter().any(|f| f == name) {
            return Err(CliError::Config(format!("bad or duplicate output name {name}")));
        }
        let f = File::create(self.staging.path().join(name))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    /// Stages a file via a fallible writer callback.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let mut w = self.create(name)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.files
    }

    /// Moves every staged file and then the manifest into `out_dir`. Files
    /// already moved are removed again if a later move fails.
    pub fn commit<M: Serialize>(self, out_dir: &Path, manifest: &M) -> Result<(), CliError> {
        {
            let mut w = BufWriter::new(File::create(self.staging.path().join(MANIFEST))?);
            serde_json::to_writer_pretty(&mut w, manifest)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        let created = !out_dir.exists();
        fs::create_dir_all(out_dir)?;
        let mut moved: Vec<PathBuf> = Vec::new();
        let names = self.files.iter().map(String::as_str).chain([MANIFEST]);
        for name in names {
            let dest = out_dir.join(name);
            if let Err(e) = fs::rename(self.staging.path().join(name), &dest) {
                for m in &moved {
                    let _ = fs::remove_file(m);
                }
                if created {
                    let _ = fs::remove_dir(out_dir);
                }
                return Err(e.into());
            }
            moved.push(dest);
        }
        Ok(())
    }
}
