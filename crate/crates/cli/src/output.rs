//! Output staging: files are written into a temporary directory inside the
//! output directory and renamed into place only when the command succeeds.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use tempfile::TempDir;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub struct Staging {
    out: PathBuf,
    dir: TempDir,
    format: Format,
    files: Vec<PathBuf>,
}

impl Staging {
    pub fn new(out: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(out).map_err(CliError::io(out))?;
        let dir = tempfile::Builder::new()
            .prefix(".instvol-staging-")
            .tempdir_in(out)
            .map_err(CliError::io(out))?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            format,
            files: Vec::new(),
        })
    }

    /// Creates (if needed) a staged subdirectory and returns its path.
    pub fn subdir(&self, rel: &Path) -> Result<PathBuf> {
        let path = self.dir.path().join(rel);
        fs::create_dir_all(&path).map_err(CliError::io(&path))?;
        Ok(path)
    }

    /// Registers files already written somewhere under the staging dir.
    pub fn register(&mut self, staged: &[PathBuf]) {
        for p in staged {
            let rel = p
                .strip_prefix(self.dir.path())
                .expect("registered file lies in the staging dir");
            self.files.push(rel.to_path_buf());
        }
    }

    fn create(&mut self, rel: PathBuf) -> Result<BufWriter<fs::File>> {
        let path = self.dir.path().join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::io(parent))?;
        }
        let file = fs::File::create(&path).map_err(CliError::io(&path))?;
        self.files.push(rel);
        Ok(BufWriter::new(file))
    }

    /// Writes `rows` as `<stem>.csv` or `<stem>.json` per the output format.
    pub fn write_table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Json => self.write_json(&format!("{stem}.json"), &rows),
            Format::Csv => {
                let rel = PathBuf::from(format!("{stem}.{}", Format::Csv.extension()));
                let shown = self.out.join(&rel);
                let file = self.create(rel)?;
                let csv_err = |source| CliError::Csv {
                    path: shown.clone(),
                    source,
                };
                let mut w = csv::Writer::from_writer(file);
                for r in rows {
                    w.serialize(r).map_err(csv_err)?;
                }
                w.flush().map_err(CliError::io(&shown))?;
                Ok(())
            }
        }
    }

    /// Pretty JSON regardless of the output format.
    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let rel = PathBuf::from(name);
        let shown = self.out.join(&rel);
        let mut file = self.create(rel)?;
        serde_json::to_writer_pretty(&mut file, value).map_err(|source| CliError::Json {
            path: shown.clone(),
            source,
        })?;
        file.write_all(b"\n")
            .and_then(|_| file.flush())
            .map_err(CliError::io(&shown))
    }

    /// Moves every staged file into the output directory and returns the
    /// final paths.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let from = self.dir.path().join(rel);
            let to = self.out.join(rel);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent).map_err(CliError::io(parent))?;
            }
            fs::rename(&from, &to).map_err(CliError::io(&to))?;
            done.push(to);
        }
        Ok(done)
    }
}
