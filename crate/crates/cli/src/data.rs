use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fcodt::datasets::{csv_header, parse_csv_features, parse_csv_with, parse_libsvm, CsvOptions, TargetColumn};
use fcodt::{Dataset, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Libsvm,
}

/// How to read a dataset file. The path itself lives on each command.
#[derive(Debug, Clone, Args)]
pub struct DataOptions {
    /// File format; inferred from the extension (`.csv` or LIBSVM otherwise).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// CSV target column, by header name or zero-based index. Defaults to
    /// `y` when the header has one, else the last column.
    #[arg(long)]
    pub target: Option<String>,
    /// CSV column of noise-free targets, excluded from the features.
    /// Defaults to `f` when the header has one.
    #[arg(long)]
    pub clean_target: Option<String>,
    /// CSV columns to ignore.
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    /// LIBSVM feature dimension.
    #[arg(long)]
    pub dim: Option<usize>,
}

impl DataOptions {
    pub fn format_of(&self, path: &Path) -> Format {
        self.format.unwrap_or_else(|| {
            match path.extension().and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
                _ => Format::Libsvm,
            }
        })
    }

    fn drops(&self) -> Vec<TargetColumn> {
        self.drop.iter().map(|d| d.parse().unwrap()).collect()
    }

    /// Loads features and targets.
    pub fn load(&self, path: &Path) -> Result<Dataset> {
        let file = || File::open(path).with_context(|| format!("cannot open {}", path.display()));
        let data = match self.format_of(path) {
            Format::Libsvm => parse_libsvm(BufReader::new(file()?), self.dim)?,
            Format::Csv => {
                let header = csv_header(file()?)?.unwrap_or_default();
                let has = |name: &str| header.iter().any(|h| h == name);
                let target: TargetColumn = match &self.target {
                    Some(t) => t.parse().unwrap(),
                    None if has("y") => TargetColumn::Name("y".into()),
                    None if !header.is_empty() => TargetColumn::Index(header.len() - 1),
                    None => last_column(path)?,
                };
                let clean_target = match &self.clean_target {
                    Some(c) => Some(c.parse().unwrap()),
                    None if has("f") && target != TargetColumn::Name("f".into()) && !self.drop.iter().any(|d| d == "f") => {
                        Some(TargetColumn::Name("f".into()))
                    }
                    None => None,
                };
                let opts = CsvOptions {
                    target,
                    clean_target,
                    drop: self.drops(),
                };
                parse_csv_with(file()?, &opts)?
            }
        };
        Ok(data)
    }

    /// Loads a feature matrix for prediction. With a CSV target given, the
    /// targets are returned too.
    pub fn load_features(&self, path: &Path, expected_dim: usize) -> Result<(DenseMatrix, Option<Vec<f64>>)> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        match self.format_of(path) {
            Format::Libsvm => {
                let d = parse_libsvm(BufReader::new(file), Some(self.dim.unwrap_or(expected_dim)))?;
                Ok((d.features, Some(d.targets)))
            }
            Format::Csv if self.target.is_some() => {
                let d = self.load(path)?;
                Ok((d.features, Some(d.targets)))
            }
            Format::Csv => Ok((parse_csv_features(file, &self.drops())?, None)),
        }
    }
}

/// Index of the last column of a headerless CSV.
fn last_column(path: &Path) -> Result<TargetColumn> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    match text.lines().find(|l| !l.trim().is_empty()) {
        Some(line) => Ok(TargetColumn::Index(line.split(',').count() - 1)),
        None => Ok(TargetColumn::Index(0)),
    }
}

/// Writes `path` through a temporary file in the same directory, renamed
/// into place only after `body` succeeds.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w)?;
    let tmp = w.into_inner().map_err(|e| e.into_error())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

pub fn ensure_nonempty(data: &Dataset, path: &Path) -> Result<()> {
    if data.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(())
}
