use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mixfbm::fraccalc::GridPath;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Output directory that records a checksum for every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root, artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes through a temporary sibling and a rename, so readers never
    /// observe a partial file.
    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.partial"));
        fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| CliError::io(&target, e))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.write_atomic(name, bytes)?;
        self.artifacts.push(Artifact { file: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, config_sha256: String, seed: u64) -> Result<Manifest> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256,
            seed,
            artifacts: self.artifacts.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.write_atomic(MANIFEST_FILE, text.as_bytes())?;
        Ok(manifest)
    }
}

/// Comma-separated text with a fixed header; floats use the shortest
/// round-trip representation so reruns are byte-identical.
#[derive(Debug)]
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let cols: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        Self { text: format!("{}\n", cols.join(",")), width: cols.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.width);
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            match c {
                Cell::Int(v) => write!(self.text, "{v}"),
                Cell::Float(v) => write!(self.text, "{v:?}"),
                Cell::Empty => Ok(()),
                Cell::Bool(b) => write!(self.text, "{b}"),
            }
            .expect("writing to a String");
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

/// Column names `prefix0, prefix1, ...`.
pub fn columns(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |d| format!("{prefix}{d}"))
}

/// Appends `node, t, values...` rows for one path, prefixed by `lead`.
pub fn push_path_rows(csv: &mut Csv, lead: &[Cell], paths: &[&GridPath]) {
    let grid = *paths[0].grid();
    for i in 0..grid.n_nodes() {
        let mut cells = lead.to_vec();
        cells.push(i.into());
        cells.push(grid.node(i).into());
        for p in paths {
            cells.extend(p.at(i).iter().map(|v| Cell::Float(*v)));
        }
        csv.row(&cells);
    }
}
