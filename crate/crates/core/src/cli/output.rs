//! Output directory handling and the artifact manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::hex;
use super::CliError;

pub const MANIFEST: &str = "manifest.json";

pub struct Output {
    root: PathBuf,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

impl Output {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numerical(format!("{rel}: {e}")))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    pub fn write_csv(&self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Config(format!("{rel}: {e}"));
        wtr.write_record(header).map_err(fail)?;
        for r in rows {
            wtr.write_record(r).map_err(fail)?;
        }
        let bytes = wtr.into_inner().map_err(|e| CliError::Config(format!("{rel}: {e}")))?;
        self.write(rel, &bytes)
    }
}

#[derive(Debug, Serialize)]
struct Artifact {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: String,
    config: &'a C,
    inputs: Vec<Artifact>,
    artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String), std::io::Error> {
    let bytes = fs::read(path)?;
    Ok((bytes.len() as u64, hex(&Sha256::digest(&bytes))))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn rel_name(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Lists every file under the output root (except the manifest itself)
/// with its size and sha256, in path order.
pub fn write_manifest<C: Serialize>(out: &Output, command: &str, config: &C, config_sha256: String, inputs: &[(&str, &Path)]) -> Result<(), CliError> {
    let root = out.root();
    let mut files = Vec::new();
    walk(root, &mut files).map_err(|e| io_err(root, e))?;
    let mut artifacts = Vec::new();
    for f in files {
        let path = rel_name(&f, root);
        if path == MANIFEST {
            continue;
        }
        let (bytes, sha256) = sha256_file(&f).map_err(|e| io_err(&f, e))?;
        artifacts.push(Artifact { path, bytes, sha256 });
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let mut input_list = Vec::new();
    for (role, path) in inputs {
        let (bytes, sha256) = sha256_file(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        input_list.push(Artifact { path: role.to_string(), bytes, sha256 });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_sha256,
        config,
        inputs: input_list,
        artifacts,
    };
    out.write_json(MANIFEST, &manifest)
}
