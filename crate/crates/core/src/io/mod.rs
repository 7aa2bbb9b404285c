//! File formats: JSON documents, ASCII PLY meshes, binary PGM images and the
//! simulated-session directory layout.
//!
//! JSON is written pretty-printed with a trailing newline; floats use the
//! shortest representation that parses back to the identical `f64`, so every
//! writer/reader pair round-trips exactly. All reader failures are
//! [`Error::Parse`] values naming the file and line.

use std::path::{Component, Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub mod pgm;
pub mod ply;
mod records;
pub mod session;

pub use records::*;

/// A JSON document type with semantic checks beyond its schema.
pub trait Document: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

pub fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.to_path_buf(), message: e.to_string() }
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        Error::Parse {
            path: path.to_path_buf(),
            line: valid.iter().filter(|&&b| b == b'\n').count() + 1,
            message: "file is not valid UTF-8 text".into(),
        }
    })
}

/// Writes `bytes`, creating parent directories as needed.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize infallibly");
    s.push('\n');
    s
}

/// Parses and validates a document; `path` only labels diagnostics.
pub fn parse_json<T: Document>(text: &str, path: &Path) -> Result<T> {
    let value: T = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line().max(1),
        message: e.to_string(),
    })?;
    value.validate().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        // whole-document checks have no better anchor than the first line
        line: 1,
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn read_json<T: Document>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_string(value).as_bytes())
}

/// Resolves a reference stored in a document against the document's
/// directory.
pub fn resolve_ref(document: &Path, reference: &str) -> PathBuf {
    let r = Path::new(reference);
    if r.is_absolute() {
        r.to_path_buf()
    } else {
        document.parent().unwrap_or(Path::new("")).join(r)
    }
}

fn absolute(p: &Path) -> PathBuf {
    let p = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir().unwrap_or_default().join(p) };
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            c => out.push(c),
        }
    }
    out
}

/// Path of `target` relative to the directory holding `document`, with `/`
/// separators, for storing as a reference.
pub fn relative_ref(document: &Path, target: &Path) -> String {
    let base = absolute(document.parent().unwrap_or(Path::new("")));
    let target = absolute(target);
    let b: Vec<_> = base.components().collect();
    let t: Vec<_> = target.components().collect();
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    let mut parts: Vec<String> = vec!["..".into(); b.len() - common];
    parts.extend(t[common..].iter().map(|c| c.as_os_str().to_string_lossy().into_owned()));
    parts.join("/")
}
