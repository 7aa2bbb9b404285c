//! ASCII PLY subset: one `vertex` element with `x y z` float/double
//! properties, one `face` element with a single `vertex_indices` list of
//! exactly three indices. Anything else is rejected.
//!
//! The mesh frame travels in a `comment frame <name>` header line; without
//! one, readers fall back to the file stem.

use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_bytes};
use crate::error::{Error, Result};
use crate::geom::{FrameId, Vec3};
use crate::registration::TriangleMesh;

const FLOAT_TYPES: [&str; 4] = ["float", "double", "float32", "float64"];
const COUNT_TYPES: [&str; 4] = ["uchar", "uint8", "int", "uint"];
const INDEX_TYPES: [&str; 6] = ["int", "uint", "int32", "uint32", "short", "ushort"];

/// Coordinates are written with the shortest decimal that reads back to the
/// identical `f64`.
pub fn ply_to_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment frame {}", mesh.frame());
    let _ = writeln!(s, "element vertex {}", mesh.vertices().len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    let _ = writeln!(s, "element face {}", mesh.triangles().len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    s
}

pub fn write_ply(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    write_bytes(path, ply_to_string(mesh).as_bytes())
}

pub fn read_ply(path: &Path) -> Result<TriangleMesh> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_ply(&read_text(path)?, path, &stem)
}

/// Parses PLY text; `path` labels diagnostics and `default_frame` applies
/// when the header carries no frame comment.
pub fn parse_ply(text: &str, path: &Path, default_frame: &str) -> Result<TriangleMesh> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| err(text.lines().count() + 1, format!("unexpected end of file, expected {what}")))
    };

    let (n, l) = next("`ply`")?;
    if l != "ply" {
        return Err(err(n, "missing `ply` magic".into()));
    }
    let mut frame_name = None;
    let mut vertex_count = None;
    let mut face_count = None;
    let mut vertex_props = Vec::new();
    let mut face_prop = false;
    let mut saw_format = false;
    loop {
        let (n, l) = next("header line")?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", "1.0"] => saw_format = true,
            ["format", ..] => return Err(err(n, format!("unsupported format `{l}`; only ascii 1.0 is read"))),
            ["comment", "frame", name] => frame_name = Some(name.to_string()),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", c] if vertex_count.is_none() && face_count.is_none() => {
                vertex_count = Some(c.parse::<usize>().map_err(|_| err(n, format!("bad vertex count `{c}`")))?)
            }
            ["element", "face", c] if vertex_count.is_some() && face_count.is_none() => {
                face_count = Some(c.parse::<usize>().map_err(|_| err(n, format!("bad face count `{c}`")))?)
            }
            ["element", ..] => return Err(err(n, format!("unsupported element `{l}`; expected vertex then face"))),
            ["property", ty, name] if face_count.is_none() && vertex_count.is_some() => {
                let expected = ["x", "y", "z"].get(vertex_props.len());
                if !FLOAT_TYPES.contains(ty) || expected != Some(name) {
                    return Err(err(n, format!("unsupported vertex property `{l}`; only x, y, z floats are allowed")));
                }
                vertex_props.push(*name);
            }
            ["property", "list", count, index, name]
                if face_count.is_some() && !face_prop && (*name == "vertex_indices" || *name == "vertex_index") =>
            {
                if !COUNT_TYPES.contains(count) || !INDEX_TYPES.contains(index) {
                    return Err(err(n, format!("unsupported face list types `{l}`")));
                }
                face_prop = true;
            }
            ["property", ..] => return Err(err(n, format!("unsupported property `{l}`"))),
            _ => return Err(err(n, format!("unrecognized header line `{l}`"))),
        }
    }
    if !saw_format {
        return Err(err(1, "missing `format ascii 1.0` line".into()));
    }
    let (Some(nv), Some(nf)) = (vertex_count, face_count) else {
        return Err(err(1, "header must declare vertex and face elements".into()));
    };
    if vertex_props.len() != 3 || !face_prop {
        return Err(err(1, "header must declare x, y, z and a vertex_indices list".into()));
    }

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = next("vertex line")?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(n, format!("bad coordinate `{t}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(err(n, format!("expected 3 coordinates, found {}", vals.len())));
        }
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(err(n, "non-finite coordinate".into()));
        }
        vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = next("face line")?;
        let vals: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| err(n, format!("bad index `{t}`"))))
            .collect::<Result<_>>()?;
        match vals.as_slice() {
            [3, a, b, c] => {
                if let Some(bad) = [a, b, c].into_iter().find(|&&i| i >= nv) {
                    return Err(err(n, format!("vertex index {bad} out of range (mesh has {nv} vertices)")));
                }
                triangles.push([*a, *b, *c]);
            }
            [3, ..] => return Err(err(n, "face list length does not match its count".into())),
            [k, ..] => return Err(err(n, format!("only triangles are supported, found a {k}-gon"))),
            [] => return Err(err(n, "empty face line".into())),
        }
    }
    if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(err(n, "unexpected data after the declared elements".into()));
    }
    let frame = FrameId::new(frame_name.as_deref().unwrap_or(default_frame)).map_err(|e| err(1, e.to_string()))?;
    let body_start = text.lines().position(|l| l.trim() == "end_header").unwrap_or(0) + 2;
    TriangleMesh::new(vertices, triangles, frame).map_err(|e| {
        let line = match &e {
            Error::InvalidMesh(m) => m
                .strip_prefix("triangle ")
                .and_then(|r| r.split_whitespace().next())
                .and_then(|i| i.parse::<usize>().ok())
                .map_or(1, |i| body_start + nv + i),
            _ => 1,
        };
        err(line, e.to_string())
    })
}
