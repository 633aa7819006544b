//! Wavefront OBJ mesh I/O and ASCII PLY point-set I/O.
//!
//! OBJ coverage is deliberately minimal: `v x y z` and triangular
//! `f i j k` records with 1-based indices. Floats are written with Rust's
//! shortest round-trip formatting so write/read cycles are lossless.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::TriMesh;
use super::vec3::Vec3;
use crate::{Error, Result};

pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    let bad = |detail: String| Error::Format {
        path: path.to_path_buf(),
        expected: "OBJ",
        detail,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coord = |name| {
                    parts
                        .next()
                        .ok_or_else(|| bad(format!("line {}: missing {name}", lineno + 1)))?
                        .parse::<f64>()
                        .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))
                };
                vertices.push(Vec3::new(coord("x")?, coord("y")?, coord("z")?));
            }
            Some("f") => {
                let mut idx = |_| -> Result<usize> {
                    let token = parts
                        .next()
                        .ok_or_else(|| bad(format!("line {}: short face", lineno + 1)))?;
                    // Tolerate v/vt/vn references; only the vertex index is used.
                    let first = token.split('/').next().unwrap();
                    let i: i64 = first
                        .parse()
                        .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
                    if i < 1 {
                        return Err(bad(format!("line {}: non-positive index", lineno + 1)));
                    }
                    Ok(i as usize - 1)
                };
                let face = [idx(0)?, idx(1)?, idx(2)?];
                if parts.next().is_some() {
                    return Err(bad(format!("line {}: only triangles supported", lineno + 1)));
                }
                faces.push(face);
            }
            _ => {} // comments, normals, etc.
        }
    }
    TriMesh::new(vertices, faces)
}

pub fn write_ply_points(points: &[Vec3], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", points.len()).unwrap();
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_ply_points(path: &Path) -> Result<Vec<Vec3>> {
    let text = std::fs::read_to_string(path)?;
    let bad = |detail: String| Error::Format {
        path: path.to_path_buf(),
        expected: "ASCII PLY",
        detail,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing ply magic".into()));
    }
    let mut vertex_count = None;
    let mut xyz_columns: Vec<usize> = Vec::new();
    let mut property_index = 0usize;
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "end_header" {
            break;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("format") => {
                if parts.next() != Some("ascii") {
                    return Err(bad("only ascii format supported".into()));
                }
            }
            Some("element") => {
                let kind = parts.next().unwrap_or("");
                let count: usize = parts
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| bad("bad element count".into()))?;
                if kind == "vertex" {
                    vertex_count = Some(count);
                    property_index = 0;
                } else if vertex_count.is_some() && xyz_columns.len() < 3 {
                    return Err(bad("vertex element lacks x/y/z properties".into()));
                }
            }
            Some("property") if vertex_count.is_some() && xyz_columns.len() < 3 => {
                let _ty = parts.next();
                if let Some(name) = parts.next() {
                    if name == "x" || name == "y" || name == "z" {
                        xyz_columns.push(property_index);
                    }
                }
                property_index += 1;
            }
            _ => {}
        }
    }
    let count = vertex_count.ok_or_else(|| bad("no vertex element".into()))?;
    if xyz_columns.len() != 3 {
        return Err(bad("vertex element lacks x/y/z properties".into()));
    }
    let mut points = Vec::with_capacity(count);
    for line in lines.take(count) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let get = |c: usize| -> Result<f64> {
            cols.get(c)
                .ok_or_else(|| bad("short vertex row".into()))?
                .parse::<f64>()
                .map_err(|e| bad(e.to_string()))
        };
        points.push(Vec3::new(
            get(xyz_columns[0])?,
            get(xyz_columns[1])?,
            get(xyz_columns[2])?,
        ));
    }
    if points.len() != count {
        return Err(bad(format!("expected {count} vertices, got {}", points.len())));
    }
    Ok(points)
}
