//! ASCII Wavefront OBJ reading and writing (positions and faces only).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{invalid, RegError, Result};
use crate::geometry::Vec3;
use crate::mesh::TriMesh;
use crate::scalar::Real;

pub fn load_obj<T: Real>(path: impl AsRef<Path>) -> Result<TriMesh<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| RegError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_obj(BufReader::new(file)).map_err(|e| match e {
        RegError::Io { source, .. } => RegError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses OBJ text. Polygons are fan-triangulated around their first corner;
/// normals, texture coordinates and grouping records are ignored.
pub fn read_obj<T: Real>(reader: impl Read) -> Result<TriMesh<T>> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut dropped = 0usize;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| RegError::Io {
            path: Default::default(),
            source,
        })?;
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [T::zero(); 3];
                for slot in &mut c {
                    let s = tok.next().ok_or_else(|| RegError::Format {
                        line: lineno,
                        message: "vertex needs 3 coordinates".into(),
                    })?;
                    let v: f64 = s.parse().map_err(|_| RegError::Format {
                        line: lineno,
                        message: format!("bad coordinate {s:?}"),
                    })?;
                    *slot = T::from_f64(v).ok_or_else(|| RegError::Format {
                        line: lineno,
                        message: format!("coordinate {s:?} not representable"),
                    })?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut corners = Vec::with_capacity(4);
                for s in tok {
                    let head = s.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| RegError::Format {
                        line: lineno,
                        message: format!("bad face index {s:?}"),
                    })?;
                    let n = vertices.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(RegError::Format {
                            line: lineno,
                            message: format!(
                                "face index {i} out of range ({n} vertices defined so far)"
                            ),
                        });
                    }
                    corners.push(resolved as usize);
                }
                if corners.len() < 3 {
                    return Err(RegError::Format {
                        line: lineno,
                        message: format!("face has {} corners, need at least 3", corners.len()),
                    });
                }
                for k in 1..corners.len() - 1 {
                    let t = [corners[0], corners[k], corners[k + 1]];
                    if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                        dropped += 1;
                    } else {
                        triangles.push(t);
                    }
                }
            }
            _ => {}
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} faces with repeated vertex indices");
    }
    if vertices.is_empty() || triangles.is_empty() {
        return Err(invalid(format!(
            "empty mesh: {} vertices, {} triangles",
            vertices.len(),
            triangles.len()
        )));
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    for w in mesh.quality_warnings() {
        log::warn!("{w}");
    }
    Ok(mesh)
}

pub fn save_obj<T: Real>(mesh: &TriMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| RegError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_obj(mesh, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Writes `v` records with 17 significant digits and 1-based `f` records.
pub fn write_obj<T: Real>(mesh: &TriMesh<T>, w: &mut impl Write) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}
