//! Plain-text mesh files.
//!
//! ```text
//! SPACEFORM <kind> <kappa> <n>
//! BASE <ambient coordinates>
//! PROFILE <profile> <level>        (optional)
//! V <count>
//! <ambient coordinates>            (one vertex per line)
//! T <count> | TET <count>
//! <0-based vertex indices>         (one element per line)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Coordinates are
//! written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use super::{RadialData, RadialProfile, SurfaceMesh, VolumeMesh};
use crate::error::{Error, Result};
use crate::spaceform::{AmbientPoint, ModelKind, SpaceForm};

#[derive(Debug, Clone)]
pub enum MeshFile {
    Surface(SurfaceMesh),
    Volume(VolumeMesh),
}

impl From<SurfaceMesh> for MeshFile {
    fn from(m: SurfaceMesh) -> Self {
        MeshFile::Surface(m)
    }
}

impl From<VolumeMesh> for MeshFile {
    fn from(m: VolumeMesh) -> Self {
        MeshFile::Volume(m)
    }
}

fn push_coords(out: &mut String, coords: &[f64]) {
    let mut first = true;
    for c in coords {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{c:.16e}");
    }
    out.push('\n');
}

pub fn write_to_string(mesh: &MeshFile) -> String {
    let mut out = String::new();
    match mesh {
        MeshFile::Surface(m) => {
            let sf = m.space_form();
            let _ = writeln!(out, "SPACEFORM {} {} {}", sf.kind(), sf.kappa(), sf.dim());
            out.push_str("BASE ");
            push_coords(&mut out, sf.base_point().coords().as_slice());
            if let Some(r) = m.radial() {
                let _ = writeln!(out, "PROFILE {} {}", r.profile, r.level);
            }
            let _ = writeln!(out, "V {}", m.n_vertices());
            for v in m.vertices() {
                push_coords(&mut out, v.coords().as_slice());
            }
            let _ = writeln!(out, "T {}", m.triangles().len());
            for t in m.triangles() {
                let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
            }
        }
        MeshFile::Volume(m) => {
            out.push_str("SPACEFORM euclidean 0 3\nBASE 0 0 0\n");
            if let (Some(p), Some(level)) = (m.boundary().profile(), m.level()) {
                let _ = writeln!(out, "PROFILE {p} {level}");
            }
            let _ = writeln!(out, "V {}", m.vertices().len());
            for v in m.vertices() {
                push_coords(&mut out, v.as_slice());
            }
            let _ = writeln!(out, "TET {}", m.tets().len());
            for t in m.tets() {
                let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
            }
        }
    }
    out
}

pub fn save(path: impl AsRef<Path>, mesh: &MeshFile) -> Result<()> {
    fs::write(path, write_to_string(mesh))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<MeshFile> {
    parse(&fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_record(&mut self) -> Option<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Some(l.split_whitespace().collect());
        }
        None
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn expect(&mut self, what: &str) -> Result<Vec<&'a str>> {
        self.next_record()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn floats(&self, toks: &[&str]) -> Result<Vec<f64>> {
        toks.iter()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("`{t}` is not a number"))))
            .collect()
    }

    fn count(&self, toks: &[&str], tag: &str) -> Result<usize> {
        match toks {
            [t, n] if *t == tag => n.parse().map_err(|_| self.err(format!("bad {tag} count `{n}`"))),
            _ => Err(self.err(format!("expected `{tag} <count>`"))),
        }
    }
}

pub fn parse(text: &str) -> Result<MeshFile> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };

    let header = lines.expect("SPACEFORM header")?;
    let sf = match header.as_slice() {
        ["SPACEFORM", kind, kappa, n] => {
            let kind: ModelKind = kind
                .parse()
                .map_err(|_| lines.err(format!("unknown model tag `{kind}`")))?;
            let kappa: f64 = kappa.parse().map_err(|_| lines.err("bad kappa"))?;
            let n: usize = n.parse().map_err(|_| lines.err("bad dimension"))?;
            SpaceForm::new(kind, kappa, n).map_err(|e| lines.err(e.to_string()))?
        }
        _ => return Err(lines.err("expected `SPACEFORM <kind> <kappa> <n>`")),
    };

    let base = lines.expect("BASE line")?;
    if base.first() != Some(&"BASE") {
        return Err(lines.err("expected `BASE <coords>`"));
    }
    let base = AmbientPoint::from_slice(&lines.floats(&base[1..])?);
    let sf = sf
        .with_base_point(base)
        .map_err(|e| lines.err(format!("base point: {e}")))?;

    let mut rec = lines.expect("V line")?;
    let mut profile: Option<(RadialProfile, usize)> = None;
    if rec.first() == Some(&"PROFILE") {
        profile = match rec.as_slice() {
            ["PROFILE", spec, level] => Some((
                spec.parse().map_err(|e: Error| lines.err(e.to_string()))?,
                level.parse().map_err(|_| lines.err("bad profile level"))?,
            )),
            _ => return Err(lines.err("expected `PROFILE <profile> <level>`")),
        };
        rec = lines.expect("V line")?;
    }

    let nv = lines.count(&rec, "V")?;
    let mut vertices = Vec::with_capacity(nv);
    let mut vertex_lines = Vec::with_capacity(nv);
    for i in 0..nv {
        let toks = lines.expect("vertex")?;
        let c = lines.floats(&toks)?;
        if c.len() != sf.ambient_dim() {
            return Err(lines.err(format!(
                "vertex {i} has {} coordinates, expected {}",
                c.len(),
                sf.ambient_dim()
            )));
        }
        let p = AmbientPoint::from_slice(&c);
        sf.check_point(&p)
            .map_err(|e| lines.err(format!("vertex {i} is not on the model: {e}")))?;
        vertices.push(p);
        vertex_lines.push(lines.line);
    }

    let rec = lines.next_record();
    let rec = match rec {
        Some(r) => r,
        None => return Err(lines.err("not a closed surface: missing element list")),
    };
    match rec.first().copied() {
        Some("T") => {
            let nt = lines.count(&rec, "T")?;
            if nt == 0 {
                return Err(lines.err("not a closed surface: empty triangle list"));
            }
            let mut tris = Vec::with_capacity(nt);
            for _ in 0..nt {
                let toks = lines.expect("triangle")?;
                tris.push(indices::<3>(&lines, &toks, nv)?);
            }
            let radial = match profile {
                Some((profile, level)) => {
                    let mut directions = Vec::with_capacity(nv);
                    for (i, v) in vertices.iter().enumerate() {
                        let (dir, rho) = sf.log_map(v).map_err(|e| lines.err(e.to_string()))?;
                        let w = sf.base_frame_coords(&dir);
                        let w = [w[0], w[1], w[2]];
                        let expected = sf
                            .radial_chart(&dir, profile.eval(&w))
                            .map_err(|e| lines.err(e.to_string()))?;
                        let tol = 1e-9 * (1.0 + rho);
                        if (expected.coords() - v.coords()).norm() > tol {
                            return Err(Error::Parse {
                                line: vertex_lines[i],
                                message: format!("vertex {i} does not lie on the declared profile {profile}"),
                            });
                        }
                        directions.push(w);
                    }
                    Some(RadialData {
                        profile,
                        directions,
                        level,
                    })
                }
                None => None,
            };
            let mesh = SurfaceMesh::new(sf, vertices, tris, radial).map_err(|e| lines.err(e.to_string()))?;
            Ok(MeshFile::Surface(mesh))
        }
        Some("TET") => {
            if sf.kind() != ModelKind::Euclidean {
                return Err(lines.err("tetrahedral meshes are supported in Euclidean space only"));
            }
            let nt = lines.count(&rec, "TET")?;
            let mut tets = Vec::with_capacity(nt);
            for _ in 0..nt {
                let toks = lines.expect("tetrahedron")?;
                tets.push(indices::<4>(&lines, &toks, nv)?);
            }
            let pts = vertices
                .iter()
                .map(|v| Vector3::new(v.coords()[0], v.coords()[1], v.coords()[2]))
                .collect();
            let (profile, level) = match profile {
                Some((p, l)) => (Some(p), Some(l)),
                None => (None, None),
            };
            let mesh = VolumeMesh::new(pts, tets, profile, level).map_err(|e| lines.err(e.to_string()))?;
            Ok(MeshFile::Volume(mesh))
        }
        _ => Err(lines.err("expected `T <count>` or `TET <count>`")),
    }
}

fn indices<const N: usize>(lines: &Lines<'_>, toks: &[&str], nv: usize) -> Result<[usize; N]> {
    if toks.len() != N {
        return Err(lines.err(format!("expected {N} vertex indices")));
    }
    let mut out = [0usize; N];
    for (o, t) in out.iter_mut().zip(toks) {
        *o = t.parse().map_err(|_| lines.err(format!("`{t}` is not an index")))?;
        if *o >= nv {
            return Err(lines.err(format!("index {o} out of range (mesh has {nv} vertices)")));
        }
    }
    Ok(out)
}
