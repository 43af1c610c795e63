use std::collections::HashMap;

use nalgebra::Vector3;

use super::{tet_volume, RadialData, RadialProfile, SurfaceMesh, VolumeMesh};
use crate::error::{Error, Result};
use crate::spaceform::SpaceForm;

/// Unit directions and outward triangles of the icosahedron subdivided
/// `level` times, midpoints pushed back to the unit sphere. Vertices of
/// coarser levels keep their indices.
pub fn icosphere(level: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut dirs: Vec<[f64; 3]> = raw.iter().map(normalize).collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        (dirs, tris) = subdivide(&dirs, &tris);
    }
    (dirs, tris)
}

fn normalize(v: &[f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

pub(super) fn subdivide(dirs: &[[f64; 3]], tris: &[[usize; 3]]) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let mut out = dirs.to_vec();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::with_capacity(tris.len() * 3 / 2);
    let mut mid = |a: usize, b: usize, out: &mut Vec<[f64; 3]>| -> usize {
        *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let (p, q) = (out[a], out[b]);
            out.push(normalize(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
            out.len() - 1
        })
    };
    let mut new_tris = Vec::with_capacity(tris.len() * 4);
    for &[a, b, c] in tris {
        let ab = mid(a, b, &mut out);
        let bc = mid(b, c, &mut out);
        let ca = mid(c, a, &mut out);
        new_tris.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    (out, new_tris)
}

pub(super) fn radial_from_directions(
    sf: &SpaceForm,
    profile: RadialProfile,
    directions: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    level: usize,
) -> Result<SurfaceMesh> {
    profile.validate()?;
    if profile.max_radius() > sf.max_radius() {
        return Err(Error::Domain(format!(
            "profile {profile} reaches radius {} beyond the hemisphere margin {:.6}",
            profile.max_radius(),
            sf.max_radius()
        )));
    }
    let vertices = directions
        .iter()
        .map(|w| sf.radial_chart(&sf.direction_at_base(w), profile.eval(w)))
        .collect::<Result<Vec<_>>>()?;
    SurfaceMesh::new(
        sf.clone(),
        vertices,
        triangles,
        Some(RadialData {
            profile,
            directions,
            level,
        }),
    )
}

/// Star-shaped surface `exp_p(rho(omega) omega)` over the level-`level`
/// icosphere of directions.
pub fn gen_radial_surface(sf: &SpaceForm, profile: RadialProfile, level: usize) -> Result<SurfaceMesh> {
    let (dirs, tris) = icosphere(level);
    radial_from_directions(sf, profile, dirs, tris, level)
}

/// Ball of the given radius, layered in `2^level` equally spaced shells over
/// the level-`level` icosphere, with cones to the center in the innermost
/// layer. Each prism between shells is split into three tets with diagonals
/// running from the lower-index bottom vertex to the higher-index top vertex,
/// which keeps neighbouring prisms conforming.
pub fn gen_ball_volume(radius: f64, level: usize) -> Result<VolumeMesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("ball radius {radius} must be positive")));
    }
    let (dirs, tris) = icosphere(level);
    let shells = 1usize << level;
    let nd = dirs.len();
    let mut vertices = Vec::with_capacity(1 + shells * nd);
    vertices.push(Vector3::zeros());
    for j in 1..=shells {
        let r = radius * j as f64 / shells as f64;
        vertices.extend(dirs.iter().map(|d| Vector3::new(d[0], d[1], d[2]) * r));
    }
    // the outer shell sits exactly on the sphere
    let at = |shell: usize, d: usize| if shell == 0 { 0 } else { 1 + (shell - 1) * nd + d };

    let mut tets: Vec<[usize; 4]> = Vec::with_capacity(tris.len() * (3 * shells - 2));
    for t in &tris {
        tets.push([0, at(1, t[0]), at(1, t[1]), at(1, t[2])]);
    }
    for shell in 1..shells {
        for t in &tris {
            let mut s = *t;
            s.sort_unstable();
            let [i, j, k] = s;
            let (bi, bj, bk) = (at(shell, i), at(shell, j), at(shell, k));
            let (ti, tj, tk) = (at(shell + 1, i), at(shell + 1, j), at(shell + 1, k));
            tets.push([bi, bj, bk, tk]);
            tets.push([bi, bj, tj, tk]);
            tets.push([bi, ti, tj, tk]);
        }
    }
    for t in tets.iter_mut() {
        if tet_volume(&vertices, t) < 0.0 {
            t.swap(2, 3);
        }
    }
    VolumeMesh::new(vertices, tets, Some(RadialProfile::Sphere { radius }), Some(level))
}
