//! Closed star-shaped surface meshes in a space form and tetrahedral meshes
//! of the Euclidean ball.

mod generate;
mod io;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spaceform::{AmbientPoint, ModelKind, SpaceForm};

pub use generate::{gen_ball_volume, gen_radial_surface, icosphere};
pub use io::{load, parse, save, write_to_string, MeshFile};

/// Radius as a function of the direction `omega` (a unit vector in the
/// tangent frame at the base point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    Sphere {
        radius: f64,
    },
    /// `1/rho^2 = sum omega_i^2 / a_i^2`; an ellipsoid in flat space.
    Ellipsoid {
        axes: [f64; 3],
    },
    /// `rho = radius (1 + amplitude * omega_axis)`.
    Perturbed {
        radius: f64,
        amplitude: f64,
        axis: usize,
    },
}

impl RadialProfile {
    pub fn eval(&self, omega: &[f64; 3]) -> f64 {
        match *self {
            RadialProfile::Sphere { radius } => radius,
            RadialProfile::Ellipsoid { axes } => {
                let q: f64 = (0..3).map(|i| (omega[i] / axes[i]).powi(2)).sum();
                1.0 / q.sqrt()
            }
            RadialProfile::Perturbed {
                radius,
                amplitude,
                axis,
            } => radius * (1.0 + amplitude * omega[axis]),
        }
    }

    /// Upper bound of the profile over all directions.
    pub fn max_radius(&self) -> f64 {
        match *self {
            RadialProfile::Sphere { radius } => radius,
            RadialProfile::Ellipsoid { axes } => axes.iter().cloned().fold(0.0, f64::max),
            RadialProfile::Perturbed { radius, amplitude, .. } => radius * (1.0 + amplitude.abs()),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialProfile::Sphere { radius } => radius > 0.0 && radius.is_finite(),
            RadialProfile::Ellipsoid { axes } => axes.iter().all(|a| *a > 0.0 && a.is_finite()),
            RadialProfile::Perturbed {
                radius,
                amplitude,
                axis,
            } => radius > 0.0 && radius.is_finite() && amplitude.abs() < 1.0 && axis < 3,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "profile `{self}` is not a positive radial function"
            )))
        }
    }
}

impl fmt::Display for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RadialProfile::Sphere { radius } => write!(f, "sphere:{radius}"),
            RadialProfile::Ellipsoid { axes } => {
                write!(f, "ellipsoid:{},{},{}", axes[0], axes[1], axes[2])
            }
            RadialProfile::Perturbed {
                radius,
                amplitude,
                axis,
            } => write!(f, "perturbed:{radius},{amplitude},{}", axis + 1),
        }
    }
}

impl FromStr for RadialProfile {
    type Err = Error;

    /// `sphere:R`, `ellipsoid:a,b,c` or `perturbed:R,amplitude,axis` with a
    /// 1-based axis.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("cannot parse profile `{s}`"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let profile = match (name, nums.as_slice()) {
            ("sphere", [r]) => RadialProfile::Sphere { radius: *r },
            ("ellipsoid", [a, b, c]) => RadialProfile::Ellipsoid { axes: [*a, *b, *c] },
            ("perturbed", [r, amp, axis]) if axis.fract() == 0.0 && *axis >= 1.0 => RadialProfile::Perturbed {
                radius: *r,
                amplitude: *amp,
                axis: *axis as usize - 1,
            },
            _ => return Err(bad()),
        };
        profile.validate()?;
        Ok(profile)
    }
}

impl Serialize for RadialProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshScale {
    /// Longest edge (geodesic length).
    pub h: f64,
    pub n_vertices: usize,
    pub n_elements: usize,
}

#[derive(Debug, Clone)]
pub struct RadialData {
    pub profile: RadialProfile,
    /// Unit direction of each vertex in the base tangent frame.
    pub directions: Vec<[f64; 3]>,
    pub level: usize,
}

/// Closed, outward oriented triangle mesh of a sphere-like surface.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    space_form: SpaceForm,
    vertices: Vec<AmbientPoint>,
    triangles: Vec<[usize; 3]>,
    radial: Option<RadialData>,
}

impl SurfaceMesh {
    /// Validates model membership, closed edge-manifold topology and the
    /// outward orientation.
    pub fn new(
        space_form: SpaceForm,
        vertices: Vec<AmbientPoint>,
        triangles: Vec<[usize; 3]>,
        radial: Option<RadialData>,
    ) -> Result<Self> {
        if space_form.dim() != 3 {
            return Err(Error::Unsupported(
                "surface meshes live in three-dimensional models".into(),
            ));
        }
        for (i, v) in vertices.iter().enumerate() {
            space_form
                .check_point(v)
                .map_err(|e| Error::Domain(format!("vertex {i}: {e}")))?;
        }
        if let Some(r) = &radial {
            if r.directions.len() != vertices.len() {
                return Err(Error::Usage("one direction per vertex is required".into()));
            }
        }
        let mesh = SurfaceMesh {
            space_form,
            vertices,
            triangles,
            radial,
        };
        mesh.check_topology()?;
        mesh.check_orientation()?;
        Ok(mesh)
    }

    pub fn space_form(&self) -> &SpaceForm {
        &self.space_form
    }

    pub fn vertices(&self) -> &[AmbientPoint] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn radial(&self) -> Option<&RadialData> {
        self.radial.as_ref()
    }

    pub fn profile(&self) -> Option<RadialProfile> {
        self.radial.as_ref().map(|r| r.profile)
    }

    pub fn level(&self) -> Option<usize> {
        self.radial.as_ref().map(|r| r.level)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| (t[i].min(t[(i + 1) % 3]), t[i].max(t[(i + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    pub fn scale(&self) -> MeshScale {
        let h = self
            .edges()
            .iter()
            .map(|&(a, b)| {
                self.space_form
                    .geodesic_distance(&self.vertices[a], &self.vertices[b])
                    .unwrap_or(f64::NAN)
            })
            .fold(0.0, f64::max);
        MeshScale {
            h,
            n_vertices: self.vertices.len(),
            n_elements: self.triangles.len(),
        }
    }

    /// Every directed edge occurs once and its reverse once.
    pub fn check_topology(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::MeshQuality("not a closed surface: no triangles".into()));
        }
        let nv = self.vertices.len();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len());
        for (ti, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::MeshQuality(format!("triangle {ti} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::MeshQuality(format!("triangle {ti} repeats a vertex")));
            }
            for i in 0..3 {
                let e = (t[i], t[(i + 1) % 3]);
                if directed.insert(e, ti).is_some() {
                    return Err(Error::MeshQuality(format!(
                        "edge {e:?} is used twice with the same orientation"
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::MeshQuality(format!(
                    "not a closed surface: edge ({a}, {b}) borders a single triangle"
                )));
            }
        }
        let mut used = vec![false; nv];
        self.triangles.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::MeshQuality(format!("vertex {v} belongs to no triangle")));
        }
        Ok(())
    }

    /// Signed volume of the cones from the base point, in log-map
    /// coordinates for curved models; positive for outward orientation.
    pub fn enclosed_signed_volume(&self) -> f64 {
        let sf = &self.space_form;
        let coords: Vec<Vector3<f64>> = self
            .vertices
            .iter()
            .map(|x| match sf.kind() {
                ModelKind::Euclidean => Vector3::from_iterator((x.coords() - sf.base_point().coords()).iter().cloned()),
                _ => {
                    let (dir, rho) = sf.log_map(x).expect("vertex on model");
                    let w = sf.base_frame_coords(&dir);
                    Vector3::new(w[0], w[1], w[2]) * rho
                }
            })
            .collect();
        self.triangles
            .iter()
            .map(|t| Matrix3::from_columns(&[coords[t[0]], coords[t[1]], coords[t[2]]]).determinant() / 6.0)
            .sum()
    }

    fn check_orientation(&self) -> Result<()> {
        if self.enclosed_signed_volume() <= 0.0 {
            return Err(Error::MeshQuality("surface is not outward oriented".into()));
        }
        Ok(())
    }

    /// One 1-to-4 subdivision step, re-evaluating the radial profile at the
    /// new directions.
    pub fn refine(&self) -> Result<SurfaceMesh> {
        let radial = self.radial.as_ref().ok_or_else(|| {
            Error::Unsupported("refinement needs the radial profile the mesh was generated from".into())
        })?;
        let (dirs, tris) = generate::subdivide(&radial.directions, &self.triangles);
        generate::radial_from_directions(&self.space_form, radial.profile, dirs, tris, radial.level + 1)
    }
}

/// Tetrahedral mesh of a Euclidean domain with its boundary surface.
#[derive(Debug, Clone)]
pub struct VolumeMesh {
    vertices: Vec<Vector3<f64>>,
    tets: Vec<[usize; 4]>,
    boundary: SurfaceMesh,
    /// Volume index of each boundary surface vertex.
    boundary_vertices: Vec<usize>,
    level: Option<usize>,
}

impl VolumeMesh {
    /// Tets must already be positively oriented; this validates them and
    /// extracts the boundary surface.
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        tets: Vec<[usize; 4]>,
        profile: Option<RadialProfile>,
        level: Option<usize>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (i, t) in tets.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::MeshQuality(format!("tet {i} references a missing vertex")));
            }
            let vol = tet_volume(&vertices, t);
            if !(vol > 0.0) {
                return Err(Error::MeshQuality(format!("tet {i} has nonpositive volume {vol:e}")));
            }
        }
        let faces = boundary_faces(&tets)?;
        let mut boundary_vertices: Vec<usize> = faces.iter().flatten().cloned().collect();
        boundary_vertices.sort_unstable();
        boundary_vertices.dedup();
        let local: HashMap<usize, usize> = boundary_vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let triangles: Vec<[usize; 3]> = faces
            .iter()
            .map(|f| [local[&f[0]], local[&f[1]], local[&f[2]]])
            .collect();
        let points: Vec<AmbientPoint> = boundary_vertices
            .iter()
            .map(|&v| AmbientPoint::from_slice(vertices[v].as_slice()))
            .collect();
        let sf = SpaceForm::euclidean();
        let radial = match profile {
            Some(profile) => {
                let mut directions = Vec::with_capacity(points.len());
                for (i, p) in points.iter().enumerate() {
                    let d = p.coords().normalize();
                    let dir = [d[0], d[1], d[2]];
                    if (p.coords() - &d * profile.eval(&dir)).norm() > 1e-9 * profile.max_radius() {
                        return Err(Error::MeshQuality(format!(
                            "boundary vertex {} does not lie on the profile {profile}",
                            boundary_vertices[i]
                        )));
                    }
                    directions.push(dir);
                }
                Some(RadialData {
                    profile,
                    directions,
                    level: level.unwrap_or(0),
                })
            }
            None => None,
        };
        let boundary = SurfaceMesh::new(sf, points, triangles, radial)?;
        Ok(VolumeMesh {
            vertices,
            tets,
            boundary,
            boundary_vertices,
            level,
        })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary(&self) -> &SurfaceMesh {
        &self.boundary
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn level(&self) -> Option<usize> {
        self.level
    }

    pub fn total_volume(&self) -> f64 {
        self.tets.iter().map(|t| tet_volume(&self.vertices, t)).sum()
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        tet_volume(&self.vertices, &self.tets[t])
    }

    pub fn scale(&self) -> MeshScale {
        let mut h: f64 = 0.0;
        for t in &self.tets {
            for i in 0..4 {
                for j in i + 1..4 {
                    h = h.max((self.vertices[t[i]] - self.vertices[t[j]]).norm());
                }
            }
        }
        MeshScale {
            h,
            n_vertices: self.vertices.len(),
            n_elements: self.tets.len(),
        }
    }

    /// Regenerates the ball at the next level.
    pub fn refine(&self) -> Result<VolumeMesh> {
        match (self.boundary.profile(), self.level) {
            (Some(RadialProfile::Sphere { radius }), Some(level)) => gen_ball_volume(radius, level + 1),
            _ => Err(Error::Unsupported("only generated ball meshes can be refined".into())),
        }
    }
}

pub(crate) fn tet_volume(v: &[Vector3<f64>], t: &[usize; 4]) -> f64 {
    let a = v[t[1]] - v[t[0]];
    let b = v[t[2]] - v[t[0]];
    let c = v[t[3]] - v[t[0]];
    a.cross(&b).dot(&c) / 6.0
}

/// Faces of a positively oriented tet, each oriented away from the tet.
fn tet_faces(t: &[usize; 4]) -> [[usize; 3]; 4] {
    [
        [t[1], t[2], t[3]],
        [t[0], t[3], t[2]],
        [t[0], t[1], t[3]],
        [t[0], t[2], t[1]],
    ]
}

/// Outward faces that belong to exactly one tet. Fails when an interior
/// face is shared by more than two tets or twice with the same orientation.
fn boundary_faces(tets: &[[usize; 4]]) -> Result<Vec<[usize; 3]>> {
    let mut seen: HashMap<[usize; 3], ([usize; 3], usize)> = HashMap::new();
    let mut order: Vec<[usize; 3]> = Vec::new();
    for t in tets {
        for f in tet_faces(t) {
            let mut key = f;
            key.sort_unstable();
            let entry = seen.entry(key).or_insert_with(|| {
                order.push(key);
                (f, 0)
            });
            entry.1 += 1;
            if entry.1 > 2 {
                return Err(Error::MeshQuality(format!(
                    "face {key:?} is shared by more than two tets"
                )));
            }
        }
    }
    Ok(order
        .into_iter()
        .filter_map(|k| {
            let (f, count) = seen[&k];
            (count == 1).then_some(f)
        })
        .collect())
}
