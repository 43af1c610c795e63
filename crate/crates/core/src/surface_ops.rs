//! Discrete operators and pointwise geometry on a closed surface.
//!
//! Intrinsic quantities (areas, cotangent weights, gradients) come from the
//! triangles unfolded with their geodesic edge lengths, so the same code
//! serves all three models. The Laplace-Beltrami operator uses the geometer's
//! sign, `Δ = -M⁻¹L`, with `L` the cotangent stiffness matrix and `M` the
//! barycentric lumped mass.
//!
//! Normals, the second fundamental form and the mean curvature (its trace)
//! are taken with respect to the outward normal, so that the unit sphere has
//! `II = g` and `H = 2`. On radial meshes they are computed from the radial
//! profile by differentiating the embedding; on Euclidean meshes without a
//! profile, from a quadric fitted over the 2-ring.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::linalg;
use crate::mesh::{RadialProfile, SurfaceMesh};
use crate::spaceform::{AmbientPoint, ModelKind, SpaceForm};

/// Smallest admissible interior angle of an unfolded triangle, in radians.
pub const MIN_ANGLE: f64 = 1e-6;

/// Step of the finite differences in the direction parameters.
const PROFILE_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    mesh: SurfaceMesh,
    /// Geodesic lengths, `lengths[t][i]` opposite corner `i`.
    lengths: Vec<[f64; 3]>,
    triangle_areas: Vec<f64>,
    /// Half cotangent of corner `i`, the weight of the opposite edge.
    half_cots: Vec<[f64; 3]>,
    vertex_areas: Vec<f64>,
    stiffness: CsrMatrix<f64>,
    normals: Vec<DVector<f64>>,
    frames: Vec<[DVector<f64>; 2]>,
    second_form: Vec<Matrix2<f64>>,
    mean_curvature: Vec<f64>,
}

/// Pointwise extrinsic data at one vertex.
#[derive(Debug, Clone)]
pub struct VertexFrame {
    pub normal: DVector<f64>,
    pub frame: [DVector<f64>; 2],
    /// Second fundamental form in `frame`.
    pub second_form: Matrix2<f64>,
}

/// Interior angle opposite side `c` and the area of a triangle with the
/// given side lengths.
fn triangle_area(a: f64, b: f64, c: f64) -> f64 {
    // Kahan's ordering for a stable Heron formula.
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * p.max(0.0).sqrt()
}

impl SurfaceGeometry {
    pub fn build(mesh: &SurfaceMesh) -> Result<Self> {
        let sf = mesh.space_form();
        let verts = mesh.vertices();
        let tris = mesh.triangles();
        let nv = verts.len();

        let mut lengths = Vec::with_capacity(tris.len());
        let mut triangle_areas = Vec::with_capacity(tris.len());
        let mut half_cots = Vec::with_capacity(tris.len());
        for (ti, t) in tris.iter().enumerate() {
            let mut l = [0.0; 3];
            for i in 0..3 {
                l[i] = sf.geodesic_distance(&verts[t[(i + 1) % 3]], &verts[t[(i + 2) % 3]])?;
            }
            let area = triangle_area(l[0], l[1], l[2]);
            let mut hc = [0.0; 3];
            for i in 0..3 {
                let (a, b, c) = (l[(i + 1) % 3], l[(i + 2) % 3], l[i]);
                let cosine_term = a * a + b * b - c * c;
                let angle = (4.0 * area).atan2(cosine_term);
                if !(angle >= MIN_ANGLE) {
                    return Err(Error::MeshQuality(format!(
                        "triangle {ti} has an interior angle of {angle:e} rad"
                    )));
                }
                hc[i] = 0.5 * cosine_term / (4.0 * area);
            }
            lengths.push(l);
            triangle_areas.push(area);
            half_cots.push(hc);
        }

        let mut vertex_areas = vec![0.0; nv];
        let mut triplets = Vec::with_capacity(12 * tris.len());
        for (t, (hc, area)) in tris.iter().zip(half_cots.iter().zip(&triangle_areas)) {
            for i in 0..3 {
                vertex_areas[t[i]] += area / 3.0;
                let (a, b, w) = (t[(i + 1) % 3], t[(i + 2) % 3], hc[i]);
                triplets.extend_from_slice(&[(a, a, w), (b, b, w), (a, b, -w), (b, a, -w)]);
            }
        }
        let stiffness = linalg::csr_from_triplets(nv, &triplets);

        let frames = vertex_frames(mesh)?;
        let mut normals = Vec::with_capacity(nv);
        let mut tangent_frames = Vec::with_capacity(nv);
        let mut second_form = Vec::with_capacity(nv);
        for f in frames {
            normals.push(f.normal);
            tangent_frames.push(f.frame);
            second_form.push(f.second_form);
        }
        let mean_curvature = second_form.iter().map(|m| m.trace()).collect();

        Ok(SurfaceGeometry {
            mesh: mesh.clone(),
            lengths,
            triangle_areas,
            half_cots,
            vertex_areas,
            stiffness,
            normals,
            frames: tangent_frames,
            second_form,
            mean_curvature,
        })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn space_form(&self) -> &SpaceForm {
        self.mesh.space_form()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_areas.len()
    }

    /// Lumped mass, the diagonal of `M`.
    pub fn vertex_areas(&self) -> &[f64] {
        &self.vertex_areas
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.triangle_areas
    }

    pub fn total_area(&self) -> f64 {
        self.triangle_areas.iter().sum()
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    pub fn normals(&self) -> &[DVector<f64>] {
        &self.normals
    }

    pub fn frames(&self) -> &[[DVector<f64>; 2]] {
        &self.frames
    }

    pub fn second_fundamental_form(&self) -> &[Matrix2<f64>] {
        &self.second_form
    }

    pub fn mean_curvature(&self) -> &[f64] {
        &self.mean_curvature
    }

    pub fn min_mean_curvature(&self) -> (usize, f64) {
        self.mean_curvature.iter().enumerate().fold(
            (0, f64::INFINITY),
            |(bi, bh), (i, &h)| if h < bh { (i, h) } else { (bi, bh) },
        )
    }

    fn check_field(&self, field: &ScalarField) -> Result<()> {
        if field.len() != self.n_vertices() {
            return Err(Error::Usage(format!(
                "field `{}` has {} values but the mesh has {} vertices",
                field.id,
                field.len(),
                self.n_vertices()
            )));
        }
        Ok(())
    }

    /// `L η`, accumulated edge by edge as `w (η_a - η_b)` so constants map
    /// to exact zeros.
    pub fn apply_stiffness(&self, field: &ScalarField) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let eta = &field.values;
        let mut out = vec![0.0; eta.len()];
        for (t, hc) in self.mesh.triangles().iter().zip(&self.half_cots) {
            for i in 0..3 {
                let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                let flux = hc[i] * (eta[a] - eta[b]);
                out[a] += flux;
                out[b] -= flux;
            }
        }
        Ok(out)
    }

    /// `Δ_Σ η = -M⁻¹ L η`.
    pub fn laplace_beltrami(&self, field: &ScalarField) -> Result<ScalarField> {
        let l = self.apply_stiffness(field)?;
        let values = l.iter().zip(&self.vertex_areas).map(|(v, m)| -v / m).collect();
        Ok(ScalarField::new(values, format!("lap({})", field.id)))
    }

    /// `ηᵀ L ξ` through the stiffness matrix.
    pub fn stiffness_form(&self, eta: &ScalarField, xi: &ScalarField) -> Result<f64> {
        self.check_field(eta)?;
        self.check_field(xi)?;
        let mut l = vec![0.0; eta.len()];
        linalg::matvec(&self.stiffness, &xi.values, &mut l);
        Ok(linalg::dot(&eta.values, &l))
    }

    /// Gradient of the affine interpolant on each unfolded triangle, as
    /// coefficients `(alpha, beta)` on the edge vectors from corner 0 to
    /// corners 1 and 2.
    fn triangle_gradient(&self, t: usize, eta: &[f64]) -> (Vector2<f64>, Matrix2<f64>) {
        let tri = self.mesh.triangles()[t];
        let l = self.lengths[t];
        // e1 = P1 - P0 has length l[2], e2 = P2 - P0 has length l[1].
        let g11 = l[2] * l[2];
        let g22 = l[1] * l[1];
        let g12 = 0.5 * (g11 + g22 - l[0] * l[0]);
        let gram = Matrix2::new(g11, g12, g12, g22);
        let d = Vector2::new(eta[tri[1]] - eta[tri[0]], eta[tri[2]] - eta[tri[0]]);
        let inv = gram.try_inverse().unwrap_or_else(Matrix2::zeros);
        (inv * d, gram)
    }

    /// `sum_T area_T <∇η, ∇ξ>_T` from the per-triangle affine gradients.
    pub fn galerkin_form(&self, eta: &ScalarField, xi: &ScalarField) -> Result<f64> {
        self.check_field(eta)?;
        self.check_field(xi)?;
        Ok((0..self.triangle_areas.len())
            .map(|t| {
                let (a, gram) = self.triangle_gradient(t, &eta.values);
                let (b, _) = self.triangle_gradient(t, &xi.values);
                self.triangle_areas[t] * (a.transpose() * gram * b)[0]
            })
            .sum())
    }

    /// `|∇_Σ η|²` per vertex: the area average of the squared triangle
    /// gradients over the incident triangles. Weighted by the vertex areas
    /// it sums to `ηᵀ L η`.
    pub fn tangential_gradient_sq(&self, field: &ScalarField) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let eta = &field.values;
        let mut acc = vec![0.0; eta.len()];
        for (t, (tri, hc)) in self.mesh.triangles().iter().zip(&self.half_cots).enumerate() {
            // area |∇η|² = sum over edges of w (Δη)²
            let mut energy = 0.0;
            for i in 0..3 {
                let d = eta[tri[(i + 1) % 3]] - eta[tri[(i + 2) % 3]];
                energy += hc[i] * d * d;
            }
            let _ = t;
            for &v in tri {
                acc[v] += energy / 3.0;
            }
        }
        Ok(acc.iter().zip(&self.vertex_areas).map(|(e, m)| e / m).collect())
    }

    /// Area-averaged tangential gradient at each vertex, in the vertex frame.
    pub fn vertex_gradients(&self, field: &ScalarField) -> Result<Vec<Vector2<f64>>> {
        self.check_field(field)?;
        let sf = self.space_form();
        let verts = self.mesh.vertices();
        let mut acc = vec![Vector2::zeros(); field.len()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let (coef, _) = self.triangle_gradient(t, &field.values);
            let p0 = verts[tri[0]].coords();
            let g = (verts[tri[1]].coords() - p0) * coef[0] + (verts[tri[2]].coords() - p0) * coef[1];
            let w = self.triangle_areas[t] / 3.0;
            for &v in tri {
                let [e1, e2] = &self.frames[v];
                acc[v] += Vector2::new(sf.inner(&g, e1), sf.inner(&g, e2)) * w;
            }
        }
        Ok(acc.iter().zip(&self.vertex_areas).map(|(g, m)| g / *m).collect())
    }

    /// `II(∇_Σ η, ∇_Σ η)` per vertex with the vertex-averaged gradient.
    pub fn ii_quadratic_form(&self, field: &ScalarField) -> Result<Vec<f64>> {
        Ok(self
            .vertex_gradients(field)?
            .iter()
            .zip(&self.second_form)
            .map(|(g, ii)| (g.transpose() * ii * g)[0])
            .collect())
    }

    /// `<grad f, ν>` per vertex for a supplied ambient gradient.
    pub fn normal_derivative(&self, gradient: impl Fn(usize, &AmbientPoint) -> DVector<f64>) -> Vec<f64> {
        let sf = self.space_form();
        self.mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, x)| sf.inner(&gradient(i, x), &self.normals[i]))
            .collect()
    }

    /// `∂V/∂ν` for the distinguished static potential of the model.
    pub fn normal_derivative_v(&self) -> Result<Vec<f64>> {
        let sf = self.space_form();
        let v = sf.distinguished_potential();
        let grads = self
            .mesh
            .vertices()
            .iter()
            .map(|x| sf.potential_jet(&v, x).map(|j| j.gradient))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.normal_derivative(|i, _| grads[i].clone()))
    }
}

/// Normal, tangent frame and second fundamental form at each vertex.
fn vertex_frames(mesh: &SurfaceMesh) -> Result<Vec<VertexFrame>> {
    let sf = mesh.space_form();
    let verts = mesh.vertices();
    // seed neighbour: the next corner of the first triangle at each vertex
    let mut seed = vec![usize::MAX; verts.len()];
    for t in mesh.triangles() {
        for i in 0..3 {
            if seed[t[i]] == usize::MAX {
                seed[t[i]] = t[(i + 1) % 3];
            }
        }
    }
    match mesh.radial() {
        Some(radial) => {
            let basis = sf.tangent_basis(sf.base_point());
            let chart = RadialChart {
                sf,
                basis: &basis,
                profile: radial.profile,
            };
            (0..verts.len())
                .into_par_iter()
                .map(|v| {
                    let (xs, xt, second) = chart.derivatives(&radial.directions[v]);
                    let outward = sf.distance_gradient(sf.base_point(), &verts[v])?;
                    let seed_dir = verts[seed[v]].coords() - verts[v].coords();
                    surface_frame(sf, &verts[v], &xs, &xt, &second, &outward, &seed_dir)
                })
                .collect()
        }
        None if sf.kind() == ModelKind::Euclidean => quadric_frames(mesh, &seed),
        None => Err(Error::Unsupported(
            "curvature on curved models needs the radial profile of the surface".into(),
        )),
    }
}

struct RadialChart<'a> {
    sf: &'a SpaceForm,
    basis: &'a [DVector<f64>],
    profile: RadialProfile,
}

impl RadialChart<'_> {
    fn point(&self, omega: &[f64; 3]) -> DVector<f64> {
        let mut dir = DVector::zeros(self.sf.ambient_dim());
        for (b, w) in self.basis.iter().zip(omega) {
            dir += b * *w;
        }
        self.sf
            .radial_chart(&dir, self.profile.eval(omega))
            .expect("profile validated at generation")
            .0
    }

    /// First derivatives and the three second derivatives `[ss, st, tt]` of
    /// the embedding in orthonormal parameters around `omega`, by
    /// fourth-order central differences.
    fn derivatives(&self, omega: &[f64; 3]) -> (DVector<f64>, DVector<f64>, [DVector<f64>; 3]) {
        let w = Vector3::from(*omega);
        let helper = if w.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u = w.cross(&helper).normalize();
        let v = w.cross(&u);
        let at = |s: f64, t: f64| {
            let d = (w + u * s + v * t).normalize();
            self.point(&[d.x, d.y, d.z])
        };
        let h = PROFILE_STEP;
        let first = |ds: f64, dt: f64| {
            (at(-2.0 * h * ds, -2.0 * h * dt) - at(2.0 * h * ds, 2.0 * h * dt) + at(h * ds, h * dt) * 8.0
                - at(-h * ds, -h * dt) * 8.0)
                / (12.0 * h)
        };
        let center = at(0.0, 0.0);
        let second = |ds: f64, dt: f64| {
            (at(2.0 * h * ds, 2.0 * h * dt) * -1.0 + at(h * ds, h * dt) * 16.0 - &center * 30.0
                + at(-h * ds, -h * dt) * 16.0
                - at(-2.0 * h * ds, -2.0 * h * dt))
                / (12.0 * h * h)
        };
        let xs = first(1.0, 0.0);
        let xt = first(0.0, 1.0);
        let xss = second(1.0, 0.0);
        let xtt = second(0.0, 1.0);
        let xst = (second(1.0, 1.0) - second(1.0, -1.0)) / 4.0;
        (xs, xt, [xss, xst, xtt])
    }
}

/// Assembles the vertex frame from the first and second derivatives of a
/// local parametrization `X(s, t)` of the surface through `x`.
///
/// Only the component of `D_a X_b` along `ν` enters, and `ν` is tangent to
/// the model, so this is the model's covariant derivative.
pub fn surface_frame(
    sf: &SpaceForm,
    x: &AmbientPoint,
    xs: &DVector<f64>,
    xt: &DVector<f64>,
    second: &[DVector<f64>; 3],
    outward: &DVector<f64>,
    seed: &DVector<f64>,
) -> Result<VertexFrame> {
    let basis = sf.tangent_basis(x);
    let coords =
        |v: &DVector<f64>| Vector3::new(sf.inner(v, &basis[0]), sf.inner(v, &basis[1]), sf.inner(v, &basis[2]));
    let from_coords = |c: &Vector3<f64>| &basis[0] * c.x + &basis[1] * c.y + &basis[2] * c.z;

    let a = coords(xs);
    let b = coords(xt);
    let mut n = a.cross(&b);
    let nn = n.norm();
    if !(nn > 0.0) {
        return Err(Error::MeshQuality("degenerate surface parametrization".into()));
    }
    n /= nn;
    if n.dot(&coords(outward)) < 0.0 {
        n = -n;
    }
    let normal = from_coords(&n);

    let first = Matrix2::new(a.dot(&a), a.dot(&b), a.dot(&b), b.dot(&b));
    let [xss, xst, xtt] = second;
    let ii_param = -Matrix2::new(
        sf.inner(xss, &normal),
        sf.inner(xst, &normal),
        sf.inner(xst, &normal),
        sf.inner(xtt, &normal),
    );

    let mut e1 = coords(seed);
    e1 -= n * n.dot(&e1);
    let ne = e1.norm();
    if !(ne > 0.0) {
        return Err(Error::MeshQuality("seed edge is parallel to the normal".into()));
    }
    e1 /= ne;
    let e2 = n.cross(&e1);

    let inv_first = first
        .try_inverse()
        .ok_or_else(|| Error::MeshQuality("singular first fundamental form".into()))?;
    let c1 = inv_first * Vector2::new(e1.dot(&a), e1.dot(&b));
    let c2 = inv_first * Vector2::new(e2.dot(&a), e2.dot(&b));
    let c = Matrix2::from_columns(&[c1, c2]);
    let ii = c.transpose() * ii_param * c;
    let ii = (ii + ii.transpose()) * 0.5;

    Ok(VertexFrame {
        normal,
        frame: [from_coords(&e1), from_coords(&e2)],
        second_form: ii,
    })
}

/// Curvature of Euclidean meshes without a profile: least-squares height
/// function `w = a u² + b uv + c v² + d u + e v` over the 2-ring, in a frame
/// around the area-weighted vertex normal.
fn quadric_frames(mesh: &SurfaceMesh, seed: &[usize]) -> Result<Vec<VertexFrame>> {
    let sf = mesh.space_form();
    let pos: Vec<Vector3<f64>> = mesh
        .vertices()
        .iter()
        .map(|v| Vector3::new(v.coords()[0], v.coords()[1], v.coords()[2]))
        .collect();
    let nv = pos.len();
    let mut normals = vec![Vector3::zeros(); nv];
    let mut ring: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for t in mesh.triangles() {
        let fnorm = (pos[t[1]] - pos[t[0]]).cross(&(pos[t[2]] - pos[t[0]]));
        for i in 0..3 {
            normals[t[i]] += fnorm;
            ring[t[i]].push(t[(i + 1) % 3]);
            ring[t[i]].push(t[(i + 2) % 3]);
        }
    }
    for r in ring.iter_mut() {
        r.sort_unstable();
        r.dedup();
    }
    (0..nv)
        .into_par_iter()
        .map(|v| {
            let n0 = normals[v].normalize();
            let mut e1 = pos[seed[v]] - pos[v];
            e1 -= n0 * n0.dot(&e1);
            let e1 = e1.normalize();
            let e2 = n0.cross(&e1);
            let mut two_ring: Vec<usize> = ring[v].iter().flat_map(|&w| ring[w].iter().cloned()).collect();
            two_ring.extend(&ring[v]);
            two_ring.sort_unstable();
            two_ring.dedup();
            two_ring.retain(|&w| w != v);
            if two_ring.len() < 5 {
                return Err(Error::MeshQuality(format!(
                    "vertex {v} has too few neighbours for a quadric fit"
                )));
            }
            let mut a = DMatrix::zeros(two_ring.len(), 5);
            let mut rhs = DVector::zeros(two_ring.len());
            for (row, &w) in two_ring.iter().enumerate() {
                let d = pos[w] - pos[v];
                let (x, y, z) = (d.dot(&e1), d.dot(&e2), d.dot(&n0));
                a.row_mut(row).copy_from_slice(&[x * x, x * y, y * y, x, y]);
                rhs[row] = z;
            }
            let coef = a
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .map_err(|e| Error::MeshQuality(format!("quadric fit failed at vertex {v}: {e}")))?;
            let to_d = |c: Vector3<f64>| DVector::from_column_slice(c.as_slice());
            let xs = to_d(e1 + n0 * coef[3]);
            let xt = to_d(e2 + n0 * coef[4]);
            let second = [
                to_d(n0 * (2.0 * coef[0])),
                to_d(n0 * coef[1]),
                to_d(n0 * (2.0 * coef[2])),
            ];
            surface_frame(sf, &mesh.vertices()[v], &xs, &xt, &second, &to_d(n0), &to_d(e1))
        })
        .collect()
}
