//! Linear tetrahedral elements on Euclidean volume meshes: the Dirichlet
//! problem `Δu + n k u = 0, u = η on Σ` for `k <= 0`, and the weighted
//! Reilly identity checked by quadrature.

use nalgebra::{Matrix3, Vector3};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{AnalyticField, ScalarField};
use crate::linalg::{self, CgStats};
use crate::mesh::VolumeMesh;
use crate::surface_ops::SurfaceGeometry;

/// Relative residual at which the extension solve stops.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Spatial dimension of the volume pipeline.
const N: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct FemSystem {
    mesh: VolumeMesh,
    /// Gradients of the four barycentric coordinates of each tet.
    shape_gradients: Vec<[Vector3<f64>; 4]>,
    volumes: Vec<f64>,
    stiffness: CsrMatrix<f64>,
    mass: Vec<f64>,
    is_boundary: Vec<bool>,
}

/// Gradients of the barycentric coordinates of a tet.
fn barycentric_gradients(p: [Vector3<f64>; 4]) -> Option<[Vector3<f64>; 4]> {
    let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let inv = j.try_inverse()?;
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Some([-(g1 + g2 + g3), g1, g2, g3])
}

impl FemSystem {
    pub fn assemble(mesh: &VolumeMesh) -> Result<Self> {
        let verts = mesh.vertices();
        let local: Vec<([Vector3<f64>; 4], f64)> = mesh
            .tets()
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                let p = [verts[t[0]], verts[t[1]], verts[t[2]], verts[t[3]]];
                let g = barycentric_gradients(p).ok_or_else(|| Error::MeshQuality(format!("tet {i} is degenerate")))?;
                Ok((g, mesh.tet_volume(i)))
            })
            .collect::<Result<_>>()?;

        let nv = verts.len();
        let mut mass = vec![0.0; nv];
        let mut triplets = Vec::with_capacity(16 * local.len());
        for (t, (g, vol)) in mesh.tets().iter().zip(&local) {
            for a in 0..4 {
                mass[t[a]] += vol / 4.0;
                for b in 0..4 {
                    triplets.push((t[a], t[b], vol * g[a].dot(&g[b])));
                }
            }
        }
        let mut is_boundary = vec![false; nv];
        for &v in mesh.boundary_vertices() {
            is_boundary[v] = true;
        }
        let (shape_gradients, volumes) = local.into_iter().unzip();
        Ok(FemSystem {
            mesh: mesh.clone(),
            shape_gradients,
            volumes,
            stiffness: linalg::csr_from_triplets(nv, &triplets),
            mass,
            is_boundary,
        })
    }

    pub fn mesh(&self) -> &VolumeMesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn n_vertices(&self) -> usize {
        self.mass.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    /// Constant gradient of the P1 interpolant of `values` on tet `t`.
    pub fn tet_gradient(&self, t: usize, values: &[f64]) -> Vector3<f64> {
        let tet = self.mesh.tets()[t];
        let g = &self.shape_gradients[t];
        (0..4).map(|a| g[a] * values[tet[a]]).sum()
    }

    /// Volume-weighted average of the tet gradients around each vertex, the
    /// least-squares fit of a vertex field to the piecewise constant one.
    pub fn recovered_gradient(&self, values: &[f64]) -> Vec<Vector3<f64>> {
        let mut acc = vec![Vector3::zeros(); self.n_vertices()];
        let mut weight = vec![0.0; self.n_vertices()];
        for (t, tet) in self.mesh.tets().iter().enumerate() {
            let g = self.tet_gradient(t, values) * self.volumes[t];
            for &v in tet {
                acc[v] += g;
                weight[v] += self.volumes[t];
            }
        }
        acc.iter().zip(&weight).map(|(g, w)| g / *w).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub u: ScalarField,
    pub stats: CgStats,
}

/// Solves `Δu + 3 k u = 0` in the ball with `u = η` on the boundary, where
/// `eta` is indexed like the boundary surface vertices.
pub fn solve_extension(sys: &FemSystem, k: f64, eta: &ScalarField) -> Result<Extension> {
    if k > 0.0 {
        return Err(Error::Domain(format!(
            "k = {k} > 0 is refused: the extension problem can be resonant for positive k, and solvability \
             cannot be certified on this mesh family"
        )));
    }
    let bverts = sys.mesh.boundary_vertices();
    if eta.len() != bverts.len() {
        return Err(Error::Usage(format!(
            "boundary field has {} values but the boundary has {} vertices",
            eta.len(),
            bverts.len()
        )));
    }
    let nv = sys.n_vertices();
    let mut u = vec![0.0; nv];
    for (&v, &e) in bverts.iter().zip(&eta.values) {
        u[v] = e;
    }
    let interior: Vec<usize> = (0..nv).filter(|&v| !sys.is_boundary[v]).collect();
    let mut index = vec![usize::MAX; nv];
    for (i, &v) in interior.iter().enumerate() {
        index[v] = i;
    }

    // (L - n k M) restricted to interior rows; boundary columns move right.
    let shift = -N * k;
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; interior.len()];
    for (i, &v) in interior.iter().enumerate() {
        let row = sys.stiffness.row(v);
        for (&c, &a) in row.col_indices().iter().zip(row.values()) {
            if sys.is_boundary[c] {
                rhs[i] -= a * u[c];
            } else {
                triplets.push((i, index[c], a));
            }
        }
        triplets.push((i, i, shift * sys.mass[v]));
    }
    let a = linalg::csr_from_triplets(interior.len(), &triplets);
    // start from the boundary mean so constant data needs no iterations
    let mean = eta.values.iter().sum::<f64>() / eta.len().max(1) as f64;
    let mut x = vec![mean; interior.len()];
    let cap = (20.0 * (interior.len() as f64).sqrt()).ceil() as usize;
    let stats = linalg::pcg(&a, &rhs, &mut x, SOLVER_TOLERANCE, cap)?;
    for (&v, xi) in interior.iter().zip(x) {
        u[v] = xi;
    }
    Ok(Extension {
        u: ScalarField::new(u, format!("extension({}, k={k})", eta.id)),
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReillyTerms {
    /// `∫ V [(Δf + K n f)² - |∇²f + K f g|²]`
    pub lhs_vol: f64,
    /// `∫ [∇²V - (ΔV) g - 2(n-1) K V g](∇f, ∇f)`
    #[serde(rename = "hess_V_term")]
    pub hess_v_term: f64,
    /// `∫ V Ric(∇f, ∇f)`, identically zero on Euclidean meshes.
    pub ricci_term: f64,
    /// `(n-1) K ∫ (ΔV + n K V) f²`
    pub f_sq_term: f64,
    /// `∫ ∂V/∂ν [|∇_Σ f|² - (n-1) K f²]`
    #[serde(rename = "dVdnu_bdry")]
    pub dvdnu_bdry: f64,
    /// `∫ V [2 f_ν Δ_Σ f + 2(n-1) K f_ν f]`
    pub mixed_bdry: f64,
    /// `∫ V H f_ν²`
    #[serde(rename = "H_bdry")]
    pub h_bdry: f64,
    /// `∫ V II(∇_Σ f, ∇_Σ f)`
    #[serde(rename = "II_bdry")]
    pub ii_bdry: f64,
}

impl ReillyTerms {
    pub fn rhs(&self) -> f64 {
        self.hess_v_term
            + self.ricci_term
            + self.f_sq_term
            + self.dvdnu_bdry
            + self.mixed_bdry
            + self.h_bdry
            + self.ii_bdry
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReillyReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub terms: ReillyTerms,
    pub residual: f64,
    pub h: f64,
    pub mesh_id: String,
}

fn mesh_id(vol: &VolumeMesh) -> String {
    match (vol.boundary().profile(), vol.level()) {
        (Some(p), Some(l)) => format!("ball {p} level {l}"),
        _ => format!("volume {} vertices {} tets", vol.vertices().len(), vol.tets().len()),
    }
}

/// Evaluates every term of the weighted Reilly identity: volume terms by the
/// centroid rule, boundary terms lumped at the vertices with the discrete
/// surface operators.
pub fn verify_reilly(
    vol: &VolumeMesh,
    f: &dyn AnalyticField,
    v: &dyn AnalyticField,
    big_k: f64,
) -> Result<ReillyReport> {
    let verts = vol.vertices();
    let missing = |name: String| Error::Usage(format!("`{name}` has no Hessian supplier"));
    let probe = Vector3::zeros();
    f.hessian(&probe).ok_or_else(|| missing(f.name()))?;
    v.hessian(&probe).ok_or_else(|| missing(v.name()))?;

    let mut t = ReillyTerms {
        lhs_vol: 0.0,
        hess_v_term: 0.0,
        ricci_term: 0.0,
        f_sq_term: 0.0,
        dvdnu_bdry: 0.0,
        mixed_bdry: 0.0,
        h_bdry: 0.0,
        ii_bdry: 0.0,
    };
    let id = Matrix3::identity();
    for (i, tet) in vol.tets().iter().enumerate() {
        let w = vol.tet_volume(i);
        let c = (verts[tet[0]] + verts[tet[1]] + verts[tet[2]] + verts[tet[3]]) / 4.0;
        let fv = f.value(&c);
        let fg = f.gradient(&c);
        let fh = f.hessian(&c).ok_or_else(|| missing(f.name()))?;
        let vv = v.value(&c);
        let vh = v.hessian(&c).ok_or_else(|| missing(v.name()))?;
        let lap_f = fh.trace();
        let lap_v = vh.trace();
        let shifted = fh + id * (big_k * fv);
        t.lhs_vol += w * vv * ((lap_f + big_k * N * fv).powi(2) - shifted.norm_squared());
        let form = vh - id * (lap_v + 2.0 * (N - 1.0) * big_k * vv);
        t.hess_v_term += w * (fg.transpose() * form * fg)[0];
        t.f_sq_term += w * (N - 1.0) * big_k * (lap_v + N * big_k * vv) * fv * fv;
    }

    let geom = SurfaceGeometry::build(vol.boundary())?;
    let bpts: Vec<Vector3<f64>> = vol
        .boundary()
        .vertices()
        .iter()
        .map(|p| Vector3::new(p.coords()[0], p.coords()[1], p.coords()[2]))
        .collect();
    let fb = ScalarField::new(bpts.iter().map(|x| f.value(x)).collect(), f.name());
    let lap = geom.laplace_beltrami(&fb)?;
    let grad_sq = geom.tangential_gradient_sq(&fb)?;
    let ii = geom.ii_quadratic_form(&fb)?;
    let h = geom.mean_curvature();
    for (i, x) in bpts.iter().enumerate() {
        let nu = &geom.normals()[i];
        let nu = Vector3::new(nu[0], nu[1], nu[2]);
        let a = geom.vertex_areas()[i];
        let fv = fb.values[i];
        let f_nu = f.gradient(x).dot(&nu);
        let vv = v.value(x);
        let v_nu = v.gradient(x).dot(&nu);
        t.dvdnu_bdry += a * v_nu * (grad_sq[i] - (N - 1.0) * big_k * fv * fv);
        t.mixed_bdry += a * vv * (2.0 * f_nu * lap.values[i] + 2.0 * (N - 1.0) * big_k * f_nu * fv);
        t.h_bdry += a * vv * h[i] * f_nu * f_nu;
        t.ii_bdry += a * vv * ii[i];
    }
    Ok(ReillyReport {
        k: big_k,
        residual: t.lhs_vol - t.rhs(),
        terms: t,
        h: vol.scale().h,
        mesh_id: mesh_id(vol),
    })
}

/// The nonnegative quantities discarded when the identity is turned into
/// the inequality, for the extension `u` of `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub k: f64,
    /// `∫ V |∇²u + k u g|²` with the Hessian from gradient recovery.
    pub hessian_term: f64,
    /// `2 ∫ V [Ric - (n-1) k g](∇u, ∇u) + k [n(n-1)k - R] ∫ V u²`
    pub ricci_excess: f64,
    /// `∫ V [√H u_ν + (Δ_Σ η + (n-1) k η)/√H]²`
    pub boundary_square: f64,
    /// `lhs - rhs` of the boundary inequality on the same data.
    pub deficit: f64,
    /// `deficit - (hessian_term + ricci_excess + boundary_square)`
    pub slack: f64,
    pub h: f64,
    pub cg_iterations: usize,
}

/// Splits the deficit of `η` on the boundary of a Euclidean ball mesh into
/// the three discarded terms.
pub fn proof_decomposition(sys: &FemSystem, k: f64, eta: &ScalarField) -> Result<DecompositionReport> {
    if k != 0.0 {
        return Err(Error::Unsupported(
            "the decomposition is evaluated on Euclidean meshes with k = 0 only".into(),
        ));
    }
    let ext = solve_extension(sys, k, eta)?;
    let u = &ext.u.values;
    let mesh = &sys.mesh;
    let grad = sys.recovered_gradient(u);
    let comps: Vec<Vec<f64>> = (0..3).map(|c| grad.iter().map(|g| g[c]).collect()).collect();

    // V = 1 and Ric = 0 on Euclidean meshes.
    let mut hessian_term = 0.0;
    for (t, tet) in mesh.tets().iter().enumerate() {
        let rows: Vec<Vector3<f64>> = comps.iter().map(|c| sys.tet_gradient(t, c)).collect();
        let hess = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
        let hess = (hess + hess.transpose()) * 0.5;
        let u_c = tet.iter().map(|&v| u[v]).sum::<f64>() / 4.0;
        hessian_term += sys.volumes[t] * (hess + Matrix3::identity() * (k * u_c)).norm_squared();
    }
    let ricci_excess = 0.0;

    let geom = SurfaceGeometry::build(mesh.boundary())?;
    let lap = geom.laplace_beltrami(eta)?;
    let mut boundary_square = 0.0;
    for (i, &v) in mesh.boundary_vertices().iter().enumerate() {
        let nu = &geom.normals()[i];
        let u_nu = grad[v].dot(&Vector3::new(nu[0], nu[1], nu[2]));
        let h = geom.mean_curvature()[i];
        let q = h.sqrt() * u_nu + (lap.values[i] + (N - 1.0) * k * eta.values[i]) / h.sqrt();
        boundary_square += geom.vertex_areas()[i] * q * q;
    }
    let deficit =
        crate::functional::evaluate_deficit(&geom, &crate::functional::InequalityForm::space_form_static(), eta)?
            .deficit;
    Ok(DecompositionReport {
        k,
        hessian_term,
        ricci_excess,
        boundary_square,
        deficit,
        slack: deficit - (hessian_term + ricci_excess + boundary_square),
        h: mesh.scale().h,
        cg_iterations: ext.stats.iterations,
    })
}

/// RMS of `u - exact` over the mesh vertices.
pub fn rms_error(sys: &FemSystem, u: &ScalarField, exact: &dyn AnalyticField) -> f64 {
    let verts = sys.mesh.vertices();
    let sum: f64 = verts
        .iter()
        .zip(&u.values)
        .map(|(x, v)| (v - exact.value(x)).powi(2))
        .sum();
    (sum / verts.len() as f64).sqrt()
}

/// Samples a closed form on the boundary vertices of a volume mesh.
pub fn boundary_field(vol: &VolumeMesh, f: &dyn AnalyticField) -> ScalarField {
    ScalarField::new(
        vol.boundary_vertices()
            .iter()
            .map(|&v| f.value(&vol.vertices()[v]))
            .collect(),
        f.name(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ClosedForm;
    use crate::mesh::gen_ball_volume;
    use std::f64::consts::PI;

    fn ball(level: usize) -> FemSystem {
        FemSystem::assemble(&gen_ball_volume(1.0, level).unwrap()).unwrap()
    }

    #[test]
    fn stiffness_and_mass_invariants() {
        let sys = ball(2);
        for row in sys.stiffness().row_iter() {
            assert!(row.values().iter().sum::<f64>().abs() < 1e-12);
        }
        let total: f64 = sys.mass().iter().sum();
        assert!((total - sys.mesh().total_volume()).abs() < 1e-12);
    }

    #[test]
    fn constants_and_affine_are_reproduced() {
        let sys = ball(2);
        let one = boundary_field(sys.mesh(), &ClosedForm::constant(1.0));
        let ext = solve_extension(&sys, 0.0, &one).unwrap();
        assert!(ext.u.values.iter().all(|v| (v - 1.0).abs() <= 1e-9));
        let x1 = ClosedForm::coordinate(0);
        let ext = solve_extension(&sys, 0.0, &boundary_field(sys.mesh(), &x1)).unwrap();
        assert!(rms_error(&sys, &ext.u, &x1) < 1e-8);
    }

    #[test]
    fn harmonic_extension_of_x1_squared() {
        let sys = ball(3);
        let eta = boundary_field(sys.mesh(), &ClosedForm::CoordinateSquared(0));
        let ext = solve_extension(&sys, 0.0, &eta).unwrap();
        let exact = ClosedForm::HarmonicX1Squared;
        let err = rms_error(&sys, &ext.u, &exact);
        let scale = (sys
            .mesh()
            .vertices()
            .iter()
            .map(|x| exact.value(x).powi(2))
            .sum::<f64>()
            / sys.n_vertices() as f64)
            .sqrt();
        assert!(err / scale < 0.02, "{}", err / scale);
        // boundary values are imposed exactly
        for (&v, e) in sys.mesh().boundary_vertices().iter().zip(&eta.values) {
            assert_eq!(ext.u.values[v], *e);
        }
    }

    #[test]
    fn maximum_principle_and_linearity() {
        let sys = ball(2);
        let a = boundary_field(sys.mesh(), &ClosedForm::CoordinateSquared(0));
        let b = boundary_field(sys.mesh(), &ClosedForm::coordinate(2));
        let ua = solve_extension(&sys, 0.0, &a).unwrap().u;
        let ub = solve_extension(&sys, 0.0, &b).unwrap().u;
        let lo = a.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = a.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let outside = ua
            .values
            .iter()
            .filter(|v| **v < lo - 1e-10 || **v > hi + 1e-10)
            .count();
        assert!(outside * 100 <= ua.len(), "{outside} vertices outside [{lo}, {hi}]");
        let combo = ScalarField::new(
            a.values.iter().zip(&b.values).map(|(x, y)| 2.0 * x - 3.0 * y).collect(),
            "c",
        );
        let uc = solve_extension(&sys, 0.0, &combo).unwrap().u;
        for i in 0..uc.len() {
            assert!((uc.values[i] - (2.0 * ua.values[i] - 3.0 * ub.values[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn helmholtz_shift_solves() {
        let sys = ball(2);
        let one = boundary_field(sys.mesh(), &ClosedForm::constant(1.0));
        let u = solve_extension(&sys, -1.0, &one).unwrap().u;
        // Δu = 3u with u = 1 on the sphere stays below 1 inside
        assert!(u.values.iter().all(|v| *v <= 1.0 + 1e-10 && *v > 0.0));
        assert!(matches!(solve_extension(&sys, 0.5, &one), Err(Error::Domain(_))));
    }

    #[test]
    fn reilly_with_radius_squared() {
        let vol = gen_ball_volume(1.0, 4).unwrap();
        let r = verify_reilly(&vol, &ClosedForm::RadiusSquared, &ClosedForm::constant(1.0), 0.0).unwrap();
        assert!((r.terms.lhs_vol - 32.0 * PI).abs() / (32.0 * PI) < 0.02);
        assert_eq!(r.terms.hess_v_term, 0.0);
        assert_eq!(r.terms.dvdnu_bdry, 0.0);
        assert_eq!(r.residual, r.terms.lhs_vol - r.terms.rhs());
    }

    #[test]
    fn reilly_residual_shrinks() {
        for (f, v) in [
            (ClosedForm::coordinate(0), ClosedForm::constant(1.0)),
            (
                ClosedForm::coordinate(0),
                ClosedForm::Affine {
                    c0: 2.0,
                    c: [0.0, 1.0, 0.0],
                },
            ),
            (
                ClosedForm::CoordinateSquared(1),
                ClosedForm::Affine {
                    c0: 2.0,
                    c: [0.3, 0.0, 0.5],
                },
            ),
        ] {
            let res: Vec<f64> = (2..=4)
                .map(|l| {
                    verify_reilly(&gen_ball_volume(1.0, l).unwrap(), &f, &v, 0.0)
                        .unwrap()
                        .residual
                        .abs()
                })
                .collect();
            assert!(res[2] < res[1] && res[1] < res[0], "{res:?}");
        }
    }

    #[test]
    fn reilly_with_nonzero_k() {
        // the identity holds for every K; the terms change but the residual
        // still shrinks under refinement
        let f = ClosedForm::CoordinateSquared(0);
        let v = ClosedForm::Affine {
            c0: 2.0,
            c: [0.0, 1.0, 0.0],
        };
        let res: Vec<f64> = (2..=4)
            .map(|l| {
                verify_reilly(&gen_ball_volume(1.0, l).unwrap(), &f, &v, -0.7)
                    .unwrap()
                    .residual
                    .abs()
            })
            .collect();
        assert!(res[2] < res[0], "{res:?}");
    }

    #[test]
    fn decomposition_of_equality_data() {
        let sys = ball(3);
        let x1 = boundary_field(sys.mesh(), &ClosedForm::coordinate(0));
        let d = proof_decomposition(&sys, 0.0, &x1).unwrap();
        assert!(d.hessian_term < 1e-12, "{d:?}");
        assert!(d.boundary_square < 0.05, "{d:?}");
        let one = boundary_field(sys.mesh(), &ClosedForm::constant(1.0));
        let d = proof_decomposition(&sys, 0.0, &one).unwrap();
        assert!(
            d.hessian_term <= 1e-8 && d.boundary_square <= 1e-8 && d.deficit.abs() <= 1e-8,
            "{d:?}"
        );
    }

    #[test]
    fn decomposition_of_x1_squared() {
        let sys = ball(4);
        let eta = boundary_field(sys.mesh(), &ClosedForm::CoordinateSquared(0));
        let d = proof_decomposition(&sys, 0.0, &eta).unwrap();
        let hess = 32.0 * PI / 9.0;
        let square = 32.0 * PI / 45.0;
        assert!((d.hessian_term - hess).abs() / hess < 0.1, "{d:?}");
        assert!((d.boundary_square - square).abs() / square < 0.15, "{d:?}");
        assert!(d.slack.abs() < 0.1 * d.deficit, "{d:?}");
    }

    #[test]
    fn report_json_keys() {
        let vol = gen_ball_volume(1.0, 1).unwrap();
        let r = verify_reilly(&vol, &ClosedForm::coordinate(0), &ClosedForm::constant(1.0), 0.0).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["K", "terms", "residual", "h", "mesh_id"] {
            assert!(v.get(key).is_some());
        }
        for key in [
            "lhs_vol",
            "hess_V_term",
            "ricci_term",
            "f_sq_term",
            "dVdnu_bdry",
            "mixed_bdry",
            "H_bdry",
            "II_bdry",
        ] {
            assert!(v["terms"].get(key).is_some(), "{key}");
        }
    }
}
