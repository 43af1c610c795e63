//! The boundary functional and its deficit.
//!
//! For a boundary field `η` the two sides are
//!
//! ```text
//! lhs = ∫ V [ (Δ_Σ η + (n-1) k η)² / H - II(∇η, ∇η) ] dσ
//! rhs = ∫ ∂V/∂ν [ |∇η|² - (n-1) k η² ] dσ
//! ```
//!
//! with `V` the distinguished static potential of the model. The sectional
//! comparison variant uses `V = cosh(√κ r)` and `k = -κ`. Every integral is
//! a vertex-lumped sum over the mass matrix.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Polynomial, ScalarField};
use crate::mesh::SurfaceMesh;
use crate::spaceform::{AmbientPoint, ModelKind, SpaceForm};
use crate::surface_ops::SurfaceGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `V` the static potential of the model, constant `k`.
    SpaceFormStatic,
    /// `V = cosh(√κ r)` about an interior point.
    SectionalComparison,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::SpaceFormStatic => "static",
            Variant::SectionalComparison => "thm4",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" | "space_form_static" => Ok(Variant::SpaceFormStatic),
            "thm4" | "sectional" | "sectional_comparison" => Ok(Variant::SectionalComparison),
            _ => Err(Error::Usage(format!("unknown variant `{s}` (expected static or thm4)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityForm {
    pub variant: Variant,
    /// `k` for the static variant (`None` = model curvature), `κ` for the
    /// sectional one.
    pub k_or_kappa: Option<f64>,
    pub base_point: Option<AmbientPoint>,
}

impl InequalityForm {
    pub fn space_form_static() -> Self {
        InequalityForm {
            variant: Variant::SpaceFormStatic,
            k_or_kappa: None,
            base_point: None,
        }
    }

    /// Static potential of the model with a smaller constant `k`.
    pub fn general_k(k: f64) -> Self {
        InequalityForm {
            variant: Variant::SpaceFormStatic,
            k_or_kappa: Some(k),
            base_point: None,
        }
    }

    pub fn sectional(kappa: f64) -> Self {
        InequalityForm {
            variant: Variant::SectionalComparison,
            k_or_kappa: Some(kappa),
            base_point: None,
        }
    }

    pub fn with_base_point(mut self, p: AmbientPoint) -> Self {
        self.base_point = Some(p);
        self
    }

    /// Signed constant entering the `η` terms, and the `κ` recorded in
    /// reports.
    fn constants(&self, sf: &SpaceForm) -> Result<(f64, f64)> {
        match self.variant {
            Variant::SpaceFormStatic => {
                let model_k = sf.k();
                let k = self.k_or_kappa.unwrap_or(model_k);
                // Ric = (n-1) k_model g must dominate (n-1) k g with k <= 0,
                // or the metric is Einstein with constant k.
                let einstein = (k - model_k).abs() <= 1e-14 * model_k.abs().max(1.0);
                if !(einstein || (k <= 0.0 && k <= model_k)) {
                    return Err(Error::Usage(format!(
                        "k = {k} is admissible only if k <= 0 and k <= {model_k}, or k equals the model curvature"
                    )));
                }
                Ok((k, sf.kappa()))
            }
            Variant::SectionalComparison => {
                let kappa = self
                    .k_or_kappa
                    .ok_or_else(|| Error::Usage("the sectional variant needs kappa".into()))?;
                if !(kappa > 0.0) {
                    return Err(Error::Usage(format!(
                        "the sectional variant needs kappa > 0, got {kappa}"
                    )));
                }
                if sf.k() < -kappa {
                    return Err(Error::Usage(format!(
                        "sectional curvature {} is below -kappa = {}",
                        sf.k(),
                        -kappa
                    )));
                }
                Ok((-kappa, kappa))
            }
        }
    }

    /// `V` and `∂V/∂ν` at every vertex.
    fn weights(&self, geom: &SurfaceGeometry) -> Result<(Vec<f64>, Vec<f64>)> {
        let sf = match &self.base_point {
            Some(p) => geom.space_form().clone().with_base_point(p.clone())?,
            None => geom.space_form().clone(),
        };
        let verts = geom.mesh().vertices();
        let normals = geom.normals();
        match self.variant {
            Variant::SpaceFormStatic => {
                let coeffs = sf.distinguished_potential();
                let mut v = Vec::with_capacity(verts.len());
                let mut dv = Vec::with_capacity(verts.len());
                for (x, nu) in verts.iter().zip(normals) {
                    let jet = sf.potential_jet(&coeffs, x)?;
                    v.push(jet.value);
                    dv.push(sf.inner(&jet.gradient, nu));
                }
                Ok((v, dv))
            }
            Variant::SectionalComparison => {
                let (_, kappa) = self.constants(&sf)?;
                let s = kappa.sqrt();
                let p = sf.base_point();
                let mut v = Vec::with_capacity(verts.len());
                let mut dv = Vec::with_capacity(verts.len());
                for (x, nu) in verts.iter().zip(normals) {
                    let r = sf.geodesic_distance(p, x)?;
                    let grad_r = sf.distance_gradient(p, x)?;
                    v.push((s * r).cosh());
                    dv.push(s * (s * r).sinh() * sf.inner(&grad_r, nu));
                }
                Ok((v, dv))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitTerms {
    /// `∫ V (Δ_Σ η + (n-1) k η)² / H`
    pub lap_term: f64,
    /// `∫ V II(∇η, ∇η)`
    pub ii_term: f64,
    /// `∫ ∂V/∂ν |∇η|²`
    pub grad_term: f64,
    /// `∫ ∂V/∂ν (n-1) k η²`
    pub eta_sq_term: f64,
}

impl DeficitTerms {
    pub fn magnitude(&self) -> f64 {
        self.lap_term.abs() + self.ii_term.abs() + self.grad_term.abs() + self.eta_sq_term.abs()
    }

    pub fn lhs_magnitude(&self) -> f64 {
        self.lap_term.abs() + self.ii_term.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DeficitReport {
    pub variant: Variant,
    pub k: f64,
    pub kappa: f64,
    pub h: f64,
    pub n_vertices: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub terms: DeficitTerms,
    pub min_H: f64,
    pub field_id: String,
    pub seed: Option<u64>,
}

impl DeficitReport {
    /// `|deficit|` over the sum of the term magnitudes.
    pub fn relative_deficit(&self) -> f64 {
        let m = self.terms.magnitude();
        if m == 0.0 {
            self.deficit.abs()
        } else {
            self.deficit.abs() / m
        }
    }
}

/// Evaluates both sides of the inequality for `eta`.
pub fn evaluate_deficit(geom: &SurfaceGeometry, form: &InequalityForm, eta: &ScalarField) -> Result<DeficitReport> {
    let sf = geom.space_form();
    let (k, kappa) = form.constants(sf)?;
    let (vertex, min_h) = geom.min_mean_curvature();
    if !(min_h > 0.0) {
        return Err(Error::Hypothesis {
            vertex,
            mean_curvature: min_h,
        });
    }
    let (v, dv) = form.weights(geom)?;
    let c = (sf.dim() as f64 - 1.0) * k;
    let lap = geom.laplace_beltrami(eta)?;
    let grad_sq = geom.tangential_gradient_sq(eta)?;
    let ii = geom.ii_quadratic_form(eta)?;
    let h = geom.mean_curvature();
    let area = geom.vertex_areas();

    let mut terms = DeficitTerms {
        lap_term: 0.0,
        ii_term: 0.0,
        grad_term: 0.0,
        eta_sq_term: 0.0,
    };
    for i in 0..area.len() {
        let e = eta.values[i];
        let q = lap.values[i] + c * e;
        terms.lap_term += area[i] * v[i] * q * q / h[i];
        terms.ii_term += area[i] * v[i] * ii[i];
        terms.grad_term += area[i] * dv[i] * grad_sq[i];
        terms.eta_sq_term += area[i] * dv[i] * c * e * e;
    }
    let lhs = terms.lap_term - terms.ii_term;
    let rhs = terms.grad_term - terms.eta_sq_term;
    Ok(DeficitReport {
        variant: form.variant,
        k,
        kappa,
        h: geom.mesh().scale().h,
        n_vertices: geom.n_vertices(),
        lhs,
        rhs,
        deficit: lhs - rhs,
        terms,
        min_H: min_h,
        field_id: eta.id.clone(),
        seed: None,
    })
}

/// A report together with what the continuum predicts for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedReport {
    pub expectation: String,
    pub report: DeficitReport,
}

/// Coefficient vectors probed by [`equality_case_suite`] when none are
/// given: every basis element and one mixed combination.
pub fn default_equality_coefficients(sf: &SpaceForm) -> Vec<Vec<f64>> {
    let n = sf.dim();
    let mut out: Vec<Vec<f64>> = (0..=n).map(|i| sf.basis_element(i)).collect();
    let mut mixed = vec![0.0; n + 1];
    mixed[0] = 3.0;
    mixed[2.min(n)] = 2.0;
    out.push(mixed);
    out
}

/// Restrictions of static potentials, for which the deficit vanishes in the
/// continuum.
pub fn equality_case_suite(geom: &SurfaceGeometry, coefficients: &[Vec<f64>]) -> Result<Vec<TaggedReport>> {
    let form = InequalityForm::space_form_static();
    coefficients
        .iter()
        .map(|a| {
            let eta = ScalarField::restrict_potential(geom.mesh(), a)?;
            Ok(TaggedReport {
                expectation: "equality-expected".into(),
                report: evaluate_deficit(geom, &form, &eta)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub count: usize,
    pub degree: u32,
    pub seed: u64,
    /// `c` in the tolerance band `c h (|lap_term| + |ii_term|)`.
    pub tol_factor: f64,
    /// Multiplies every sampled field.
    pub amplitude: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            count: 200,
            degree: 3,
            seed: 42,
            tol_factor: 0.5,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub spec: EnsembleSpec,
    pub h: f64,
    pub n_vertices: usize,
    pub min_deficit: f64,
    pub median_deficit: f64,
    /// Smallest `deficit / tol` over the ensemble; below `-1` flags a
    /// violation.
    pub min_normalized: f64,
    pub positive_fraction: f64,
    /// Indices of fields with `deficit < -tol`.
    pub violations: Vec<usize>,
    pub deficits: Vec<f64>,
}

/// Random polynomial field in the ambient coordinates, restricted to the
/// mesh vertices.
pub fn random_polynomial_field(mesh: &SurfaceMesh, poly: &Polynomial, id: String) -> ScalarField {
    ScalarField::sample(mesh, id, |x| poly.eval(x.coords().as_slice()))
}

/// The polynomials of an ensemble, drawn in order from a single stream.
pub fn ensemble_polynomials(sf: &SpaceForm, spec: &EnsembleSpec) -> Vec<Polynomial> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|_| Polynomial::random(&mut rng, sf.ambient_dim(), spec.degree))
        .collect()
}

/// Deficits of `count` random polynomial fields of degree `<= degree`.
pub fn ensemble_sweep(geom: &SurfaceGeometry, form: &InequalityForm, spec: &EnsembleSpec) -> Result<EnsembleSummary> {
    if spec.count == 0 {
        return Err(Error::Usage("ensemble count must be positive".into()));
    }
    let polys = ensemble_polynomials(geom.space_form(), spec);
    let reports: Vec<DeficitReport> = polys
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let eta =
                random_polynomial_field(geom.mesh(), p, format!("poly:{}#{i}", spec.degree)).scaled(spec.amplitude);
            let mut r = evaluate_deficit(geom, form, &eta)?;
            r.seed = Some(spec.seed);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let h = geom.mesh().scale().h;
    let deficits: Vec<f64> = reports.iter().map(|r| r.deficit).collect();
    let mut violations = Vec::new();
    let mut min_normalized = f64::INFINITY;
    for (i, r) in reports.iter().enumerate() {
        let tol = spec.tol_factor * h * r.terms.lhs_magnitude();
        if r.deficit < -tol {
            violations.push(i);
        }
        if tol > 0.0 {
            min_normalized = min_normalized.min(r.deficit / tol);
        }
    }
    let mut sorted = deficits.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Ok(EnsembleSummary {
        spec: *spec,
        h,
        n_vertices: geom.n_vertices(),
        min_deficit: sorted[0],
        median_deficit: median,
        min_normalized,
        positive_fraction: deficits.iter().filter(|d| **d > 0.0).count() as f64 / deficits.len() as f64,
        violations,
        deficits,
    })
}

/// Fixed fields for the cross check: the restrictions of `x_1` and of the
/// time coordinate, `x_1²`, and one random cubic.
pub fn cross_check_fields(mesh: &SurfaceMesh, seed: u64) -> Result<Vec<ScalarField>> {
    let sf = mesh.space_form();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cubic = Polynomial::random(&mut rng, sf.ambient_dim(), 3);
    Ok(vec![
        ScalarField::restrict_potential(mesh, &sf.basis_element(1))?,
        ScalarField::restrict_potential(mesh, &sf.basis_element(0))?,
        ScalarField::sample(mesh, "x1sq", |x| x.coords()[1].powi(2)),
        random_polynomial_field(mesh, &cubic, format!("poly:3 seed {seed}")),
    ])
}

/// Largest relative disagreement of `lhs` and `rhs` between the sectional
/// variant with `κ` equal to the model curvature and the static variant, on
/// a hyperbolic surface where the two coincide.
pub fn thm4_cross_check(geom: &SurfaceGeometry, fields: &[ScalarField]) -> Result<f64> {
    let sf = geom.space_form();
    if sf.kind() != ModelKind::Hyperbolic {
        return Err(Error::Usage("the cross check needs a hyperbolic model".into()));
    }
    let p = sf.base_point().clone();
    let a = InequalityForm::space_form_static().with_base_point(p.clone());
    let b = InequalityForm::sectional(sf.kappa()).with_base_point(p);
    let rel = |x: f64, y: f64| {
        let m = x.abs().max(y.abs());
        if m == 0.0 {
            0.0
        } else {
            (x - y).abs() / m
        }
    };
    let mut worst: f64 = 0.0;
    for eta in fields {
        let ra = evaluate_deficit(geom, &a, eta)?;
        let rb = evaluate_deficit(geom, &b, eta)?;
        worst = worst.max(rel(ra.lhs, rb.lhs)).max(rel(ra.rhs, rb.rhs));
    }
    Ok(worst)
}
