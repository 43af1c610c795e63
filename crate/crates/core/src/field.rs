//! Per-vertex fields and closed-form Euclidean functions.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::spaceform::AmbientPoint;

/// Real values at the vertices of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    /// Human readable description, carried into reports.
    pub id: String,
}

impl ScalarField {
    pub fn new(values: Vec<f64>, id: impl Into<String>) -> Self {
        ScalarField { values, id: id.into() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        ScalarField::new(vec![c; n], format!("const:{c}"))
    }

    /// Samples `f` at the vertices of a surface.
    pub fn sample(mesh: &SurfaceMesh, id: impl Into<String>, f: impl Fn(&AmbientPoint) -> f64) -> Self {
        ScalarField::new(mesh.vertices().iter().map(f).collect(), id)
    }

    /// Restriction of the static potential with coefficients `a_0..a_n`.
    pub fn restrict_potential(mesh: &SurfaceMesh, coeffs: &[f64]) -> Result<Self> {
        let sf = mesh.space_form();
        let values = mesh
            .vertices()
            .iter()
            .map(|x| sf.potential_value(coeffs, x))
            .collect::<Result<Vec<_>>>()?;
        let id = format!(
            "basis:{}",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        );
        Ok(ScalarField::new(values, id))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarField::new(self.values.iter().map(|v| v * c).collect(), format!("{}*{c}", self.id))
    }

    pub fn shifted(&self, c: f64) -> Self {
        ScalarField::new(self.values.iter().map(|v| v + c).collect(), format!("{}+{c}", self.id))
    }
}

/// Closed-form function on `R^3` with exact derivatives.
pub trait AnalyticField: Send + Sync {
    fn value(&self, x: &Vector3<f64>) -> f64;
    fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64>;
    /// `None` when the supplier does not provide second derivatives.
    fn hessian(&self, x: &Vector3<f64>) -> Option<Matrix3<f64>>;
    fn name(&self) -> String;
}

/// Catalog of closed forms used by the identity checks and the extension
/// solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// `c0 + c . x`
    Affine { c0: f64, c: [f64; 3] },
    /// `x_i^2`, 0-based axis
    CoordinateSquared(usize),
    /// `|x|^2`
    RadiusSquared,
    /// `x_1^2 - (|x|^2 - 1)/3`, the harmonic extension of `x_1^2` from the
    /// unit sphere.
    HarmonicX1Squared,
}

impl ClosedForm {
    pub fn coordinate(i: usize) -> Self {
        let mut c = [0.0; 3];
        c[i] = 1.0;
        ClosedForm::Affine { c0: 0.0, c }
    }

    pub fn constant(c0: f64) -> Self {
        ClosedForm::Affine { c0, c: [0.0; 3] }
    }

    /// Samples the function at the vertices of a Euclidean surface.
    pub fn sample_surface(&self, mesh: &SurfaceMesh) -> ScalarField {
        ScalarField::sample(mesh, self.name(), |p| {
            let c = p.coords();
            self.value(&Vector3::new(c[0], c[1], c[2]))
        })
    }
}

impl AnalyticField for ClosedForm {
    fn value(&self, x: &Vector3<f64>) -> f64 {
        match *self {
            ClosedForm::Affine { c0, c } => c0 + Vector3::from(c).dot(x),
            ClosedForm::CoordinateSquared(i) => x[i] * x[i],
            ClosedForm::RadiusSquared => x.norm_squared(),
            ClosedForm::HarmonicX1Squared => x[0] * x[0] - (x.norm_squared() - 1.0) / 3.0,
        }
    }

    fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match *self {
            ClosedForm::Affine { c, .. } => Vector3::from(c),
            ClosedForm::CoordinateSquared(i) => {
                let mut g = Vector3::zeros();
                g[i] = 2.0 * x[i];
                g
            }
            ClosedForm::RadiusSquared => 2.0 * x,
            ClosedForm::HarmonicX1Squared => {
                let mut g = -2.0 / 3.0 * x;
                g[0] += 2.0 * x[0];
                g
            }
        }
    }

    fn hessian(&self, _x: &Vector3<f64>) -> Option<Matrix3<f64>> {
        Some(match *self {
            ClosedForm::Affine { .. } => Matrix3::zeros(),
            ClosedForm::CoordinateSquared(i) => {
                let mut h = Matrix3::zeros();
                h[(i, i)] = 2.0;
                h
            }
            ClosedForm::RadiusSquared => Matrix3::identity() * 2.0,
            ClosedForm::HarmonicX1Squared => {
                let mut h = Matrix3::identity() * (-2.0 / 3.0);
                h[(0, 0)] += 2.0;
                h
            }
        })
    }

    fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClosedForm::Affine { c0, c } => match (c0, c) {
                (c0, [0.0, 0.0, 0.0]) if c0 == 1.0 => f.write_str("one"),
                (c0, [0.0, 0.0, 0.0]) => write!(f, "const:{c0}"),
                (c0, [1.0, 0.0, 0.0]) if c0 == 0.0 => f.write_str("x1"),
                (c0, [0.0, 1.0, 0.0]) if c0 == 0.0 => f.write_str("x2"),
                (c0, [0.0, 0.0, 1.0]) if c0 == 0.0 => f.write_str("x3"),
                (c0, [0.0, 1.0, 0.0]) if c0 == 2.0 => f.write_str("linx2"),
                (c0, c) => write!(f, "affine:{c0},{},{},{}", c[0], c[1], c[2]),
            },
            ClosedForm::CoordinateSquared(i) => write!(f, "x{}sq", i + 1),
            ClosedForm::RadiusSquared => f.write_str("r2"),
            ClosedForm::HarmonicX1Squared => f.write_str("harmx1sq"),
        }
    }
}

impl FromStr for ClosedForm {
    type Err = Error;

    /// Catalog names: `one`, `const:c`, `x1..x3`, `linx2` (`x_2 + 2`),
    /// `affine:c0,c1,c2,c3`, `x1sq..x3sq`, `r2`, `harmx1sq`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("unknown closed form `{s}`"));
        let nums = |args: &str| -> Result<Vec<f64>> {
            args.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        Ok(match s {
            "one" => ClosedForm::constant(1.0),
            "x1" => ClosedForm::coordinate(0),
            "x2" => ClosedForm::coordinate(1),
            "x3" => ClosedForm::coordinate(2),
            "linx2" => ClosedForm::Affine {
                c0: 2.0,
                c: [0.0, 1.0, 0.0],
            },
            "x1sq" => ClosedForm::CoordinateSquared(0),
            "x2sq" => ClosedForm::CoordinateSquared(1),
            "x3sq" => ClosedForm::CoordinateSquared(2),
            "r2" => ClosedForm::RadiusSquared,
            "harmx1sq" => ClosedForm::HarmonicX1Squared,
            _ => {
                if let Some(a) = s.strip_prefix("const:") {
                    match nums(a)?.as_slice() {
                        [c] => ClosedForm::constant(*c),
                        _ => return Err(bad()),
                    }
                } else if let Some(a) = s.strip_prefix("affine:") {
                    match nums(a)?.as_slice() {
                        [c0, c1, c2, c3] => ClosedForm::Affine {
                            c0: *c0,
                            c: [*c1, *c2, *c3],
                        },
                        _ => return Err(bad()),
                    }
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

/// Largest disagreement between the supplied gradient (and Hessian) and
/// fourth-order central differences of the value (and gradient).
pub fn derivative_consistency(field: &dyn AnalyticField, points: &[Vector3<f64>]) -> f64 {
    let h = 1e-3;
    let fd = |g: &dyn Fn(&Vector3<f64>) -> f64, x: &Vector3<f64>, i: usize| {
        let mut e = Vector3::zeros();
        e[i] = h;
        (-g(&(x + 2.0 * e)) + 8.0 * g(&(x + e)) - 8.0 * g(&(x - e)) + g(&(x - 2.0 * e))) / (12.0 * h)
    };
    let mut worst: f64 = 0.0;
    for x in points {
        let grad = field.gradient(x);
        let hess = field.hessian(x);
        for i in 0..3 {
            worst = worst.max((fd(&|y| field.value(y), x, i) - grad[i]).abs());
            if let Some(hess) = hess {
                for j in 0..3 {
                    let dg = fd(&|y| field.gradient(y)[j], x, i);
                    worst = worst.max((dg - hess[(i, j)]).abs());
                    worst = worst.max((hess[(i, j)] - hess[(j, i)]).abs());
                }
            }
        }
    }
    worst
}

/// Polynomial in ambient coordinates, `sum c * prod x_i^e_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    /// All exponent vectors in `vars` variables of total degree `<= degree`,
    /// in graded lexicographic order.
    pub fn monomials(vars: usize, degree: u32) -> Vec<Vec<u32>> {
        fn rec(prefix: &mut Vec<u32>, vars: usize, left: u32, out: &mut Vec<Vec<u32>>) {
            if prefix.len() == vars {
                out.push(prefix.clone());
                return;
            }
            for e in (0..=left).rev() {
                prefix.push(e);
                rec(prefix, vars, left - e, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        for d in 0..=degree {
            let mut level = Vec::new();
            rec(&mut Vec::new(), vars, d, &mut level);
            out.extend(level.into_iter().filter(|m| m.iter().sum::<u32>() == d));
        }
        out
    }

    /// Standard normal coefficients for every monomial of degree `<= degree`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, vars: usize, degree: u32) -> Self {
        Polynomial {
            terms: Self::monomials(vars, degree)
                .into_iter()
                .map(|m| (m, StandardNormal.sample(rng)))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c * m.iter().zip(x).map(|(e, v)| v.powi(*e as i32)).product::<f64>())
            .sum()
    }
}
