//! The three simply connected space forms in their flat embeddings.
//!
//! Euclidean space is `R^n` itself. Hyperbolic space of curvature `-kappa` is
//! the upper sheet of the hyperboloid `-t^2 + |x|^2 = -1/kappa` in Minkowski
//! space `R^{n,1}`, and the open hemisphere of curvature `+kappa` is
//! `|x|^2 = 1/kappa, x_0 > 0` in `R^{n+1}`. Every quantity here (distances,
//! tangent vectors, potentials and their derivatives) is computed in those
//! flat coordinates; coordinate index 0 is `t` (resp. `x_0`) for the curved
//! models.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for membership of a point in its model.
pub const MODEL_TOLERANCE: f64 = 1e-12;

/// Radii on the hemisphere must stay below `pi/(2 sqrt(kappa))` minus this
/// multiple of `1/sqrt(kappa)`, so that `V = cos(sqrt(kappa) r)` stays positive.
pub const HEMISPHERE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Euclidean,
    Hyperbolic,
    Spherical,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Euclidean => "euclidean",
            ModelKind::Hyperbolic => "hyperbolic",
            ModelKind::Spherical => "spherical",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "flat" => Ok(ModelKind::Euclidean),
            "hyperbolic" => Ok(ModelKind::Hyperbolic),
            "spherical" | "hemisphere" => Ok(ModelKind::Spherical),
            other => Err(Error::Usage(format!("unknown model kind `{other}`"))),
        }
    }
}

/// A point of a model, in flat embedding coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint(pub DVector<f64>);

impl AmbientPoint {
    pub fn from_slice(coords: &[f64]) -> Self {
        AmbientPoint(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Value, gradient and Hessian of a function at a point of a model.
///
/// The gradient is an ambient vector tangent to the model (index raised with
/// the model metric). The Hessian is expressed in the orthonormal tangent
/// frame returned by [`SpaceForm::tangent_basis`] at the same point.
#[derive(Debug, Clone)]
pub struct PotentialJet {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// Metric in the same frame (identity up to rounding).
    pub metric: DMatrix<f64>,
}

/// Residuals of the static equation `-(Δf) g + ∇²f - f Ric = 0` and of its
/// trace `Δf + R/(n-1) f = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StaticResidual {
    pub operator_norm: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceForm {
    kind: ModelKind,
    n: usize,
    kappa: f64,
    base_point: AmbientPoint,
}

impl SpaceForm {
    pub fn new(kind: ModelKind, kappa: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Usage(format!("dimension {n} is below 2")));
        }
        let kappa = match kind {
            ModelKind::Euclidean => 0.0,
            _ if !(kappa.is_finite() && kappa > 0.0) => {
                return Err(Error::Usage(format!(
                    "curvature magnitude kappa must be positive, got {kappa}"
                )))
            }
            _ => kappa,
        };
        let mut sf = SpaceForm {
            kind,
            n,
            kappa,
            base_point: AmbientPoint(DVector::zeros(0)),
        };
        sf.base_point = sf.center();
        Ok(sf)
    }

    pub fn euclidean() -> Self {
        Self::new(ModelKind::Euclidean, 0.0, 3).expect("valid")
    }

    pub fn hyperbolic(kappa: f64) -> Result<Self> {
        Self::new(ModelKind::Hyperbolic, kappa, 3)
    }

    pub fn spherical(kappa: f64) -> Result<Self> {
        Self::new(ModelKind::Spherical, kappa, 3)
    }

    /// Replaces the base point used for `V` and for radial charts.
    pub fn with_base_point(mut self, p: AmbientPoint) -> Result<Self> {
        self.check_point(&p)?;
        self.base_point = p;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Magnitude of the sectional curvature; zero for Euclidean space.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Signed sectional curvature.
    pub fn k(&self) -> f64 {
        match self.kind {
            ModelKind::Euclidean => 0.0,
            ModelKind::Hyperbolic => -self.kappa,
            ModelKind::Spherical => self.kappa,
        }
    }

    /// Constant scalar curvature `n(n-1)k`.
    pub fn scalar_curvature(&self) -> f64 {
        let n = self.n as f64;
        n * (n - 1.0) * self.k()
    }

    /// Ricci curvature is `ricci_factor() * g`.
    pub fn ricci_factor(&self) -> f64 {
        (self.n as f64 - 1.0) * self.k()
    }

    pub fn base_point(&self) -> &AmbientPoint {
        &self.base_point
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ModelKind::Euclidean => self.n,
            _ => self.n + 1,
        }
    }

    /// The chart center: the origin, the hyperboloid apex, or the pole of the
    /// hemisphere.
    pub fn center(&self) -> AmbientPoint {
        let mut c = DVector::zeros(self.ambient_dim());
        if self.kind != ModelKind::Euclidean {
            c[0] = 1.0 / self.kappa.sqrt();
        }
        AmbientPoint(c)
    }

    /// Flat inner product of the embedding (Minkowski for hyperbolic space).
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self.kind {
            ModelKind::Hyperbolic => a.dot(b) - 2.0 * a[0] * b[0],
            _ => a.dot(b),
        }
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn check_point(&self, x: &AmbientPoint) -> Result<()> {
        let c = x.coords();
        if c.len() != self.ambient_dim() {
            return Err(Error::InvalidPoint(format!(
                "expected {} coordinates, got {}",
                self.ambient_dim(),
                c.len()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        match self.kind {
            ModelKind::Euclidean => Ok(()),
            ModelKind::Hyperbolic => {
                let q = self.inner(c, c);
                let target = -1.0 / self.kappa;
                let scale = c.norm_squared().max(1.0 / self.kappa);
                if (q - target).abs() > MODEL_TOLERANCE * scale {
                    return Err(Error::InvalidPoint(format!(
                        "off the hyperboloid: <x,x> = {q:e}, expected {target:e}"
                    )));
                }
                if c[0] <= 0.0 {
                    return Err(Error::InvalidPoint("on the lower sheet (t <= 0)".into()));
                }
                Ok(())
            }
            ModelKind::Spherical => {
                let q = c.norm_squared();
                let target = 1.0 / self.kappa;
                if (q - target).abs() > MODEL_TOLERANCE * target {
                    return Err(Error::InvalidPoint(format!(
                        "off the sphere: |x|^2 = {q:e}, expected {target:e}"
                    )));
                }
                if c[0] <= 0.0 {
                    return Err(Error::InvalidPoint("outside the open hemisphere (x0 <= 0)".into()));
                }
                Ok(())
            }
        }
    }

    /// Rescales `x` back onto the model after arithmetic drift.
    pub fn project(&self, x: &DVector<f64>) -> AmbientPoint {
        match self.kind {
            ModelKind::Euclidean => AmbientPoint(x.clone()),
            ModelKind::Hyperbolic => {
                let q = self.inner(x, x);
                if q < 0.0 {
                    AmbientPoint(x * (-1.0 / (self.kappa * q)).sqrt())
                } else {
                    // Recompute t from the spatial part.
                    let mut y = x.clone();
                    let s = x.rows(1, self.n).norm_squared();
                    y[0] = (s + 1.0 / self.kappa).sqrt();
                    AmbientPoint(y)
                }
            }
            ModelKind::Spherical => {
                let q = x.norm_squared();
                AmbientPoint(x * (1.0 / (self.kappa * q)).sqrt())
            }
        }
    }

    /// Geodesic distance, evaluated through the chord length for accuracy at
    /// short range. Equivalent to `arccosh(-kappa <x,y>)/sqrt(kappa)` and
    /// `arccos(kappa <x,y>)/sqrt(kappa)`.
    pub fn geodesic_distance(&self, x: &AmbientPoint, y: &AmbientPoint) -> Result<f64> {
        let d = x.coords() - y.coords();
        let q = self.inner(&d, &d);
        match self.kind {
            ModelKind::Euclidean => Ok(q.sqrt()),
            ModelKind::Hyperbolic => {
                let scale = x.coords().norm_squared() + y.coords().norm_squared();
                if q < -1e-10 * scale {
                    return Err(Error::InvalidPoint(format!(
                        "timelike chord (<d,d> = {q:e}); points are not on the hyperboloid"
                    )));
                }
                let s = self.kappa.sqrt();
                Ok(2.0 / s * (0.5 * s * q.max(0.0).sqrt()).asinh())
            }
            ModelKind::Spherical => {
                let s = self.kappa.sqrt();
                let half = 0.5 * s * q.sqrt();
                if half > 1.0 + 1e-10 {
                    return Err(Error::InvalidPoint(format!(
                        "chord longer than the diameter ({:e})",
                        q.sqrt()
                    )));
                }
                Ok(2.0 / s * half.min(1.0).asin())
            }
        }
    }

    /// Projects an ambient vector onto the tangent space of the model at `x`.
    pub fn tangent_project(&self, x: &AmbientPoint, v: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ModelKind::Euclidean => v.clone(),
            _ => {
                let x = x.coords();
                v - x * (self.inner(v, x) / self.inner(x, x))
            }
        }
    }

    /// Orthonormal basis of the tangent space at `x`, obtained by
    /// Gram-Schmidt on the projected ambient coordinate vectors.
    pub fn tangent_basis(&self, x: &AmbientPoint) -> Vec<DVector<f64>> {
        let m = self.ambient_dim();
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(self.n);
        for i in 0..m {
            if basis.len() == self.n {
                break;
            }
            let mut v = self.tangent_project(x, &DVector::from_fn(m, |r, _| (r == i) as u8 as f64));
            for b in &basis {
                v -= b * self.inner(&v, b);
            }
            let nv = self.norm(&v);
            if nv > 1e-8 {
                basis.push(v / nv);
            }
        }
        debug_assert_eq!(basis.len(), self.n);
        basis
    }

    /// Maps frame coordinates at the base point to an ambient tangent vector.
    pub fn direction_at_base(&self, omega: &[f64]) -> DVector<f64> {
        let basis = self.tangent_basis(&self.base_point);
        let mut v = DVector::zeros(self.ambient_dim());
        for (b, w) in basis.iter().zip(omega) {
            v += b * *w;
        }
        v
    }

    /// Largest admissible radius of a radial graph (infinite off the sphere).
    pub fn max_radius(&self) -> f64 {
        match self.kind {
            ModelKind::Spherical => (std::f64::consts::FRAC_PI_2 - HEMISPHERE_MARGIN) / self.kappa.sqrt(),
            _ => f64::INFINITY,
        }
    }

    /// Exponential map at the base point: the point at distance `rho` along
    /// the tangent direction `direction` (normalized here).
    pub fn radial_chart(&self, direction: &DVector<f64>, rho: f64) -> Result<AmbientPoint> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::Domain(format!("radius {rho} is not a nonnegative number")));
        }
        if rho > self.max_radius() {
            return Err(Error::Domain(format!(
                "radius {rho} exceeds the hemisphere margin {:.6}",
                self.max_radius()
            )));
        }
        let p = self.base_point.coords();
        let w = self.tangent_project(&self.base_point, direction);
        let nw = self.norm(&w);
        if nw == 0.0 {
            return Err(Error::Usage("zero direction".into()));
        }
        let w = w / nw;
        let s = self.kappa.sqrt();
        let x = match self.kind {
            ModelKind::Euclidean => p + w * rho,
            ModelKind::Hyperbolic => p * (s * rho).cosh() + w * ((s * rho).sinh() / s),
            ModelKind::Spherical => p * (s * rho).cos() + w * ((s * rho).sin() / s),
        };
        Ok(AmbientPoint(x))
    }

    /// Inverse of [`radial_chart`](Self::radial_chart): unit direction at the
    /// base point and radius. The direction is zero at the base point itself.
    pub fn log_map(&self, x: &AmbientPoint) -> Result<(DVector<f64>, f64)> {
        let rho = self.geodesic_distance(&self.base_point, x)?;
        let p = self.base_point.coords();
        let u = match self.kind {
            ModelKind::Euclidean => x.coords() - p,
            _ => self.tangent_project(&self.base_point, x.coords()),
        };
        let nu = self.norm(&u);
        if nu == 0.0 {
            return Ok((u, rho));
        }
        Ok((u / nu, rho))
    }

    /// Coordinates of an ambient tangent vector at the base point in the base
    /// tangent frame.
    pub fn base_frame_coords(&self, v: &DVector<f64>) -> Vec<f64> {
        self.tangent_basis(&self.base_point)
            .iter()
            .map(|b| self.inner(v, b))
            .collect()
    }

    /// Gradient of the distance to `p` at `x` (`x != p`).
    pub fn distance_gradient(&self, p: &AmbientPoint, x: &AmbientPoint) -> Result<DVector<f64>> {
        let r = self.geodesic_distance(p, x)?;
        if r == 0.0 {
            return Err(Error::Domain("distance gradient is undefined at the base point".into()));
        }
        let s = self.kappa.sqrt();
        Ok(match self.kind {
            ModelKind::Euclidean => (x.coords() - p.coords()) / r,
            // cosh(s r) = -kappa <x,p>  =>  s sinh(s r) grad r = -kappa proj(p)
            ModelKind::Hyperbolic => self.tangent_project(x, p.coords()) * (-self.kappa / (s * (s * r).sinh())),
            // cos(s r) = kappa <x,p>  =>  -s sin(s r) grad r = kappa proj(p)
            ModelKind::Spherical => self.tangent_project(x, p.coords()) * (-self.kappa / (s * (s * r).sin())),
        })
    }

    /// Coefficients `a_0..a_n` of the static potential basis element `i`.
    pub fn basis_element(&self, i: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.n + 1];
        a[i] = 1.0;
        a
    }

    /// Coefficients of the distinguished positive potential `V`, equal to
    /// `1`, `cosh(sqrt(kappa) r)` or `cos(sqrt(kappa) r)` with `r` the distance
    /// to the base point. At the chart center this is `sqrt(kappa) t` (resp.
    /// `sqrt(kappa) x_0`).
    pub fn distinguished_potential(&self) -> Vec<f64> {
        let p = self.base_point.coords();
        match self.kind {
            ModelKind::Euclidean => self.basis_element(0),
            // V = -kappa <x, p>_M = kappa (p_t t - sum p_i x_i)
            ModelKind::Hyperbolic => (0..=self.n)
                .map(|i| if i == 0 { self.kappa * p[0] } else { -self.kappa * p[i] })
                .collect(),
            ModelKind::Spherical => p.iter().map(|c| self.kappa * c).collect(),
        }
    }

    /// Ambient covector of a potential: for curved models the potential is the
    /// linear function `x -> <a, x>` (model inner product), for Euclidean space
    /// it is `a_0 + a_1 x_1 + ... + a_n x_n` and this returns `(a_1..a_n)`.
    fn potential_vector(&self, coeffs: &[f64]) -> Result<DVector<f64>> {
        if coeffs.len() != self.n + 1 {
            return Err(Error::Usage(format!(
                "expected {} potential coefficients, got {}",
                self.n + 1,
                coeffs.len()
            )));
        }
        Ok(match self.kind {
            ModelKind::Euclidean => DVector::from_column_slice(&coeffs[1..]),
            // a_0 t + sum a_i x_i = <(-a_0, a_1, ..), x>_M
            ModelKind::Hyperbolic => {
                let mut a = DVector::from_column_slice(coeffs);
                a[0] = -a[0];
                a
            }
            ModelKind::Spherical => DVector::from_column_slice(coeffs),
        })
    }

    pub fn potential_value(&self, coeffs: &[f64], x: &AmbientPoint) -> Result<f64> {
        let a = self.potential_vector(coeffs)?;
        Ok(match self.kind {
            ModelKind::Euclidean => coeffs[0] + a.dot(x.coords()),
            _ => self.inner(&a, x.coords()),
        })
    }

    /// Value, tangent gradient and model Hessian of a potential.
    ///
    /// The Hessian of a linear function of the embedding is its derivative
    /// along the normal part of `D_X Y`. For the model sitting umbilically in
    /// its flat space that normal part is `kappa <X,Y> x` on the hyperboloid
    /// and `-kappa <X,Y> x` on the sphere, which gives `-k f g`.
    pub fn potential_jet(&self, coeffs: &[f64], x: &AmbientPoint) -> Result<PotentialJet> {
        let a = self.potential_vector(coeffs)?;
        let value = self.potential_value(coeffs, x)?;
        let gradient = self.tangent_project(x, &a);
        let basis = self.tangent_basis(x);
        let metric = DMatrix::from_fn(self.n, self.n, |i, j| self.inner(&basis[i], &basis[j]));
        let hessian = match self.kind {
            ModelKind::Euclidean => DMatrix::zeros(self.n, self.n),
            ModelKind::Hyperbolic => &metric * (self.kappa * self.inner(&a, x.coords())),
            ModelKind::Spherical => &metric * (-self.kappa * self.inner(&a, x.coords())),
        };
        Ok(PotentialJet {
            value,
            gradient,
            hessian,
            metric,
        })
    }

    /// Largest residuals of the static equation and its trace over the
    /// sample points.
    pub fn static_residual(&self, coeffs: &[f64], samples: &[AmbientPoint]) -> Result<StaticResidual> {
        if samples.is_empty() {
            return Err(Error::Usage("static residual needs at least one sample point".into()));
        }
        let ric = self.ricci_factor();
        let n = self.n as f64;
        let mut out = StaticResidual::default();
        for x in samples {
            self.check_point(x)?;
            let jet = self.potential_jet(coeffs, x)?;
            let lap = jet.hessian.trace();
            let op = &jet.hessian - &jet.metric * (lap + jet.value * ric);
            let op = (&op + op.transpose()) * 0.5;
            let norm = SymmetricEigen::new(op)
                .eigenvalues
                .iter()
                .fold(0.0_f64, |m, e| m.max(e.abs()));
            let trace = (lap + self.scalar_curvature() / (n - 1.0) * jet.value).abs();
            out.operator_norm = out.operator_norm.max(norm);
            out.trace = out.trace.max(trace);
        }
        Ok(out)
    }

    /// Random point at distance at most `max_rho` from the base point, with
    /// uniformly distributed direction.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, max_rho: f64) -> AmbientPoint {
        let omega: Vec<f64> = loop {
            let w: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(rng)).collect();
            if w.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
                break w;
            }
        };
        let rho = rng.gen::<f64>() * max_rho.min(self.max_radius());
        self.radial_chart(&self.direction_at_base(&omega), rho)
            .expect("radius within range")
    }
}
