//! Discrete evaluation of the boundary functional inequality on domains in
//! the simply connected space forms, together with the weighted Reilly
//! identity and the Dirichlet extension that underlie it.
//!
//! The pipeline is: build a [`SpaceForm`], generate a star-shaped
//! [`SurfaceMesh`] over it, assemble a [`SurfaceGeometry`] and evaluate a
//! [`DeficitReport`] for a boundary field. The Euclidean ball path in
//! [`volume_fem`] solves the extension problem and checks the identity by
//! quadrature.

pub mod error;
pub mod field;
pub mod functional;
pub mod linalg;
pub mod mesh;
pub mod spaceform;
pub mod surface_ops;
pub mod volume_fem;

pub use error::{Error, Result};
pub use field::{AnalyticField, ClosedForm, ScalarField};
pub use functional::{DeficitReport, InequalityForm, Variant};
pub use mesh::{MeshScale, RadialProfile, SurfaceMesh, VolumeMesh};
pub use spaceform::{AmbientPoint, ModelKind, SpaceForm};
pub use surface_ops::SurfaceGeometry;
pub use volume_fem::{FemSystem, ReillyReport};
