use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use staticbound::functional::{ensemble_sweep, evaluate_deficit, EnsembleSpec};
use staticbound::mesh::{gen_ball_volume, gen_radial_surface, parse, write_to_string, MeshFile};
use staticbound::volume_fem::solve_extension;
use staticbound::{FemSystem, InequalityForm, ModelKind, RadialProfile, ScalarField, SpaceForm, SurfaceGeometry};

fn model() -> impl Strategy<Value = SpaceForm> {
    (0..3usize, 0.5..2.0f64).prop_map(|(kind, kappa)| {
        let kind = [ModelKind::Euclidean, ModelKind::Hyperbolic, ModelKind::Spherical][kind];
        SpaceForm::new(kind, kappa, 3).unwrap()
    })
}

/// A mean-convex profile that fits inside the model.
fn surface() -> impl Strategy<Value = (SpaceForm, RadialProfile)> {
    (model(), 0.3..0.8f64, 0.0..0.08f64, 0..3usize).prop_map(|(sf, frac, amplitude, axis)| {
        let radius = match sf.kind() {
            ModelKind::Spherical => frac * sf.max_radius(),
            _ => 2.0 * frac,
        };
        let p = if amplitude < 0.02 {
            RadialProfile::Sphere { radius }
        } else {
            RadialProfile::Perturbed {
                radius,
                amplitude,
                axis,
            }
        };
        (sf, p)
    })
}

fn random_field(n: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::new(
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        format!("random{seed}"),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_annihilates_constants((sf, p) in surface(), c in -5.0..5.0f64) {
        let g = SurfaceGeometry::build(&gen_radial_surface(&sf, p, 2).unwrap()).unwrap();
        let lap = g.laplace_beltrami(&ScalarField::constant(g.n_vertices(), c)).unwrap();
        prop_assert!(lap.values.iter().all(|v| v.abs() <= 1e-9 * (1.0 + c.abs())));
    }

    #[test]
    fn stiffness_is_symmetric_and_galerkin((sf, p) in surface(), seed in any::<u64>()) {
        let g = SurfaceGeometry::build(&gen_radial_surface(&sf, p, 2).unwrap()).unwrap();
        let a = random_field(g.n_vertices(), seed);
        let b = random_field(g.n_vertices(), seed.wrapping_add(1));
        let ab = g.stiffness_form(&a, &b).unwrap();
        let ba = g.stiffness_form(&b, &a).unwrap();
        let gal = g.galerkin_form(&a, &b).unwrap();
        let scale = g.stiffness_form(&a, &a).unwrap().sqrt() * g.stiffness_form(&b, &b).unwrap().sqrt();
        prop_assert!((ab - ba).abs() <= 1e-12 * scale);
        prop_assert!((ab - gal).abs() <= 1e-10 * scale);
        prop_assert!(g.stiffness_form(&a, &a).unwrap() >= -1e-12);
    }

    #[test]
    fn mean_curvature_is_positive_and_areas_sum((sf, p) in surface()) {
        let g = SurfaceGeometry::build(&gen_radial_surface(&sf, p, 2).unwrap()).unwrap();
        prop_assert!(g.min_mean_curvature().1 > 0.0);
        let lumped: f64 = g.vertex_areas().iter().sum();
        prop_assert!((lumped - g.total_area()).abs() <= 1e-12 * g.total_area());
    }

    #[test]
    fn deficit_is_quadratic((sf, p) in surface(), seed in any::<u64>(), alpha in -3.0..3.0f64) {
        let g = SurfaceGeometry::build(&gen_radial_surface(&sf, p, 2).unwrap()).unwrap();
        let form = InequalityForm::space_form_static();
        let eta = random_field(g.n_vertices(), seed);
        let d = evaluate_deficit(&g, &form, &eta).unwrap();
        let ds = evaluate_deficit(&g, &form, &eta.scaled(alpha)).unwrap();
        prop_assert!((ds.deficit - alpha * alpha * d.deficit).abs() <= 1e-10 * alpha * alpha * d.terms.magnitude());
    }

    #[test]
    fn static_restrictions_nearly_attain_equality((sf, p) in surface(), c in prop::array::uniform4(-1.0..1.0f64)) {
        let g = SurfaceGeometry::build(&gen_radial_surface(&sf, p, 3).unwrap()).unwrap();
        let eta = ScalarField::restrict_potential(g.mesh(), &c).unwrap();
        let r = evaluate_deficit(&g, &InequalityForm::space_form_static(), &eta).unwrap();
        prop_assert!(r.relative_deficit() <= 0.01, "relative deficit {}", r.relative_deficit());
    }

    #[test]
    fn surface_mesh_text_round_trips((sf, p) in surface(), level in 0..3usize) {
        let m = MeshFile::Surface(gen_radial_surface(&sf, p, level).unwrap());
        let text = write_to_string(&m);
        prop_assert_eq!(write_to_string(&parse(&text).unwrap()), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn extension_is_linear(seed in any::<u64>(), alpha in -2.0..2.0f64, beta in -2.0..2.0f64, k in -1.0..0.0f64) {
        let sys = FemSystem::assemble(&gen_ball_volume(1.0, 2).unwrap()).unwrap();
        let nb = sys.mesh().boundary_vertices().len();
        let a = random_field(nb, seed);
        let b = random_field(nb, seed ^ 0x5555);
        let combo = ScalarField::new(
            a.values.iter().zip(&b.values).map(|(x, y)| alpha * x + beta * y).collect(),
            "combo",
        );
        let ua = solve_extension(&sys, k, &a).unwrap().u;
        let ub = solve_extension(&sys, k, &b).unwrap().u;
        let uc = solve_extension(&sys, k, &combo).unwrap().u;
        for i in 0..uc.len() {
            prop_assert!((uc.values[i] - alpha * ua.values[i] - beta * ub.values[i]).abs() <= 1e-7);
        }
    }
}

#[test]
fn ensembles_depend_only_on_the_seed() {
    let g = SurfaceGeometry::build(
        &gen_radial_surface(&SpaceForm::euclidean(), RadialProfile::Sphere { radius: 1.0 }, 2).unwrap(),
    )
    .unwrap();
    let form = InequalityForm::space_form_static();
    let spec = EnsembleSpec {
        count: 20,
        ..EnsembleSpec::default()
    };
    let a = ensemble_sweep(&g, &form, &spec).unwrap();
    let b = ensemble_sweep(&g, &form, &spec).unwrap();
    assert_eq!(a.deficits, b.deficits);
    let c = ensemble_sweep(&g, &form, &EnsembleSpec { seed: 43, ..spec }).unwrap();
    assert_ne!(a.deficits, c.deficits);
}
