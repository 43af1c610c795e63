//! Acceptance criteria, one test per criterion. Each test prints a single
//! `PASS`/`FAIL` line with the measured values before asserting.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use staticbound::field::ClosedForm;
use staticbound::functional::{cross_check_fields, ensemble_sweep, evaluate_deficit, thm4_cross_check, EnsembleSpec};
use staticbound::mesh::{gen_ball_volume, gen_radial_surface};
use staticbound::volume_fem::{boundary_field, rms_error, solve_extension, verify_reilly};
use staticbound::{FemSystem, InequalityForm, RadialProfile, ScalarField, SpaceForm, SurfaceGeometry};

const EQUALITY_LEVELS: [usize; 3] = [3, 4, 5];
const EQUALITY_FINAL_MAX: f64 = 1e-2;
const MIN_ORDER: f64 = 1.0;
const EQUALITY_CASE_SECONDS: u64 = 60;
/// Relative deficits below this are at the rounding level of the curvature
/// finite differences (second differences with step 1e-4 carry about
/// `eps / 1e-8` relative noise), where an order is not measurable.
const ROUNDOFF_FLOOR: f64 = 1e-8;

const STRICT_LEVEL: usize = 5;
const STRICT_REL_TOL: f64 = 0.01;

const SWEEP_LEVEL: usize = 4;
const SWEEP_COUNT: usize = 200;
const SWEEP_DEGREE: u32 = 3;
const SWEEP_SEED: u64 = 42;
const SWEEP_TOL_FACTOR: f64 = 0.5;
const SWEEP_POSITIVE_FRACTION: f64 = 0.95;
const SWEEP_SECONDS: u64 = 300;

const CROSS_CHECK_MAX: f64 = 1e-12;

const REILLY_LEVELS: [usize; 3] = [2, 3, 4];
const REILLY_LHS_REL_TOL: f64 = 0.02;

const PDE_LEVELS: [usize; 3] = [2, 3, 4];
const PDE_ORDER_RANGE: (f64, f64) = (1.5, 2.5);
const PDE_CONSTANT_TOL: f64 = 1e-9;

const STATIC_SAMPLES: usize = 100;
const STATIC_RESIDUAL_MAX: f64 = 1e-10;

const OPERATOR_LEVEL: usize = 4;
const SPHERE_H_TOL: f64 = 0.015;
const HYPERBOLIC_H_TOL: f64 = 0.02;
const LAPLACIAN_RMS_TOL: f64 = 0.02;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "[criterion {n}] {} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn geometry(sf: &SpaceForm, profile: RadialProfile, level: usize) -> SurfaceGeometry {
    SurfaceGeometry::build(&gen_radial_surface(sf, profile, level).unwrap()).unwrap()
}

#[test]
fn criterion_1_equality_case_convergence() {
    let cases = [
        (
            "euclidean unit sphere, x1",
            SpaceForm::euclidean(),
            1.0,
            vec![0.0, 1.0, 0.0, 0.0],
        ),
        (
            "hyperbolic r0=0.7, x1",
            SpaceForm::hyperbolic(1.0).unwrap(),
            0.7,
            vec![0.0, 1.0, 0.0, 0.0],
        ),
        (
            "spherical r0=0.5, x0",
            SpaceForm::spherical(1.0).unwrap(),
            0.5,
            vec![1.0, 0.0, 0.0, 0.0],
        ),
    ];
    let mut all = true;
    let mut details = Vec::new();
    for (name, sf, r0, coeffs) in cases {
        let start = Instant::now();
        let rel: Vec<f64> = EQUALITY_LEVELS
            .iter()
            .map(|&l| {
                let g = geometry(&sf, RadialProfile::Sphere { radius: r0 }, l);
                let eta = ScalarField::restrict_potential(g.mesh(), &coeffs).unwrap();
                evaluate_deficit(&g, &InequalityForm::space_form_static(), &eta)
                    .unwrap()
                    .relative_deficit()
            })
            .collect();
        let elapsed = start.elapsed();
        let ord = orders(&rel);
        let converging = rel
            .windows(2)
            .zip(&ord)
            .all(|(w, o)| w[0] <= ROUNDOFF_FLOOR || (w[1] < w[0] && *o >= MIN_ORDER));
        let ok = converging
            && rel[rel.len() - 1] <= EQUALITY_FINAL_MAX
            && elapsed <= Duration::from_secs(EQUALITY_CASE_SECONDS);
        all &= ok;
        let floor = if rel.iter().all(|e| *e <= ROUNDOFF_FLOOR) {
            " (at rounding floor)"
        } else {
            ""
        };
        details.push(format!(
            "{name}: rel {:?} orders {:?}{floor} {:.1}s",
            rel.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            ord.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ));
    }
    verdict(1, "equality-case convergence", all, &details.join("; "));
}

/// Continuum deficit of `x_1²` on the unit sphere by midpoint quadrature in
/// the polar angle of the axisymmetric integrand.
fn x1_squared_oracle() -> f64 {
    let n = 40_000;
    let dth = PI / n as f64;
    (0..n)
        .map(|i| {
            let th = (i as f64 + 0.5) * dth;
            let z2 = th.cos().powi(2);
            let integrand = (2.0 - 6.0 * z2).powi(2) / 2.0 - 4.0 * z2 * (1.0 - z2);
            integrand * th.sin() * dth * 2.0 * PI
        })
        .sum()
}

#[test]
fn criterion_2_strict_inequality_target() {
    let target = 64.0 * PI / 15.0;
    let oracle = x1_squared_oracle();
    let g = geometry(
        &SpaceForm::euclidean(),
        RadialProfile::Sphere { radius: 1.0 },
        STRICT_LEVEL,
    );
    let eta = ScalarField::sample(g.mesh(), "x1sq", |x| x.coords()[0].powi(2));
    let d = evaluate_deficit(&g, &InequalityForm::space_form_static(), &eta)
        .unwrap()
        .deficit;
    let rel = (d - target).abs() / target;
    let ok = rel <= STRICT_REL_TOL && (oracle - target).abs() < 1e-6;
    verdict(
        2,
        "strict inequality for x1^2",
        ok,
        &format!("deficit {d:.6} vs 64pi/15 = {target:.6} (quadrature {oracle:.6}), relative error {rel:.2e}"),
    );
}

#[test]
fn criterion_3_nonnegativity_sweep() {
    let surfaces = [
        (SpaceForm::euclidean(), RadialProfile::Sphere { radius: 1.0 }),
        (
            SpaceForm::euclidean(),
            RadialProfile::Ellipsoid { axes: [1.0, 1.0, 0.8] },
        ),
        (
            SpaceForm::euclidean(),
            RadialProfile::Perturbed {
                radius: 1.0,
                amplitude: 0.1,
                axis: 0,
            },
        ),
        (
            SpaceForm::hyperbolic(1.0).unwrap(),
            RadialProfile::Sphere { radius: 0.7 },
        ),
    ];
    let spec = EnsembleSpec {
        count: SWEEP_COUNT,
        degree: SWEEP_DEGREE,
        seed: SWEEP_SEED,
        tol_factor: SWEEP_TOL_FACTOR,
        amplitude: 1.0,
    };
    let start = Instant::now();
    let mut all = true;
    let mut details = Vec::new();
    for (sf, p) in surfaces {
        let g = geometry(&sf, p, SWEEP_LEVEL);
        let min_h = g.min_mean_curvature().1;
        let s = ensemble_sweep(&g, &InequalityForm::space_form_static(), &spec).unwrap();
        let ok = min_h > 0.0 && s.violations.is_empty() && s.positive_fraction >= SWEEP_POSITIVE_FRACTION;
        all &= ok;
        details.push(format!(
            "{} {p}: min H {min_h:.3}, min deficit {:.3e}, min deficit/tol {:.2}, positive {:.3}",
            sf.kind(),
            s.min_deficit,
            s.min_normalized,
            s.positive_fraction
        ));
    }
    let elapsed = start.elapsed();
    all &= elapsed <= Duration::from_secs(SWEEP_SECONDS);
    details.push(format!("{:.1}s", elapsed.as_secs_f64()));
    verdict(3, "nonnegativity sweep", all, &details.join("; "));
}

#[test]
fn criterion_4_sectional_variant_coincidence() {
    let sf = SpaceForm::hyperbolic(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for p in [
        RadialProfile::Sphere { radius: 0.7 },
        RadialProfile::Perturbed {
            radius: 0.7,
            amplitude: 0.1,
            axis: 0,
        },
    ] {
        let g = geometry(&sf, p, 4);
        let fields = cross_check_fields(g.mesh(), 7).unwrap();
        worst = worst.max(thm4_cross_check(&g, &fields).unwrap());
    }
    verdict(
        4,
        "sectional and static variants coincide on H^3",
        worst <= CROSS_CHECK_MAX,
        &format!("max relative discrepancy {worst:.2e}"),
    );
}

#[test]
fn criterion_5_weighted_reilly_identity() {
    let triples = [
        ("f=x1, V=1", ClosedForm::coordinate(0), ClosedForm::constant(1.0)),
        ("f=|x|^2, V=1", ClosedForm::RadiusSquared, ClosedForm::constant(1.0)),
        (
            "f=x1, V=x2+2",
            ClosedForm::coordinate(0),
            ClosedForm::Affine {
                c0: 2.0,
                c: [0.0, 1.0, 0.0],
            },
        ),
    ];
    let mut all = true;
    let mut details = Vec::new();
    for (name, f, v) in triples {
        let reports: Vec<_> = REILLY_LEVELS
            .iter()
            .map(|&l| verify_reilly(&gen_ball_volume(1.0, l).unwrap(), &f, &v, 0.0).unwrap())
            .collect();
        let res: Vec<f64> = reports.iter().map(|r| r.residual.abs()).collect();
        let ord = orders(&res);
        let mut ok = ord.iter().all(|o| *o >= MIN_ORDER);
        let mut extra = String::new();
        if f == ClosedForm::RadiusSquared {
            let lhs = reports.last().unwrap().terms.lhs_vol;
            let rel = (lhs - 32.0 * PI).abs() / (32.0 * PI);
            ok &= rel <= REILLY_LHS_REL_TOL;
            extra = format!(", lhs {lhs:.4} vs 32pi (rel {rel:.2e})");
        }
        all &= ok;
        details.push(format!(
            "{name}: |residual| {:?} orders {:?}{extra}",
            res.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            ord.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>()
        ));
    }
    verdict(5, "weighted Reilly identity", all, &details.join("; "));
}

#[test]
fn criterion_6_extension_solve() {
    let x1 = ClosedForm::coordinate(0);
    let mut errors = Vec::new();
    let mut quad_errors = Vec::new();
    let mut constant_dev: f64 = 0.0;
    for &l in &PDE_LEVELS {
        let sys = FemSystem::assemble(&gen_ball_volume(1.0, l).unwrap()).unwrap();
        let u = solve_extension(&sys, 0.0, &boundary_field(sys.mesh(), &x1)).unwrap().u;
        errors.push(rms_error(&sys, &u, &x1));
        let q = solve_extension(
            &sys,
            0.0,
            &boundary_field(sys.mesh(), &ClosedForm::CoordinateSquared(0)),
        )
        .unwrap()
        .u;
        quad_errors.push(rms_error(&sys, &q, &ClosedForm::HarmonicX1Squared));
        let one = solve_extension(&sys, 0.0, &boundary_field(sys.mesh(), &ClosedForm::constant(1.0)))
            .unwrap()
            .u;
        constant_dev = constant_dev.max(one.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
    }
    let ord = orders(&errors);
    let in_range = ord.iter().all(|o| *o >= PDE_ORDER_RANGE.0 && *o <= PDE_ORDER_RANGE.1);
    let ok = in_range && constant_dev <= PDE_CONSTANT_TOL;
    verdict(
        6,
        "extension solve",
        ok,
        &format!(
            "eta=x1 rms {:?} orders {:?} (required in [{}, {}]); constants max |u-1| {constant_dev:.1e}; \
             informational eta=x1^2 rms {:?} orders {:?}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            ord.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>(),
            PDE_ORDER_RANGE.0,
            PDE_ORDER_RANGE.1,
            quad_errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            orders(&quad_errors)
                .iter()
                .map(|o| format!("{o:.2}"))
                .collect::<Vec<_>>(),
        ),
    );
}

#[test]
fn criterion_7_static_equation_residuals() {
    let models = [
        (SpaceForm::euclidean(), 3.0),
        (SpaceForm::hyperbolic(1.0).unwrap(), 2.0),
        (
            SpaceForm::spherical(1.0).unwrap(),
            SpaceForm::spherical(1.0).unwrap().max_radius(),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for (i, (sf, max_rho)) in models.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let samples: Vec<_> = (0..STATIC_SAMPLES)
            .map(|_| sf.sample_point(&mut rng, *max_rho))
            .collect();
        let mut model_worst: f64 = 0.0;
        for b in 0..=sf.dim() {
            let r = sf.static_residual(&sf.basis_element(b), &samples).unwrap();
            model_worst = model_worst.max(r.operator_norm).max(r.trace);
        }
        worst = worst.max(model_worst);
        details.push(format!("{}: {model_worst:.1e}", sf.kind()));
    }
    verdict(
        7,
        "static equation residuals",
        worst <= STATIC_RESIDUAL_MAX,
        &format!(
            "max residual over basis potentials and {STATIC_SAMPLES} points: {}",
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_8_operator_oracles() {
    let unit = geometry(
        &SpaceForm::euclidean(),
        RadialProfile::Sphere { radius: 1.0 },
        OPERATOR_LEVEL,
    );
    let h_err = unit
        .mean_curvature()
        .iter()
        .map(|h| (h - 2.0).abs() / 2.0)
        .fold(0.0, f64::max);

    let r0: f64 = 0.7;
    let hyp = geometry(
        &SpaceForm::hyperbolic(1.0).unwrap(),
        RadialProfile::Sphere { radius: r0 },
        OPERATOR_LEVEL,
    );
    let target = 2.0 / r0.tanh();
    let hyp_err = hyp
        .mean_curvature()
        .iter()
        .map(|h| (h - target).abs() / target)
        .fold(0.0, f64::max);

    let x1 = ScalarField::sample(unit.mesh(), "x1", |x| x.coords()[0]);
    let lap = unit.laplace_beltrami(&x1).unwrap();
    let num: f64 = lap
        .values
        .iter()
        .zip(&x1.values)
        .map(|(a, b)| (a + 2.0 * b).powi(2))
        .sum();
    let den: f64 = x1.values.iter().map(|b| (2.0 * b).powi(2)).sum();
    let lap_err = (num / den).sqrt();

    let ok = h_err <= SPHERE_H_TOL && hyp_err <= HYPERBOLIC_H_TOL && lap_err <= LAPLACIAN_RMS_TOL;
    verdict(
        8,
        "operator oracles",
        ok,
        &format!(
            "unit sphere max |H-2|/2 {h_err:.2e}; hyperbolic max |H-2coth r0|/(2coth r0) {hyp_err:.2e}; \
             RMS of Laplacian of x1 vs -2x1 {lap_err:.2e}"
        ),
    );
}

fn run_cli(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_staticbound"))
        .args(args)
        .current_dir(dir)
        .env_remove("STATICBOUND_OUT_DIR")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let name = args[args.iter().position(|a| *a == "-o").unwrap() + 1];
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &[
            "ineq",
            "--field",
            "poly:3",
            "--seed",
            "42",
            "--count",
            "50",
            "--levels",
            "3,4",
            "-o",
            "sweep.json",
        ],
        &[
            "ineq",
            "--kind",
            "hyperbolic",
            "--profile",
            "sphere:0.7",
            "--field",
            "basis:0,1,0,0",
            "--levels",
            "3,4",
            "-o",
            "eq.json",
        ],
        &[
            "reilly",
            "--f",
            "x1",
            "--V",
            "linx2",
            "--levels",
            "2,3",
            "-o",
            "reilly.json",
        ],
        &["pde", "--eta", "x1sq", "--levels", "2,3", "-o", "pde.json"],
    ];
    let mut identical = 0;
    for args in runs {
        let a = run_cli(dir.path(), args);
        let b = run_cli(dir.path(), args);
        if a == b {
            identical += 1;
        }
    }
    // the library reports serialize identically too
    let g = geometry(
        &SpaceForm::euclidean(),
        RadialProfile::Ellipsoid { axes: [1.0, 1.0, 0.8] },
        3,
    );
    let spec = EnsembleSpec {
        count: 30,
        ..EnsembleSpec::default()
    };
    let form = InequalityForm::space_form_static();
    let a = serde_json::to_string(&ensemble_sweep(&g, &form, &spec).unwrap()).unwrap();
    let b = serde_json::to_string(&ensemble_sweep(&g, &form, &spec).unwrap()).unwrap();
    let lib_ok = a == b;
    verdict(
        9,
        "determinism",
        identical == runs.len() && lib_ok,
        &format!(
            "{identical}/{} CLI runs byte-identical, library ensemble JSON identical: {lib_ok}",
            runs.len()
        ),
    );
}
