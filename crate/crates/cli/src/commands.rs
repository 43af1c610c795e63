use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::Serialize;

use staticbound::field::{AnalyticField, ClosedForm, Polynomial};
use staticbound::functional::{
    ensemble_polynomials, ensemble_sweep, evaluate_deficit, random_polynomial_field, EnsembleSpec, EnsembleSummary,
};
use staticbound::mesh::{gen_ball_volume, gen_radial_surface, load, save, MeshFile};
use staticbound::volume_fem::{boundary_field, rms_error, solve_extension, verify_reilly};
use staticbound::{
    DeficitReport, Error, FemSystem, InequalityForm, MeshScale, ModelKind, RadialProfile, ReillyReport, ScalarField,
    SpaceForm, SurfaceGeometry, SurfaceMesh, Variant,
};

use crate::args::{check_levels, ConvergeArgs, IneqArgs, MeshArgs, PdeArgs, ReillyArgs};
use crate::table::ConvergenceTable;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Usage(msg.into()).into()
}

/// Writes pretty JSON with a trailing newline, creating parent directories.
fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_outputs(json_path: &Path, value: &impl Serialize, table: &ConvergenceTable) -> Result<()> {
    write_json(json_path, value)?;
    table.write_csv(&json_path.with_extension("csv"))?;
    println!("wrote {}", json_path.display());
    Ok(())
}

/// The three spatial coordinates `x_1..x_3` of a point of any model.
fn spatial(sf: &SpaceForm, coords: &[f64]) -> nalgebra::Vector3<f64> {
    let off = usize::from(sf.kind() != ModelKind::Euclidean);
    nalgebra::Vector3::new(coords[off], coords[off + 1], coords[off + 2])
}

#[derive(Debug, Clone, PartialEq)]
enum FieldSpec {
    Basis(Vec<f64>),
    Coord(usize),
    Poly(u32),
    File(PathBuf),
    Closed(ClosedForm),
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> staticbound::Result<Self> {
        let bad = |why: &str| Error::Usage(format!("field `{s}`: {why}"));
        if let Some(rest) = s.strip_prefix("basis:") {
            let a = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("coefficients must be numbers"))?;
            return Ok(FieldSpec::Basis(a));
        }
        if let Some(rest) = s.strip_prefix("coord:") {
            return rest.parse().map(FieldSpec::Coord).map_err(|_| bad("expected an index"));
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let d: u32 = rest.parse().map_err(|_| bad("expected a degree"))?;
            if d > 3 {
                return Err(bad("degree is limited to 3"));
            }
            return Ok(FieldSpec::Poly(d));
        }
        if let Some(rest) = s.strip_prefix("file:") {
            return Ok(FieldSpec::File(PathBuf::from(rest)));
        }
        s.parse().map(FieldSpec::Closed)
    }
}

impl FieldSpec {
    fn is_equality_case(&self) -> bool {
        matches!(self, FieldSpec::Basis(_))
    }

    fn sample(&self, mesh: &SurfaceMesh, seed: Option<u64>) -> Result<ScalarField> {
        let sf = mesh.space_form();
        Ok(match self {
            FieldSpec::Basis(a) => ScalarField::restrict_potential(mesh, a)?,
            FieldSpec::Coord(i) => {
                if *i >= sf.ambient_dim() {
                    return Err(usage(format!(
                        "coordinate {i} does not exist in the {} model",
                        sf.kind()
                    )));
                }
                ScalarField::sample(mesh, format!("coord:{i}"), |x| x.coords()[*i])
            }
            FieldSpec::Poly(d) => {
                let seed = seed.ok_or_else(|| usage("random fields need --seed"))?;
                let spec = EnsembleSpec {
                    count: 1,
                    degree: *d,
                    seed,
                    ..EnsembleSpec::default()
                };
                let p: Polynomial = ensemble_polynomials(sf, &spec).remove(0);
                random_polynomial_field(mesh, &p, format!("poly:{d}#0"))
            }
            FieldSpec::File(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let values = text
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Parse {
                        line: 0,
                        message: format!("{}: {e}", path.display()),
                    })?;
                if values.len() != mesh.n_vertices() {
                    return Err(usage(format!(
                        "{} has {} values but the mesh has {} vertices",
                        path.display(),
                        values.len(),
                        mesh.n_vertices()
                    )));
                }
                ScalarField::new(values, format!("file:{}", path.display()))
            }
            FieldSpec::Closed(c) => {
                ScalarField::sample(mesh, c.name(), |x| c.value(&spatial(sf, x.coords().as_slice())))
            }
        })
    }
}

pub fn mesh(args: &MeshArgs) -> Result<()> {
    let sf = args.model.space_form()?;
    let (file, scale, default_name) = if args.ball {
        let radius = match (sf.kind(), args.profile) {
            (ModelKind::Euclidean, RadialProfile::Sphere { radius }) => radius,
            _ => return Err(usage("ball meshes need --kind euclidean and a sphere profile")),
        };
        let vol = gen_ball_volume(radius, args.level)?;
        let scale = vol.scale();
        (MeshFile::Volume(vol), scale, "ball.mesh")
    } else {
        let m = gen_radial_surface(&sf, args.profile, args.level)?;
        let scale = m.scale();
        (MeshFile::Surface(m), scale, "surface.mesh")
    };
    let path = args.out.path(default_name);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    save(&path, &file)?;
    println!("{}", serde_json::to_string(&scale)?);
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct LevelEnsemble {
    level: Option<usize>,
    summary: EnsembleSummary,
}

#[derive(Serialize)]
struct IneqOutput<'a> {
    command: &'static str,
    config: &'a IneqArgs,
    reports: Vec<DeficitReport>,
    ensembles: Vec<LevelEnsemble>,
    table: ConvergenceTable,
}

fn inequality_form(args: &IneqArgs) -> Result<InequalityForm> {
    Ok(match args.variant.parse::<Variant>()? {
        Variant::SpaceFormStatic => match args.k {
            Some(k) => InequalityForm::general_k(k),
            None => InequalityForm::space_form_static(),
        },
        Variant::SectionalComparison => InequalityForm::sectional(args.thm4_kappa.unwrap_or(args.model.kappa)),
    })
}

pub fn ineq(args: &IneqArgs) -> Result<()> {
    let field: FieldSpec = args.field.parse()?;
    let form = inequality_form(args)?;
    let ensemble = matches!(field, FieldSpec::Poly(_)) && args.count > 1;
    if matches!(field, FieldSpec::Poly(_)) && args.seed.is_none() {
        return Err(usage("random fields need --seed"));
    }
    if args.count == 0 {
        return Err(usage("--count must be positive"));
    }

    let meshes: Vec<(Option<usize>, SurfaceMesh)> = match &args.mesh {
        Some(path) => {
            let m = match load(path).with_context(|| format!("reading {}", path.display()))? {
                MeshFile::Surface(m) => m,
                MeshFile::Volume(v) => v.boundary().clone(),
            };
            vec![(m.level(), m)]
        }
        None => {
            check_levels(&args.levels)?;
            let sf = args.model.space_form()?;
            args.levels
                .iter()
                .map(|&l| Ok((Some(l), gen_radial_surface(&sf, args.profile, l)?)))
                .collect::<staticbound::Result<_>>()?
        }
    };

    let mut out = IneqOutput {
        command: "ineq",
        config: args,
        reports: Vec::new(),
        ensembles: Vec::new(),
        table: ConvergenceTable::default(),
    };
    for (level, mesh) in &meshes {
        let geom = SurfaceGeometry::build(mesh)?;
        let lvl = level.unwrap_or(0);
        if ensemble {
            let FieldSpec::Poly(degree) = field else { unreachable!() };
            let spec = EnsembleSpec {
                count: args.count,
                degree,
                seed: args.seed.unwrap_or_default(),
                tol_factor: args.tol_factor,
                amplitude: 1.0,
            };
            let summary = ensemble_sweep(&geom, &form, &spec)?;
            println!(
                "level {lvl}: h = {:.4e}, min deficit = {:.6e}, median = {:.6e}, positive = {:.3}, violations = {}",
                summary.h,
                summary.min_deficit,
                summary.median_deficit,
                summary.positive_fraction,
                summary.violations.len()
            );
            out.table.push(lvl, summary.h, "min_deficit", summary.min_deficit, None);
            out.ensembles.push(LevelEnsemble { level: *level, summary });
        } else {
            let eta = field.sample(mesh, args.seed)?;
            let mut report = evaluate_deficit(&geom, &form, &eta)?;
            report.seed = args.seed;
            let error = match args.target {
                Some(t) if t != 0.0 => Some((report.deficit - t).abs() / t.abs()),
                Some(_) => Some(report.relative_deficit()),
                None if field.is_equality_case() => Some(report.relative_deficit()),
                None => None,
            };
            println!(
                "level {lvl}: h = {:.4e}, lhs = {:.10e}, rhs = {:.10e}, deficit = {:.6e}, relative = {:.3e}",
                report.h,
                report.lhs,
                report.rhs,
                report.deficit,
                report.relative_deficit()
            );
            out.table.push(lvl, report.h, "deficit", report.deficit, error);
            out.reports.push(report);
        }
    }
    write_outputs(&args.out.path("ineq.json"), &out, &out.table)
}

#[derive(Serialize)]
struct ReillyOutput<'a> {
    command: &'static str,
    config: &'a ReillyArgs,
    reports: Vec<ReillyReport>,
    table: ConvergenceTable,
}

pub fn reilly(args: &ReillyArgs) -> Result<()> {
    check_levels(&args.levels)?;
    let f: ClosedForm = args.f.parse()?;
    let v: ClosedForm = args.v.parse()?;
    let mut out = ReillyOutput {
        command: "reilly",
        config: args,
        reports: Vec::new(),
        table: ConvergenceTable::default(),
    };
    for &l in &args.levels {
        let vol = gen_ball_volume(args.radius, l)?;
        let r = verify_reilly(&vol, &f, &v, args.big_k)?;
        println!(
            "level {l}: h = {:.4e}, lhs = {:.10e}, rhs = {:.10e}, residual = {:.6e}",
            r.h,
            r.terms.lhs_vol,
            r.terms.rhs(),
            r.residual
        );
        out.table.push(l, r.h, "residual", r.residual, Some(r.residual.abs()));
        out.reports.push(r);
    }
    write_outputs(&args.out.path("reilly.json"), &out, &out.table)
}

#[derive(Serialize)]
struct PdeLevel {
    level: usize,
    h: f64,
    n_vertices: usize,
    iterations: usize,
    relative_residual: f64,
    rms_error: Option<f64>,
    max_error: Option<f64>,
}

#[derive(Serialize)]
struct PdeOutput<'a> {
    command: &'static str,
    config: &'a PdeArgs,
    exact: Option<String>,
    levels: Vec<PdeLevel>,
    solution_file: String,
    table: ConvergenceTable,
}

fn inferred_exact(eta: ClosedForm, k: f64) -> Option<ClosedForm> {
    if k != 0.0 {
        return None;
    }
    match eta {
        ClosedForm::Affine { .. } | ClosedForm::HarmonicX1Squared => Some(eta),
        ClosedForm::CoordinateSquared(0) => Some(ClosedForm::HarmonicX1Squared),
        _ => None,
    }
}

pub fn pde(args: &PdeArgs) -> Result<()> {
    check_levels(&args.levels)?;
    let eta: ClosedForm = args.eta.parse()?;
    if args.k > 0.0 {
        return Err(Error::Domain(format!(
            "k = {} > 0 is refused: the extension problem can be resonant for positive k",
            args.k
        ))
        .into());
    }
    let exact = match &args.exact {
        Some(name) => Some(name.parse::<ClosedForm>()?),
        None => inferred_exact(eta, args.k),
    };
    let solution_path = args.out.path("pde.json").with_extension("u.txt");
    let mut out = PdeOutput {
        command: "pde",
        config: args,
        exact: exact.map(|e| e.name()),
        levels: Vec::new(),
        solution_file: solution_path.display().to_string(),
        table: ConvergenceTable::default(),
    };
    let mut last = None;
    for &l in &args.levels {
        let sys = FemSystem::assemble(&gen_ball_volume(1.0, l)?)?;
        let ext = solve_extension(&sys, args.k, &boundary_field(sys.mesh(), &eta))?;
        let scale: MeshScale = sys.mesh().scale();
        let rms = exact.map(|e| rms_error(&sys, &ext.u, &e));
        let max = exact.map(|e| {
            sys.mesh()
                .vertices()
                .iter()
                .zip(&ext.u.values)
                .map(|(x, u)| (u - e.value(x)).abs())
                .fold(0.0, f64::max)
        });
        println!(
            "level {l}: h = {:.4e}, cg iterations = {}, rms error = {}",
            scale.h,
            ext.stats.iterations,
            rms.map_or("n/a".into(), |r| format!("{r:.6e}"))
        );
        out.table.push(l, scale.h, "rms_error", rms.unwrap_or(f64::NAN), rms);
        out.levels.push(PdeLevel {
            level: l,
            h: scale.h,
            n_vertices: scale.n_vertices,
            iterations: ext.stats.iterations,
            relative_residual: ext.stats.relative_residual,
            rms_error: rms,
            max_error: max,
        });
        last = Some((sys, ext.u));
    }
    if let Some((sys, u)) = last {
        let mut text = String::new();
        for (x, v) in sys.mesh().vertices().iter().zip(&u.values) {
            let _ = writeln!(text, "{:.16e} {:.16e} {:.16e} {:.16e}", x[0], x[1], x[2], v);
        }
        if let Some(dir) = solution_path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&solution_path, text)?;
    }
    write_outputs(&args.out.path("pde.json"), &out, &out.table)
}

#[derive(Serialize)]
struct ConvergeOutput<'a> {
    command: &'static str,
    config: &'a ConvergeArgs,
    target: f64,
    table: ConvergenceTable,
}

/// Intrinsic radius of the geodesic sphere of radius `r`.
fn intrinsic_radius(sf: &SpaceForm, r: f64) -> f64 {
    let s = sf.kappa().sqrt();
    match sf.kind() {
        ModelKind::Euclidean => r,
        ModelKind::Hyperbolic => (s * r).sinh() / s,
        ModelKind::Spherical => (s * r).sin() / s,
    }
}

fn mean_curvature_target(sf: &SpaceForm, r: f64) -> f64 {
    let s = sf.kappa().sqrt();
    match sf.kind() {
        ModelKind::Euclidean => 2.0 / r,
        ModelKind::Hyperbolic => 2.0 * s / (s * r).tanh(),
        ModelKind::Spherical => 2.0 * s / (s * r).tan(),
    }
}

pub fn converge(args: &ConvergeArgs) -> Result<()> {
    check_levels(&args.levels)?;
    let sf = args.model.space_form()?;
    let r = args.radius;
    let big_r = intrinsic_radius(&sf, r);
    let target = match args.quantity.as_str() {
        "area" => 4.0 * std::f64::consts::PI * big_r * big_r,
        "mean-curvature" => mean_curvature_target(&sf, r),
        "laplacian" => -2.0 / (big_r * big_r),
        "deficit-x1sq" => {
            if sf.kind() != ModelKind::Euclidean || r != 1.0 {
                return Err(usage("deficit-x1sq is defined on the Euclidean unit sphere"));
            }
            64.0 * std::f64::consts::PI / 15.0
        }
        other => return Err(usage(format!("unknown quantity `{other}`"))),
    };
    let e1 = sf.tangent_basis(sf.base_point()).remove(0);
    let mut table = ConvergenceTable::default();
    for &l in &args.levels {
        let mesh = gen_radial_surface(&sf, RadialProfile::Sphere { radius: r }, l)?;
        let geom = SurfaceGeometry::build(&mesh)?;
        let h = mesh.scale().h;
        let (value, error) = match args.quantity.as_str() {
            "area" => {
                let a = geom.total_area();
                (a, (a - target).abs() / target)
            }
            "mean-curvature" => {
                let worst = geom
                    .mean_curvature()
                    .iter()
                    .map(|hv| (hv - target).abs() / target)
                    .fold(0.0, f64::max);
                (geom.min_mean_curvature().1, worst)
            }
            "laplacian" => {
                let base = sf.base_point().coords().clone();
                let x1 = ScalarField::sample(&mesh, "e1 coordinate", |x| match sf.kind() {
                    ModelKind::Euclidean => sf.inner(&(x.coords() - &base), &e1),
                    _ => sf.inner(x.coords(), &e1),
                });
                let lap = geom.laplace_beltrami(&x1)?;
                let num: f64 = lap
                    .values
                    .iter()
                    .zip(&x1.values)
                    .map(|(a, b)| (a - target * b).powi(2))
                    .sum();
                let den: f64 = x1.values.iter().map(|b| (target * b).powi(2)).sum();
                let rel = (num / den).sqrt();
                (rel, rel)
            }
            _ => {
                let eta = ScalarField::sample(&mesh, "x1sq", |x| x.coords()[0].powi(2));
                let d = evaluate_deficit(&geom, &InequalityForm::space_form_static(), &eta)?.deficit;
                (d, (d - target).abs() / target)
            }
        };
        println!(
            "level {l}: h = {h:.4e}, {} = {value:.10e}, error = {error:.3e}",
            args.quantity
        );
        table.push(l, h, &args.quantity, value, Some(error));
    }
    let out = ConvergeOutput {
        command: "converge",
        config: args,
        target,
        table,
    };
    write_outputs(&args.out.path("converge.json"), &out, &out.table)
}
