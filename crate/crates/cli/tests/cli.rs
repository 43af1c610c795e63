use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use staticbound::mesh::{load, MeshFile};
use staticbound::SpaceForm;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_staticbound"))
        .args(args)
        .current_dir(dir)
        .env_remove("STATICBOUND_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn mesh_command_writes_icosphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "mesh",
            "--kind",
            "euclidean",
            "--profile",
            "sphere:1.0",
            "--level",
            "3",
            "-o",
            "s.mesh",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let MeshFile::Surface(m) = load(dir.path().join("s.mesh")).unwrap() else {
        panic!("expected a surface")
    };
    assert_eq!(m.n_vertices(), 642);
}

#[test]
fn hyperbolic_mesh_sits_on_geodesic_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "mesh",
            "--kind",
            "hyperbolic",
            "--kappa",
            "1",
            "--profile",
            "sphere:0.7",
            "--level",
            "3",
        ],
    );
    assert!(out.status.success());
    let MeshFile::Surface(m) = load(dir.path().join("surface.mesh")).unwrap() else {
        panic!("expected a surface")
    };
    let sf = SpaceForm::hyperbolic(1.0).unwrap();
    for v in m.vertices() {
        assert!((sf.geodesic_distance(sf.base_point(), v).unwrap() - 0.7).abs() < 1e-12);
    }
}

#[test]
fn ball_mesh_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["mesh", "--ball", "--level", "1"]);
    assert!(out.status.success());
    assert!(matches!(
        load(dir.path().join("ball.mesh")).unwrap(),
        MeshFile::Volume(_)
    ));
    let out = run(dir.path(), &["mesh", "--ball", "--kind", "hyperbolic"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hemisphere_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["mesh", "--kind", "spherical", "--kappa", "1", "--profile", "sphere:1.6"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hemisphere"));
}

#[test]
fn equality_case_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["ineq", "--field", "basis:0,1,0,0", "--levels", "3,4,5"]);
    assert!(out.status.success());
    let v = json(&dir.path().join("ineq.json"));
    let rows = v["table"]["rows"].as_array().unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r["error"].as_f64().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    assert!(errs[2] <= 1e-2);
    assert_eq!(v["config"]["field"], "basis:0,1,0,0");
    assert!(dir.path().join("ineq.csv").exists());
}

#[test]
fn ensemble_sweep_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "ineq", "--field", "poly:2", "--seed", "42", "--count", "200", "--levels", "3",
        ],
    );
    assert!(out.status.success());
    let v = json(&dir.path().join("ineq.json"));
    let s = &v["ensembles"][0]["summary"];
    assert_eq!(s["violations"].as_array().unwrap().len(), 0);
    assert_eq!(s["deficits"].as_array().unwrap().len(), 200);
    // random fields without a seed are a configuration error
    let out = run(dir.path(), &["ineq", "--field", "poly:2", "--count", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sectional_variant_on_ellipsoid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "ineq",
            "--variant",
            "thm4",
            "--kappa",
            "1.0",
            "--profile",
            "ellipsoid:1,0.9,0.8",
            "--field",
            "x1",
            "--levels",
            "3",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &json(&dir.path().join("ineq.json"))["reports"][0];
    assert_eq!(r["variant"], "sectional_comparison");
    assert!(r["rhs"].as_f64().unwrap().is_finite());
    assert!(r["terms"]["grad_term"].as_f64().unwrap() > 0.0);
}

#[test]
fn negative_mean_curvature_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "ineq",
            "--profile",
            "perturbed:1,-0.9,3",
            "--field",
            "x1",
            "--levels",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn file_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["ineq", "--mesh", "missing.mesh"]);
    assert_eq!(out.status.code(), Some(4));
    std::fs::write(
        dir.path().join("bad.mesh"),
        "SPACEFORM euclidean 0 3\nBASE 0 0 0\nV 1\n1 2\n",
    )
    .unwrap();
    let out = run(dir.path(), &["ineq", "--mesh", "bad.mesh"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn field_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let values: String = (0..42).map(|i| format!("{}\n", i as f64 * 0.01)).collect();
    std::fs::write(dir.path().join("eta.txt"), values).unwrap();
    let out = run(dir.path(), &["ineq", "--field", "file:eta.txt", "--levels", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(dir.path(), &["ineq", "--field", "file:eta.txt", "--levels", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reilly_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["reilly", "--f", "x1", "--V", "one", "--K", "0", "--levels", "2,3,4"],
    );
    assert!(out.status.success());
    let v = json(&dir.path().join("reilly.json"));
    for r in v["table"]["rows"].as_array().unwrap().iter().skip(1) {
        assert!(r["order"].as_f64().unwrap() >= 1.0);
    }
    assert!(v["reports"][0]["terms"].get("hess_V_term").is_some());
    let out = run(dir.path(), &["reilly", "--f", "x1", "--V", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pde_refuses_positive_k() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["pde", "--eta", "x1", "--k", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["pde", "--eta", "const:1", "--k", "0", "--levels", "2"]);
    assert!(out.status.success());
    let v = json(&dir.path().join("pde.json"));
    assert!(v["levels"][0]["max_error"].as_f64().unwrap() <= 1e-9);
    assert!(dir.path().join("pde.u.txt").exists());
}

#[test]
fn converge_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["converge", "--quantity", "area", "--levels", "2,3,4"]);
    assert!(out.status.success());
    let v = json(&dir.path().join("converge.json"));
    let last = v["table"]["rows"].as_array().unwrap().last().unwrap().clone();
    assert!((last["order"].as_f64().unwrap() - 2.0).abs() < 0.1);
    let out = run(dir.path(), &["converge", "--levels", "3,2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("reports");
    let out = Command::new(env!("CARGO_BIN_EXE_staticbound"))
        .args(["reilly", "--levels", "1"])
        .current_dir(dir.path())
        .env("STATICBOUND_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("reilly.json").exists());
}
