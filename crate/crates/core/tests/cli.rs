use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn subgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subgeo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn validate(json: &str) -> Value {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../report.schema.json");
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let value: Value = serde_json::from_str(json).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&value)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:?}\n{json}");
    value
}

#[test]
fn verify_equality_case() {
    let o = subgeo(&[
        "verify",
        "hardy",
        "--mesh",
        "gen:flat_disk,R=1,level=5",
        "--psi",
        "radial:1-r^2",
        "--p",
        "1",
        "--gamma",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = validate(&stdout(&o));
    let slack = v["slack"].as_f64().unwrap();
    assert!(slack.abs() <= 1e-3 * v["rhs"].as_f64().unwrap());
    assert_eq!(v["verdict"], "holds");
}

#[test]
fn all_theorems_validate() {
    for (t, mesh, psi, p, g) in [
        (
            "hardy-carron",
            "gen:sphere,R=2,level=2",
            "coord:1+0.1*x",
            "2",
            "1",
        ),
        (
            "hardy-norm",
            "gen:spherical_cap,R=2,level=2",
            "radial:1",
            "1.5",
            "0.5",
        ),
        (
            "rellich",
            "gen:flat_ball_3d,level=2",
            "radial:1-r^2",
            "1",
            "2.5",
        ),
    ] {
        let o = subgeo(&[
            "verify", t, "--mesh", mesh, "--psi", psi, "--p", p, "--gamma", g,
        ]);
        assert_eq!(code(&o), 0, "{t}: {}", String::from_utf8_lossy(&o.stderr));
        let v = validate(&stdout(&o));
        assert_eq!(v["theorem"], t.replace('-', "_"));
    }
}

#[test]
fn constants_spot_value() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("c.json");
    let o = subgeo(&[
        "constants",
        "rellich",
        "--k",
        "5",
        "--gamma",
        "4",
        "--p",
        "2",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "E=2.5 A=1.5625 B=3.75");
    validate(&std::fs::read_to_string(json).unwrap());
}

#[test]
fn errors_exit_one_with_message() {
    let o = subgeo(&[
        "verify",
        "hardy",
        "--mesh",
        "gen:flat_disk,level=2",
        "--psi",
        "radial:1-r^^2",
        "--p",
        "1",
        "--gamma",
        "1",
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("'^'"));
    let o = subgeo(&[
        "verify",
        "hardy",
        "--mesh",
        "missing.msh",
        "--psi",
        "radial:1",
        "--p",
        "1",
        "--gamma",
        "1",
    ]);
    assert_eq!(code(&o), 1);
    let o = subgeo(&[
        "verify",
        "hardy",
        "--mesh",
        "gen:flat_disk,level=2",
        "--psi",
        "radial:r-1",
        "--p",
        "1",
        "--gamma",
        "1",
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid scalar field"));
    let o = subgeo(&[
        "verify",
        "hardy",
        "--mesh",
        "gen:flat_disk,level=2",
        "--psi",
        "radial:1",
        "--p",
        "1",
        "--gamma",
        "3",
    ]);
    assert_eq!(code(&o), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_subgeo"))
        .args([
            "constants",
            "rellich",
            "--k",
            "5",
            "--gamma",
            "4",
            "--p",
            "2",
        ])
        .env("SUBGEO_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn mesh_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("disk.msh");
    let p = path.to_str().unwrap();
    let o = subgeo(&[
        "mesh",
        "gen",
        "--name",
        "flat_disk",
        "--radius",
        "1.0",
        "--level",
        "3",
        "--out",
        p,
    ]);
    assert_eq!(code(&o), 0);
    let from_file = subgeo(&[
        "verify", "hardy", "--mesh", p, "--psi", "radial:1", "--p", "1", "--gamma", "1",
    ]);
    let from_gen = subgeo(&[
        "verify",
        "hardy",
        "--mesh",
        "gen:flat_disk,level=3",
        "--psi",
        "radial:1",
        "--p",
        "1",
        "--gamma",
        "1",
    ]);
    assert_eq!(code(&from_file), 0);
    let (a, b) = (validate(&stdout(&from_file)), validate(&stdout(&from_gen)));
    assert!((a["slack"].as_f64().unwrap() - b["slack"].as_f64().unwrap()).abs() < 1e-12);
    let info = subgeo(&["mesh", "info", "--mesh", p]);
    let v = validate(&stdout(&info));
    assert_eq!(v["cells"], 6 * 64);
    let fine = dir.path().join("fine.msh");
    assert_eq!(
        code(&subgeo(&[
            "mesh",
            "refine",
            "--mesh",
            p,
            "--out",
            fine.to_str().unwrap()
        ])),
        0
    );
    let v = validate(&stdout(&subgeo(&[
        "mesh",
        "info",
        "--mesh",
        fine.to_str().unwrap(),
    ])));
    assert_eq!(v["cells"], 4 * 6 * 64);
}

fn csv_column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(i).unwrap().to_string())
        .collect()
}

#[test]
fn study_columns() {
    let args = |psi: &str, gamma: &str| {
        subgeo(&[
            "study",
            "--mesh",
            "gen:flat_disk,level=3",
            "--psi",
            psi,
            "--p",
            "1",
            "--gamma",
            gamma,
            "--levels",
            "3",
        ])
    };
    let o = args("radial:1", "1");
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    assert!(csv.starts_with(
        "level,h,L1,L2,R1,R2,R3,lhs,rhs,slack,budget,verdict,excision_exponent,slack_order"
    ));
    let e: f64 = csv_column(&csv, "excision_exponent")
        .last()
        .unwrap()
        .parse()
        .unwrap();
    assert!((e - 1.0).abs() < 0.1, "{e}");

    let csv = stdout(&args("radial:1-r^2", "1"));
    let slack: Vec<f64> = csv_column(&csv, "slack")
        .iter()
        .map(|s| s.parse::<f64>().unwrap().abs())
        .collect();
    let rhs: f64 = csv_column(&csv, "rhs").last().unwrap().parse().unwrap();
    assert!(slack.windows(2).all(|w| w[1] < w[0]), "{slack:?}");
    assert!(*slack.last().unwrap() <= 1e-3 * rhs);

    let csv = stdout(&args("radial:1", "0"));
    assert!(csv_column(&csv, "excision_exponent")
        .iter()
        .all(|s| s == "n/a"));
}

#[test]
fn applications_and_exit_codes() {
    let o = subgeo(&[
        "app",
        "shrinker",
        "--mesh",
        "gen:sphere,R=2,level=4",
        "--lambda",
        "1.0",
    ]);
    assert_eq!(code(&o), 0);
    validate(&stdout(&o));
    // The condition fails on the unit sphere, so nothing is concluded.
    let o = subgeo(&[
        "app",
        "shrinker",
        "--mesh",
        "gen:sphere,R=1,level=3",
        "--lambda",
        "1.0",
    ]);
    assert_eq!(code(&o), 2);
    let o = subgeo(&["app", "eigen-bound", "--mesh", "gen:flat_disk,level=4"]);
    assert_eq!(code(&o), 0);
    let v = validate(&stdout(&o));
    assert!(v["margin"].as_f64().unwrap() > 0.0);
    let o = subgeo(&["app", "eigen-bound", "--mesh", "gen:sphere,level=2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sharpness_csv_and_field_export() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("gap.csv");
    let o = subgeo(&[
        "sharpness",
        "--mesh",
        "gen:flat_ball_3d,level=1",
        "--p",
        "2",
        "--gamma",
        "2",
        "--levels",
        "2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    validate(&stdout(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("level,h,min_quotient,gap\n1,"));
    assert_eq!(text.lines().count(), 3);

    let o = subgeo(&[
        "field",
        "--mesh",
        "gen:segment,level=1",
        "--psi",
        "coord:1+x",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "vertex,value\n0,0\n1,1\n2,2\n");
    let o = subgeo(&[
        "field",
        "--mesh",
        "gen:flat_disk,level=3",
        "--psi",
        "coord:x^2+y^2",
        "--kind",
        "laplacian",
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn defect_sampling_is_seeded() {
    let run = |seed: &str| {
        stdout(&subgeo(&[
            "--seed",
            seed,
            "ambient",
            "defect",
            "--samples",
            "500",
        ]))
    };
    let a = run("7");
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
    let v = validate(&a);
    assert!(v["min_defect"].as_f64().unwrap() >= -1e-10);
}
