//! Acceptance criteria. Run with `cargo test --test acceptance`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subgeo::ambient::AmbientKind;
use subgeo::applications::{eigen_bound_check, shrinker_check};
use subgeo::cli::defect_sample;
use subgeo::inequalities::*;
use subgeo::linalg::Vector;
use subgeo::mesh::{generate, GenParams, SimplicialImmersion};
use subgeo::operators::ScalarField;
use subgeo::sharpness::{gradient_check, minimize_quotient, QuotientProblem};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn mesh(name: &str, radius: f64, level: u32) -> SimplicialImmersion {
    generate(name, &GenParams::new(radius, level)).unwrap()
}

fn field(m: &SimplicialImmersion, f: impl Fn(&Vector) -> f64) -> ScalarField {
    ScalarField::from_fn(m, f).unwrap()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() <= limit
}

fn c1_hardy_equality() -> Outcome {
    let start = Instant::now();
    let m = mesh("flat_disk", 1.0, 6);
    let params = HardyParams::new(1.0, 1.0, 2).unwrap();
    let mut worst: f64 = 0.0;
    for f in [|_: &Vector| 1.0, |v: &Vector| 1.0 - v.dot(v)] {
        let r = hardy_report(
            &m,
            &field(&m, f),
            &params,
            m.pole(),
            &ReportOptions::default(),
        )
        .unwrap();
        worst = worst.max((r.lhs - r.rhs).abs() / r.rhs);
    }
    let t = start.elapsed();
    ensure(
        worst <= 1e-3 && within(t, 10.0),
        format!(
            "{} cells, max rel {worst:.2e}, {:.2}s",
            m.num_cells(),
            t.as_secs_f64()
        ),
    )
}

fn c2_validity_sweep() -> Outcome {
    let generators = [
        ("flat_disk", 1.0, 2),
        ("flat_ball_3d", 1.0, 1),
        ("spherical_cap", 2.0, 2),
        ("sphere", 2.0, 1),
        ("annulus", 1.0, 1),
        ("segment", 1.0, 4),
        ("hyperbolic_disk", 1.0, 2),
    ];
    let mut runs = 0;
    let mut failures = Vec::new();
    for (name, radius, level) in generators {
        let m = mesh(name, radius, level);
        let k = m.dim() as f64;
        let psi = field(&m, |v| 1.0 + 0.2 * v[0] - 0.1 * v[1] * v[1]);
        for p in [1.0, 1.5, 2.0, 3.0] {
            for j in 0..8 {
                let gamma = k - 0.25 - 0.375 * j as f64;
                let params = HardyParams::new(p, gamma, m.dim()).unwrap();
                let opts = ReportOptions::default();
                let reports = [
                    hardy_report(&m, &psi, &params, m.pole(), &opts),
                    hardy_carron_report(&m, &psi, &params, m.pole(), &opts),
                    hardy_norm_report(&m, &psi, &params, m.pole(), &opts),
                ];
                for r in reports {
                    runs += 1;
                    match r {
                        Ok(r) if r.verdict == Verdict::Holds => {}
                        Ok(r) => failures.push(format!(
                            "{name} p={p} gamma={gamma} {:?} {:?}",
                            r.theorem, r.verdict
                        )),
                        Err(e) => failures.push(format!("{name} p={p} gamma={gamma}: {e}")),
                    }
                }
            }
        }
    }
    ensure(
        failures.is_empty(),
        format!(
            "{runs} reports, {} not holding {:?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn c3_rellich_constants() -> Outcome {
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for k in 3..=12 {
        for p in [1.1, 1.25, 1.4, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0] {
            if (k as f64) <= 2.0 * p || count >= 50 {
                continue;
            }
            let c = rellich_constants(k, 2.0 * p, p, false).unwrap();
            let s = c.second_form.unwrap();
            worst = worst
                .max((c.a - s.a).abs() / c.a.abs())
                .max((c.b - s.b).abs() / c.b.abs());
            count += 1;
        }
    }
    let spot = rellich_constants(5, 4.0, 2.0, false).unwrap();
    let spot_ok = (spot.e - 2.5).abs() < 1e-14
        && (spot.a - 1.5625).abs() < 1e-14
        && (spot.b - 3.75).abs() < 1e-14;
    ensure(
        count == 50 && worst <= 1e-14 && spot_ok,
        format!(
            "{count} grid points, max rel {worst:.1e}, spot E={} A={} B={}",
            spot.e, spot.a, spot.b
        ),
    )
}

fn c4_rellich_equality() -> Outcome {
    let start = Instant::now();
    let b = mesh("flat_ball_3d", 1.0, 5);
    let psi = field(&b, |v| 1.0 - v.dot(v));
    let r = rellich_report(&b, &psi, 1.0, 2.5, b.pole(), &ReportOptions::default()).unwrap();
    let t = start.elapsed();
    let rel = r.slack / r.rhs;
    ensure(
        b.num_cells() >= 100_000 && rel.abs() <= 5e-3 && within(t, 60.0),
        format!(
            "{} tets, slack/rhs {rel:.2e}, {:.2}s",
            b.num_cells(),
            t.as_secs_f64()
        ),
    )
}

fn c5_blowup_exponent() -> Outcome {
    let disk = mesh("flat_disk", 1.0, 6);
    let ball = mesh("flat_ball_3d", 1.0, 3);
    let mut out = Vec::new();
    let mut ok = true;
    for (m, gamma) in [(&disk, 1.0), (&ball, 2.5), (&disk, 0.5)] {
        let k = m.dim() as f64;
        let e = excision_exponent(m, m.pole(), &field(m, |_| 1.0), gamma, None).unwrap();
        ok &= (e - (k - gamma)).abs() <= 0.1;
        out.push(format!("(k={k},gamma={gamma}) {e:.3}"));
    }
    ensure(ok, out.join(", "))
}

fn c6_shrinker() -> Outcome {
    let m = mesh("sphere", 2.0, 5);
    let r = shrinker_check(&m, 1.0, m.pole()).unwrap();
    ensure(
        r.residual() <= 1e-2
            && (r.sup_r2 - 4.0).abs() <= 4e-2
            && r.bound == 4.0
            && r.conclusion == Some(true),
        format!(
            "residual {:.2e}, sup r^2 {:.5}, bound {}",
            r.residual(),
            r.sup_r2,
            r.bound
        ),
    )
}

fn c7_eigenvalue_bound() -> Outcome {
    let disk = eigen_bound_check(&mesh("flat_disk", 1.0, 7)).unwrap();
    let j01_sq = 5.7832;
    let disk_rel = (disk.lambda1 - j01_sq).abs() / j01_sq;
    let seg = eigen_bound_check(&mesh("segment", 1.0, 7)).unwrap();
    let exact = PI * PI / 4.0;
    let seg_rel = (seg.lambda1 - exact).abs() / exact;
    ensure(
        disk_rel <= 1e-2
            && disk.lambda1 >= disk.bound
            && (disk.bound - 1.0).abs() < 1e-9
            && seg_rel <= 5e-3
            && seg.lambda1 >= seg.bound
            && seg.lambda1 >= 1.0,
        format!(
            "disk {:.4} (rel {disk_rel:.1e}, bound {:.3}), segment {:.4} (rel {seg_rel:.1e}, bound {:.3})",
            disk.lambda1, disk.bound, seg.lambda1, seg.bound
        ),
    )
}

fn c8_non_attainment() -> Outcome {
    let params = HardyParams::new(2.0, 2.0, 3).unwrap();
    let mut values = Vec::new();
    for level in 3..=5 {
        let m = mesh("flat_ball_3d", 1.0, level);
        let r = minimize_quotient(&QuotientProblem::new(&m, params, m.pole()).unwrap()).unwrap();
        values.push(r.value);
    }
    let above = values.iter().all(|&v| v > 0.25);
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0]);
    let small = mesh("flat_ball_3d", 1.0, 2);
    let problem = QuotientProblem::new(&small, params, small.pole()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let psi: Vec<f64> = (0..small.num_vertices())
            .map(|_| rng.gen_range(0.1..1.0))
            .collect();
        worst = worst.max(gradient_check(&problem, &psi).unwrap());
    }
    ensure(
        above && nonincreasing && worst <= 1e-5,
        format!("quotients {values:.4?}, gradient check {worst:.1e}"),
    )
}

fn c9_ambient_comparison() -> Outcome {
    let s = defect_sample(AmbientKind::Hyperbolic, 3, 10_000, 3.0, 9).unwrap();
    let m = mesh("hyperbolic_disk", 1.0, 3);
    let psi = field(&m, |v| 2.0 - v[0]);
    let mut slacks = Vec::new();
    for gamma in [0.5, 1.0] {
        let r = hardy_report(
            &m,
            &psi,
            &HardyParams::new(2.0, gamma, 2).unwrap(),
            m.pole(),
            &ReportOptions::default(),
        )
        .unwrap();
        slacks.push((r.slack, r.verdict));
    }
    ensure(
        s.min_defect >= -1e-10 && slacks.iter().all(|(s, v)| *s > 0.0 && *v == Verdict::Holds),
        format!(
            "min defect {:.2e} over {} samples, slacks {slacks:?}",
            s.min_defect, s.samples
        ),
    )
}

fn c10_determinism() -> Outcome {
    let library = || {
        let m = mesh("spherical_cap", 2.0, 3);
        let psi = field(&m, |v| 1.0 + 0.1 * v[0]);
        let p = HardyParams::new(1.5, 0.5, 2).unwrap();
        hardy_report(&m, &psi, &p, m.pole(), &ReportOptions::default())
            .unwrap()
            .to_json()
    };
    let cli = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_subgeo"))
            .args(args)
            .output()
            .unwrap()
            .stdout
    };
    let verify = [
        "--seed",
        "5",
        "verify",
        "rellich",
        "--mesh",
        "gen:flat_ball_3d,level=2",
        "--psi",
        "radial:1-r^2",
        "--p",
        "1",
        "--gamma",
        "2.5",
    ];
    let defect = ["--seed", "5", "ambient", "defect", "--samples", "2000"];
    let sharp = [
        "sharpness",
        "--mesh",
        "gen:flat_ball_3d,level=2",
        "--p",
        "2",
        "--gamma",
        "2",
    ];
    let same = library() == library()
        && cli(&verify) == cli(&verify)
        && cli(&defect) == cli(&defect)
        && cli(&sharp) == cli(&sharp);
    ensure(
        same,
        "library report, verify, defect and sharpness outputs compared".into(),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("C1 hardy equality p=1", c1_hardy_equality),
        ("C2 hardy validity sweep", c2_validity_sweep),
        ("C3 rellich constants", c3_rellich_constants),
        ("C4 rellich equality p=1", c4_rellich_equality),
        ("C5 blow-up exponent", c5_blowup_exponent),
        ("C6 self-shrinker bound", c6_shrinker),
        ("C7 eigenvalue bound", c7_eigenvalue_bound),
        ("C8 non-attainment p>1", c8_non_attainment),
        ("C9 ambient comparison", c9_ambient_comparison),
        ("C10 determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
