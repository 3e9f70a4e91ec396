use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use subgeo::applications::*;
use subgeo::linalg::Vector;
use subgeo::mesh::{generate, GenParams, SimplicialImmersion};
use subgeo::operators::assemble;

fn mesh(name: &str, r: f64, level: u32) -> SimplicialImmersion {
    generate(name, &GenParams::new(r, level)).unwrap()
}

#[test]
fn shrinker_sphere_cases() {
    let origin = Vector::zeros(3);
    let s2 = shrinker_check(&mesh("sphere", 2.0, 5), 1.0, &origin).unwrap();
    assert!(s2.residual() <= 1e-2, "{s2:?}");
    assert!((s2.sup_r2 - 4.0).abs() <= 0.04);
    assert_eq!(s2.bound, 4.0);
    assert_eq!(s2.conclusion, Some(true));

    // -k/R + lambda R / 2 at R = 3 and R = 1.
    let s3 = shrinker_check(&mesh("sphere", 3.0, 5), 1.0, &origin).unwrap();
    let expect = -2.0 / 3.0 + 1.5;
    assert!((s3.condition_min - expect).abs() <= 1e-2 * expect, "{s3:?}");
    assert!(s3.consistent && (s3.sup_r2 - 9.0).abs() < 1e-9);

    let s1 = shrinker_check(&mesh("sphere", 1.0, 5), 1.0, &origin).unwrap();
    assert!((s1.condition_min + 1.5).abs() <= 1.5e-2, "{s1:?}");
    assert!(!s1.condition_holds && s1.conclusion.is_none() && s1.consistent);

    assert!(shrinker_check(&mesh("flat_disk", 1.0, 2), 1.0, &Vector::zeros(2)).is_err());
}

#[test]
fn diameters() {
    let s = mesh("sphere", 2.0, 3);
    let ball = enclosing_ball(s.space(), s.vertices()).unwrap();
    assert!((ball.diameter() - 4.0).abs() < 1e-9);
    assert!(ball.validate(s.space(), s.vertices()));
    assert!((extrinsic_diameter(&mesh("segment", 1.0, 4)).unwrap() - 2.0).abs() < 1e-12);
    assert!((extrinsic_diameter(&mesh("flat_disk", 1.0, 4)).unwrap() - 2.0).abs() < 1e-12);
    let cap = mesh("spherical_cap", 2.0, 4);
    assert!((extrinsic_diameter(&cap).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn hyperbolic_diameter_matches_subgradient() {
    let m = mesh("hyperbolic_disk", 1.0, 3);
    let ball = enclosing_ball(m.space(), m.vertices()).unwrap();
    assert!(ball.validate(m.space(), m.vertices()));
    // Geodesic disk of radius 1 about the center.
    assert!((ball.radius - 1.0).abs() < 1e-9, "{}", ball.radius);
    let (_, r) = minimax_radius_subgradient(m.space(), m.vertices(), 1e-12, 20_000);
    assert!((r - ball.radius).abs() < 1e-6, "{r} {}", ball.radius);
}

#[test]
fn disk_and_segment_eigenvalues() {
    let j01_sq = 5.783185962946784;
    let l = first_eigenpair(&mesh("flat_disk", 1.0, 5)).unwrap();
    assert!(l.residual <= EIGEN_RESIDUAL);
    assert!((l.lambda - j01_sq).abs() < 1e-2 * j01_sq, "{}", l.lambda);
    assert!(l.vector.iter().all(|&v| v >= -1e-10));
    let s = first_eigenvalue(&mesh("segment", 1.0, 6)).unwrap();
    assert!((s - PI * PI / 4.0).abs() < 5e-3 * PI * PI / 4.0, "{s}");
}

#[test]
fn dense_oracle_on_coarse_mesh() {
    let m = mesh("flat_disk", 1.0, 2);
    let mask = m.boundary_vertex_mask();
    let interior: Vec<usize> = (0..m.num_vertices()).filter(|&i| !mask[i]).collect();
    let ops = assemble(&m);
    let k = ops.stiffness.principal_submatrix(&interior).to_dense();
    let mm = ops.mass.principal_submatrix(&interior).to_dense();
    let l = mm.cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let c = &li * k * li.transpose();
    let dense = SymmetricEigen::new((&c + c.transpose()) * 0.5)
        .eigenvalues
        .min();
    let ours = first_eigenvalue(&m).unwrap();
    assert!((ours - dense).abs() < 1e-9 * dense, "{ours} {dense}");
}

#[test]
fn scaling_and_monotonicity() {
    let m = mesh("flat_disk", 1.0, 4);
    let a = first_eigenvalue(&m).unwrap();
    let b = first_eigenvalue(&m.scaled(2.0).unwrap()).unwrap();
    assert!((b - a / 4.0).abs() < 1e-6 * b);
    let l: Vec<f64> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&r| first_eigenvalue(&mesh("flat_disk", r, 4)).unwrap())
        .collect();
    assert!(l[0] > l[1] && l[1] > l[2]);
    assert!(first_eigenvalue(&mesh("sphere", 1.0, 2)).is_err());
}

#[test]
fn eigen_bounds() {
    let d = eigen_bound_check(&mesh("flat_disk", 1.0, 4)).unwrap();
    assert!((d.bound - 1.0).abs() < 1e-12 && d.margin > 0.0 && d.holds);
    let s = eigen_bound_check(&mesh("segment", 1.0, 5)).unwrap();
    // k = 1, D = 2.
    assert!((s.bound - 0.25).abs() < 1e-12 && s.margin > 0.0 && s.lambda1 > 1.0);
    let caps: Vec<EigenReport> = [3, 4]
        .iter()
        .map(|&l| eigen_bound_check(&mesh("spherical_cap", 2.0, l)).unwrap())
        .collect();
    for c in &caps {
        assert!(c.holds, "{c:?}");
        assert!(
            (c.bound - 4.0 / (c.diameter * c.diameter) * (1.0 - c.diameter / 2.0 * c.sup_h)).abs()
                < 1e-12
        );
    }
    let rel = (caps[0].lambda1 - caps[1].lambda1).abs() / caps[1].lambda1;
    assert!(rel < 2e-2, "{rel}");
}
