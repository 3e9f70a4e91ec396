//! Minimum enclosing geodesic balls of finite point sets.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambient::{AmbientKind, AmbientSpace};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mesh::SimplicialImmersion;

/// Certificate tolerance on the enclosing radius.
pub const ENCLOSING_TOL: f64 = 1e-10;

const SHUFFLE_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, Serialize)]
pub struct EnclosingBall {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Vertex indices on the boundary sphere.
    pub support: Vec<usize>,
}

impl EnclosingBall {
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// All points within the tolerance and at least two on the boundary.
    pub fn validate(&self, space: &AmbientSpace, points: &[Vector]) -> bool {
        let center = Vector::from_slice(&self.center);
        let slack = ENCLOSING_TOL * self.radius.max(1.0);
        let inside = points
            .iter()
            .all(|p| space.dist(&center, p) <= self.radius + slack);
        let on = points
            .iter()
            .filter(|p| (space.dist(&center, p) - self.radius).abs() <= slack)
            .count();
        inside && (on >= 2 || points.len() < 2)
    }
}

/// Extrinsic diameter of the vertex set.
pub fn extrinsic_diameter(mesh: &SimplicialImmersion) -> Result<f64> {
    Ok(enclosing_ball(mesh.space(), mesh.vertices())?.diameter())
}

/// Exact minimum enclosing ball by randomized incremental construction.
pub fn enclosing_ball(space: &AmbientSpace, points: &[Vector]) -> Result<EnclosingBall> {
    if points.is_empty() {
        return Err(Error::InvalidMesh("empty point set".into()));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(SHUFFLE_SEED));
    let ctx = Welzl {
        space,
        points,
        max_support: space.dim() + 1,
    };
    let ball = ctx.solve(&order, &mut Vec::new());
    let ball =
        ball.ok_or_else(|| Error::NoConvergence("enclosing ball construction degenerated".into()))?;
    let support = points
        .iter()
        .enumerate()
        .filter(|(_, p)| (space.dist(&ball.0, p) - ball.1).abs() <= ENCLOSING_TOL * ball.1.max(1.0))
        .map(|(i, _)| i)
        .collect();
    Ok(EnclosingBall {
        center: ball.0.as_slice().to_vec(),
        radius: ball.1,
        support,
    })
}

struct Welzl<'a> {
    space: &'a AmbientSpace,
    points: &'a [Vector],
    max_support: usize,
}

impl Welzl<'_> {
    fn contains(&self, ball: &(Vector, f64), p: &Vector) -> bool {
        self.space.dist(&ball.0, p) <= ball.1 + 1e-12 * ball.1.max(1.0)
    }

    /// Smallest ball containing `idx` with `boundary` on its sphere.
    fn solve(&self, idx: &[usize], boundary: &mut Vec<usize>) -> Option<(Vector, f64)> {
        let mut ball = self.circumball(boundary);
        if boundary.len() == self.max_support {
            return ball;
        }
        for (t, &i) in idx.iter().enumerate() {
            let p = &self.points[i];
            if ball.as_ref().is_some_and(|b| self.contains(b, p)) {
                continue;
            }
            boundary.push(i);
            let next = self.solve(&idx[..t], boundary);
            boundary.pop();
            ball = Some(next?);
        }
        ball
    }

    fn circumball(&self, boundary: &[usize]) -> Option<(Vector, f64)> {
        let pts: Vec<Vector> = boundary.iter().map(|&i| self.points[i]).collect();
        let center = match pts.len() {
            0 => return None,
            1 => pts[0],
            _ => circumcenter(self.space, &pts)?,
        };
        let radius = pts
            .iter()
            .map(|p| self.space.dist(&center, p))
            .fold(0.0, f64::max);
        Some((center, radius))
    }
}

/// Center of the smallest sphere through `pts`, lying in their geodesic hull.
pub fn circumcenter(space: &AmbientSpace, pts: &[Vector]) -> Option<Vector> {
    match space.kind() {
        AmbientKind::Euclidean => {
            // c = p0 + sum a_j d_j with 2 <d_i, c - p0> = |d_i|^2.
            let d: Vec<Vector> = pts[1..].iter().map(|p| *p - pts[0]).collect();
            let m = d.len();
            let g = DMatrix::from_fn(m, m, |i, j| 2.0 * d[i].dot(&d[j]));
            let rhs = DVector::from_fn(m, |i, _| d[i].dot(&d[i]));
            let a = solve(g, rhs)?;
            let mut c = pts[0];
            for (j, dj) in d.iter().enumerate() {
                c.axpy(a[j], dj);
            }
            Some(c)
        }
        AmbientKind::Hyperbolic => {
            // Equidistant points have equal <c, p_i>; c lies in span(p_i).
            let m = pts.len();
            let g = DMatrix::from_fn(m, m, |i, j| space.inner(&pts[i], &pts[j]));
            let a = solve(g, DVector::from_element(m, -1.0))?;
            let mut c = Vector::zeros(pts[0].len());
            for (j, p) in pts.iter().enumerate() {
                c.axpy(a[j], p);
            }
            let nsq = -space.norm_sq(&c);
            if nsq <= 0.0 || !nsq.is_finite() {
                return None;
            }
            let c = c * (1.0 / nsq.sqrt());
            Some(if c[0] < 0.0 { -c } else { c })
        }
    }
}

fn solve(g: DMatrix<f64>, rhs: DVector<f64>) -> Option<DVector<f64>> {
    let scale = g.amax().max(f64::MIN_POSITIVE);
    let svd = g.svd(true, true);
    let a = svd.solve(&rhs, 1e-12 * scale).ok()?;
    a.iter().all(|v| v.is_finite()).then_some(a)
}

/// Subgradient descent on `max_i d(c, p_i)` from the centroid projection.
/// Reference solver for the geodesic minimax radius.
pub fn minimax_radius_subgradient(
    space: &AmbientSpace,
    points: &[Vector],
    tol: f64,
    max_iter: usize,
) -> (Vector, f64) {
    let mut mean = Vector::zeros(points[0].len());
    for p in points {
        mean.axpy(1.0 / points.len() as f64, p);
    }
    let mut c = space.project(&mean);
    let f = |c: &Vector| points.iter().map(|p| space.dist(c, p)).fold(0.0, f64::max);
    let mut best = (c, f(&c));
    let mut step = best.1.max(1e-3) * 0.5;
    for _ in 0..max_iter {
        if step < tol {
            break;
        }
        let far = points
            .iter()
            .max_by(|a, b| space.dist(&c, a).total_cmp(&space.dist(&c, b)))
            .expect("nonempty");
        let (_, g) = space.radial(&c, far);
        // Move toward the farthest point along the unit geodesic direction.
        let dir = g * -1.0;
        let trial = space.project(&space.exp_map(&c, &(dir * step)));
        let ft = f(&trial);
        if ft < best.1 {
            best = (trial, ft);
            c = trial;
        } else {
            step *= 0.5;
        }
    }
    best
}
