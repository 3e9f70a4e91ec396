//! Self-shrinker radius bound and first-eigenvalue lower bound.

mod eigen;
mod enclosing;

pub use eigen::{first_eigenpair, first_eigenvalue, smallest_pair, Eigenpair, EIGEN_RESIDUAL};
pub use enclosing::{
    circumcenter, enclosing_ball, extrinsic_diameter, minimax_radius_subgradient, EnclosingBall,
    ENCLOSING_TOL,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mesh::SimplicialImmersion;
use crate::operators::{split, tangent_basis, MeanCurvatureField};

/// Absolute tolerance on the pointwise shrinker condition.
pub const SHRINKER_TOL: f64 = 1e-2;
/// Margin tolerance of the eigenvalue bound.
pub const EIGEN_BOUND_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct ShrinkerReport {
    pub lambda: f64,
    /// Minimum over vertices of `<H, grad r> + (lambda r / 2) |grad r^perp|^2`.
    pub condition_min: f64,
    pub condition_max: f64,
    pub condition_holds: bool,
    pub sup_r2: f64,
    /// `2k / lambda`.
    pub bound: f64,
    /// Whether `sup r^2 >= bound` was asserted; absent when the condition fails.
    pub conclusion: Option<bool>,
    pub consistent: bool,
}

impl ShrinkerReport {
    /// Largest absolute pointwise residual.
    pub fn residual(&self) -> f64 {
        self.condition_min.abs().max(self.condition_max.abs())
    }
}

/// Pointwise shrinker condition at the vertices of a closed mesh.
pub fn shrinker_check(
    mesh: &SimplicialImmersion,
    lambda: f64,
    xi: &Vector,
) -> Result<ShrinkerReport> {
    if mesh.has_boundary() {
        return Err(Error::NonemptyBoundary(
            "the shrinker bound needs a closed mesh".into(),
        ));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let space = mesh.space();
    let h = MeanCurvatureField::new(mesh, None)?;
    let mut star: Vec<Vec<(usize, usize)>> = vec![Vec::new(); mesh.num_vertices()];
    for (c, cell) in mesh.cells().enumerate() {
        for (slot, &v) in cell.iter().enumerate() {
            star[v].push((c, slot));
        }
    }
    let mut cond_min = f64::INFINITY;
    let mut cond_max = f64::NEG_INFINITY;
    let mut sup_r2: f64 = 0.0;
    for (v, x) in mesh.vertices().iter().enumerate() {
        let (r, grad) = space.radial(x, xi);
        sup_r2 = sup_r2.max(r * r);
        if r <= 1e-12 || star[v].is_empty() {
            continue;
        }
        let mut normal_sq = 0.0;
        let mut hv = Vector::zeros(x.len());
        for &(c, slot) in &star[v] {
            let basis = tangent_basis(mesh, c, x);
            normal_sq += split(space, &basis, &grad).1;
            let mut bary = [0.0; 4];
            bary[slot] = 1.0;
            hv += h.at(mesh, c, &bary, x);
        }
        let s = 1.0 / star[v].len() as f64;
        let value = space.inner(&(hv * s), &grad) + 0.5 * lambda * r * normal_sq * s;
        cond_min = cond_min.min(value);
        cond_max = cond_max.max(value);
    }
    let k = mesh.dim() as f64;
    let bound = 2.0 * k / lambda;
    let condition_holds = cond_min >= -SHRINKER_TOL;
    let conclusion = condition_holds.then_some(sup_r2 >= bound * (1.0 - SHRINKER_TOL));
    Ok(ShrinkerReport {
        lambda,
        condition_min: cond_min,
        condition_max: cond_max,
        condition_holds,
        sup_r2,
        bound,
        conclusion,
        consistent: conclusion.unwrap_or(true),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenReport {
    #[serde(rename = "D")]
    pub diameter: f64,
    #[serde(rename = "supH")]
    pub sup_h: f64,
    /// `(k^2 / D^2)(1 - (D / k) sup |H|)`.
    pub bound: f64,
    pub lambda1: f64,
    pub margin: f64,
    pub residual: f64,
    pub holds: bool,
}

/// Compares the first Dirichlet eigenvalue with the diameter bound.
pub fn eigen_bound_check(mesh: &SimplicialImmersion) -> Result<EigenReport> {
    let pair = first_eigenpair(mesh)?;
    let d = extrinsic_diameter(mesh)?;
    let sup_h = MeanCurvatureField::new(mesh, None)?.sup_norm(mesh);
    let k = mesh.dim() as f64;
    let bound = k * k / (d * d) * (1.0 - d / k * sup_h);
    let margin = pair.lambda - bound;
    Ok(EigenReport {
        diameter: d,
        sup_h,
        bound,
        lambda1: pair.lambda,
        margin,
        residual: pair.residual,
        holds: margin >= -EIGEN_BOUND_TOL,
    })
}
