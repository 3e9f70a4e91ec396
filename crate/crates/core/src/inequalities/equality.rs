use serde::Serialize;

use super::{hardy_report, HardyParams, ReportOptions, TermBreakdown};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mesh::SimplicialImmersion;
use crate::operators::{gradient, ScalarField};

/// Largest spread of boundary distances still treated as a sphere about the pole.
pub const SPHERE_TOL: f64 = 1e-9;

/// Structure of `psi` and the `p = 1` Hardy slack.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualityReport {
    /// `psi` is constant on bands of `r` up to its Lipschitz bound.
    pub radial: bool,
    /// Band means of `psi` do not increase with `r`.
    pub monotone: bool,
    pub band_width: f64,
    /// Largest spread of `psi` within one band.
    pub band_spread: f64,
    /// Largest increase between consecutive band means.
    pub max_increase: f64,
    pub boundary_radius: f64,
    pub slack: f64,
    pub relative_slack: f64,
    pub report: TermBreakdown,
}

/// Checks the `p = 1` Hardy equality structure: the boundary must lie on a
/// sphere about the pole.
pub fn equality_case_p1_hardy(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    gamma: f64,
    xi: &Vector,
    options: &ReportOptions,
) -> Result<EqualityReport> {
    let space = mesh.space();
    let mask = mesh.boundary_vertex_mask();
    let r: Vec<f64> = mesh.vertices().iter().map(|v| space.dist(v, xi)).collect();
    let bdry: Vec<f64> = r
        .iter()
        .zip(&mask)
        .filter(|(_, b)| **b)
        .map(|(r, _)| *r)
        .collect();
    if bdry.is_empty() {
        return Err(Error::EmptyBoundary(
            "the equality check needs a boundary sphere".into(),
        ));
    }
    let rmax = bdry.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rmin = bdry.iter().cloned().fold(f64::INFINITY, f64::min);
    if rmax - rmin > SPHERE_TOL * rmax.max(1.0) {
        return Err(Error::BoundaryNotSpherical(rmax - rmin));
    }
    let values = psi.values();
    let lip = gradient(mesh, values)
        .iter()
        .map(|g| space.norm_sq(g).max(0.0).sqrt())
        .fold(0.0, f64::max);
    let w = mesh.mesh_size();
    let nbands = (rmax / w).ceil() as usize + 1;
    let mut lo = vec![f64::INFINITY; nbands];
    let mut hi = vec![f64::NEG_INFINITY; nbands];
    let mut sum = vec![0.0; nbands];
    let mut count = vec![0usize; nbands];
    for (ri, v) in r.iter().zip(values) {
        let j = ((ri / w) as usize).min(nbands - 1);
        lo[j] = lo[j].min(*v);
        hi[j] = hi[j].max(*v);
        sum[j] += v;
        count[j] += 1;
    }
    let scale = values.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let band_spread = (0..nbands)
        .filter(|&j| count[j] > 0)
        .map(|j| hi[j] - lo[j])
        .fold(0.0, f64::max);
    let means: Vec<f64> = (0..nbands)
        .filter(|&j| count[j] > 0)
        .map(|j| sum[j] / count[j] as f64)
        .collect();
    let max_increase = means
        .windows(2)
        .map(|m| m[1] - m[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let radial = band_spread <= 2.0 * lip * w + 1e-12 * scale;
    let monotone = max_increase <= 1e-12 * scale;
    let params = HardyParams::new(1.0, gamma, mesh.dim())?;
    let report = hardy_report(mesh, psi, &params, xi, options)?;
    let rhs = report.rhs.abs().max(1e-300);
    Ok(EqualityReport {
        radial,
        monotone,
        band_width: w,
        band_spread,
        max_increase: max_increase.max(0.0),
        boundary_radius: rmax,
        slack: report.slack,
        relative_slack: report.slack / rhs,
        report,
    })
}
