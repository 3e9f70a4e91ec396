use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{Node, Quadrature};

/// Default number of excision radii.
pub const SCHEDULE_POINTS: usize = 6;
/// Largest radius as a fraction of the pole clearance.
pub const SCHEDULE_START: f64 = 0.5;
/// Tolerated shortfall of the fitted tail exponent below `k - gamma`.
pub const EXPONENT_SLACK: f64 = 0.5;

/// Decreasing excision radii.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcisionSchedule {
    radii: Vec<f64>,
}

impl ExcisionSchedule {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.len() < 3 {
            return Err(Error::TooFewSchedulePoints(radii.len()));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidParameter(
                "excision radii must be positive".into(),
            ));
        }
        if radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "excision radii must be strictly decreasing".into(),
            ));
        }
        Ok(Self { radii })
    }

    /// `start * ratio^j` for `j < count`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule ratio {ratio} not in (0, 1)"
            )));
        }
        Self::new((0..count).map(|j| start * ratio.powi(j as i32)).collect())
    }

    /// Halving schedule starting at half the pole clearance; `None` off the mesh.
    pub fn for_quadrature(q: &Quadrature) -> Option<Self> {
        let c = q.clearance()?;
        Self::geometric(SCHEDULE_START * c, 0.5, SCHEDULE_POINTS).ok()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// Result of a radially weighted integral.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RadialIntegral {
    pub value: f64,
    /// Quadrature estimate.
    pub err_quadrature: f64,
    /// Spread of the last two extrapolants.
    pub err_extrapolation: f64,
    /// Fitted decay exponent of the excised tails.
    pub tail_exponent: Option<f64>,
    /// Whether excision and extrapolation were performed.
    pub excised: bool,
    /// Tail fit decays slower than `k - gamma` by more than the tolerated slack.
    pub inconclusive: bool,
}

impl RadialIntegral {
    pub fn err(&self) -> f64 {
        self.err_quadrature + self.err_extrapolation
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            value: c * self.value,
            err_quadrature: c.abs() * self.err_quadrature,
            err_extrapolation: c.abs() * self.err_extrapolation,
            ..self.clone()
        }
    }
}

/// Least-squares slope of `log y` against `log x`; `None` if any `y` is not positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(sxy / sxx)
}

/// Integrates `f(cell, node)`, which carries a pole singularity of order
/// `gamma_weight`, over the cells of `q`'s mesh.
///
/// When the pole lies on the mesh and `gamma_weight > 0` the integral is
/// split at each schedule radius, the outer parts are extrapolated to
/// `r0 -> 0` with rate `k - gamma_weight`, and the tails are fitted.
pub fn integrate_radial<F>(
    q: &Quadrature,
    gamma_weight: f64,
    schedule: Option<&ExcisionSchedule>,
    f: F,
) -> Result<RadialIntegral>
where
    F: Fn(usize, &Node) -> f64 + Sync,
{
    let k = q.mesh().dim() as f64;
    let full = q.cells(gamma_weight, &f)?;
    let default;
    let schedule = match schedule {
        Some(s) => Some(s),
        None => {
            default = ExcisionSchedule::for_quadrature(q);
            default.as_ref()
        }
    };
    let schedule = match schedule {
        Some(s) if q.pole_on_mesh() && gamma_weight > 0.0 => s,
        _ => {
            return Ok(RadialIntegral {
                value: full.value,
                err_quadrature: full.err,
                ..Default::default()
            })
        }
    };
    if gamma_weight >= k {
        return Err(Error::InvalidParameter(format!(
            "weight exponent {gamma_weight} is not integrable at a pole on a {k}-dimensional mesh"
        )));
    }
    if let Some(c) = q.clearance() {
        if schedule.radii()[0] > c {
            return Err(Error::InvalidParameter(format!(
                "largest excision radius {} exceeds the pole clearance {c}",
                schedule.radii()[0]
            )));
        }
    }
    let rate = k - gamma_weight;
    let tails = q.cell_tails(gamma_weight, schedule.radii(), &f)?;
    let outer: Vec<f64> = tails.iter().map(|t| full.value - t.value).collect();
    let radii = schedule.radii();
    let mut extrapolants = Vec::with_capacity(outer.len() - 1);
    for j in 1..outer.len() {
        let ratio = (radii[j] / radii[j - 1]).powf(rate);
        extrapolants.push(outer[j] + (outer[j] - outer[j - 1]) * ratio / (1.0 - ratio));
    }
    let last = extrapolants[extrapolants.len() - 1];
    let prev = extrapolants[extrapolants.len() - 2];
    let tail_abs: Vec<f64> = tails.iter().map(|t| t.value.abs()).collect();
    let negligible = tail_abs
        .iter()
        .all(|t| *t <= 1e-14 * full.value.abs().max(1e-300));
    let tail_exponent = if negligible {
        None
    } else {
        log_log_slope(radii, &tail_abs)
    };
    let inconclusive = matches!(tail_exponent, Some(s) if s < rate - EXPONENT_SLACK);
    let tail_err: f64 = tails.iter().map(|t| t.err).fold(0.0, f64::max);
    Ok(RadialIntegral {
        value: last,
        err_quadrature: full.err + tail_err,
        err_extrapolation: (last - prev).abs(),
        tail_exponent,
        excised: true,
        inconclusive,
    })
}
