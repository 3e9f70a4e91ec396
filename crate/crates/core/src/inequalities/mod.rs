//! Hardy and Rellich inequalities evaluated term by term on an immersion.

mod equality;
mod hardy;
mod params;
mod radial;
mod rellich;
mod report;

pub use equality::{equality_case_p1_hardy, EqualityReport};
pub use hardy::{excision_exponent, hardy_carron_report, hardy_norm_report, hardy_report};
pub use params::{
    rellich_constants, HardyParams, RellichConstants, RellichParams, SecondForm, SECOND_FORM_TOL,
};
pub use radial::{
    integrate_radial, log_log_slope, ExcisionSchedule, RadialIntegral, EXPONENT_SLACK,
    SCHEDULE_POINTS, SCHEDULE_START,
};
pub use rellich::{rellich_report, LaplacianMode};
pub use report::{
    verdict, Budget, Excision, ReportParams, Term, TermBreakdown, Theorem, Verdict, TOL_REPORT,
};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mesh::{prolong, refine_with_map, MeanCurvature, SimplicialImmersion, Surface};
use crate::operators::{
    cell_gradient, phi_at, MeanCurvatureField, PhiValue, RadialSample, ScalarField, TangentFrames,
};
use crate::quadrature::{Node, Quadrature};

/// Refinement-based discretization estimate: `SAFETY * |slack_h - slack_{h/2}| / (1 - 1/4)`.
pub const DISCRETIZATION_SAFETY: f64 = 2.0;

/// How the discretization part of the error budget is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BudgetMode {
    /// Refinement comparison on curved meshes only.
    #[default]
    Auto,
    /// Always compare with one uniform refinement.
    Refine,
    /// Quadrature and extrapolation only.
    Off,
}

/// Options shared by all reports.
#[derive(Clone, Debug, Default)]
pub struct ReportOptions {
    pub schedule: Option<ExcisionSchedule>,
    pub budget: BudgetMode,
    pub laplacian: LaplacianMode,
}

impl ReportOptions {
    fn without_budget_keep_schedule(&self) -> Self {
        Self {
            schedule: self.schedule.clone(),
            budget: BudgetMode::Off,
            laplacian: self.laplacian,
        }
    }

    /// For a different mesh the schedule is rederived from its clearance.
    fn without_budget(&self) -> Self {
        Self {
            schedule: None,
            budget: BudgetMode::Off,
            laplacian: self.laplacian,
        }
    }
}

/// True when the piecewise-flat mesh only approximates the immersion, so
/// discrete terms carry a geometric discretization error.
pub fn is_curved(mesh: &SimplicialImmersion) -> bool {
    !mesh.space().is_flat()
        || matches!(mesh.surface(), Surface::Sphere { .. })
        || match mesh.mean_curvature_source() {
            MeanCurvature::Sphere { .. } => true,
            MeanCurvature::Discrete => mesh.dim() < mesh.space().dim(),
            _ => false,
        }
}

/// Evaluates `report` on `mesh` and on its uniform refinement and records the
/// difference of slacks as the discretization budget.
pub(crate) fn with_refinement_budget<F>(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    xi: &Vector,
    options: &ReportOptions,
    report: F,
) -> Result<TermBreakdown>
where
    F: Fn(&SimplicialImmersion, &ScalarField, &Vector, &ReportOptions) -> Result<TermBreakdown>,
{
    let base = report(mesh, psi, xi, &options.without_budget_keep_schedule())?;
    let refine = match options.budget {
        BudgetMode::Off => false,
        BudgetMode::Refine => true,
        BudgetMode::Auto => is_curved(mesh),
    };
    if !refine {
        return Ok(base);
    }
    let (fine, edges) = refine_with_map(mesh)?;
    let fine_psi = ScalarField::new(&fine, prolong(psi.values(), &edges))?;
    let finer = report(&fine, &fine_psi, xi, &options.without_budget())?;
    let d = DISCRETIZATION_SAFETY * (base.slack - finer.slack).abs() / (1.0 - 0.25);
    let total = base.budget.discretization + d;
    Ok(base.with_discretization(total))
}

/// Pointwise data shared by the term integrands.
pub(crate) struct Context<'m> {
    pub mesh: &'m SimplicialImmersion,
    pub psi: &'m [f64],
    pub grads: Vec<Vector>,
    pub q: Quadrature<'m>,
    pub h: Option<MeanCurvatureField>,
    pub schedule: Option<ExcisionSchedule>,
    pub frames: TangentFrames,
    conormals: Option<Vec<Vector>>,
}

impl<'m> Context<'m> {
    pub fn new(
        mesh: &'m SimplicialImmersion,
        psi: &'m ScalarField,
        xi: &Vector,
        options: &ReportOptions,
        need_h: bool,
    ) -> Result<Self> {
        if psi.values().len() != mesh.num_vertices() {
            return Err(Error::InvalidField("field does not match the mesh".into()));
        }
        let space = mesh.space();
        if xi.len() != space.coord_len() {
            return Err(Error::DimensionMismatch {
                expected: space.coord_len(),
                got: xi.len(),
            });
        }
        let values = psi.values();
        let grads = (0..mesh.num_cells())
            .map(|c| cell_gradient(mesh, c, values))
            .collect();
        let q = Quadrature::with_pole(mesh, xi);
        let h = if need_h {
            Some(MeanCurvatureField::new(mesh, None)?)
        } else {
            None
        };
        let schedule = match &options.schedule {
            Some(s) => Some(s.clone()),
            None => ExcisionSchedule::for_quadrature(&q),
        };
        let conormals = space.is_flat().then(|| {
            (0..mesh.boundary_facets().len())
                .map(|f| mesh.conormal_at(f, &mesh.facet_center(f)))
                .collect()
        });
        Ok(Self {
            mesh,
            psi: values,
            grads,
            q,
            h,
            schedule,
            frames: TangentFrames::new(mesh),
            conormals,
        })
    }

    pub fn k(&self) -> usize {
        self.mesh.dim()
    }

    pub fn params(&self, p: f64, gamma: f64) -> ReportParams {
        ReportParams {
            k: self.k(),
            p,
            gamma,
            xi: self.q.pole().as_slice().to_vec(),
            ambient: self.mesh.space().kind().to_string(),
        }
    }

    #[inline]
    pub fn psi_cell(&self, c: usize, bary: &[f64; 4]) -> f64 {
        self.mesh
            .cell(c)
            .iter()
            .zip(bary)
            .map(|(&v, b)| b * self.psi[v])
            .sum::<f64>()
            .max(0.0)
    }

    #[inline]
    pub fn psi_facet(&self, f: usize, bary: &[f64; 4]) -> f64 {
        self.mesh.boundary_facets()[f]
            .vertices()
            .iter()
            .zip(bary)
            .map(|(&v, b)| b * self.psi[v])
            .sum::<f64>()
            .max(0.0)
    }

    /// `|grad psi|` in cell `c`.
    #[inline]
    pub fn grad_norm(&self, c: usize) -> f64 {
        self.mesh.space().norm_sq(&self.grads[c]).max(0.0).sqrt()
    }

    #[inline]
    pub fn sample(&self, c: usize, node: &Node) -> RadialSample {
        self.frames.sample(self.mesh, c, node)
    }

    #[inline]
    pub fn h_at(&self, c: usize, node: &Node) -> Vector {
        match &self.h {
            Some(h) => h.at(self.mesh, c, &node.bary, &node.x),
            None => Vector::zeros(self.mesh.space().coord_len()),
        }
    }

    #[inline]
    pub fn phi(&self, gamma: f64, c: usize, node: &Node) -> (RadialSample, PhiValue) {
        let s = self.sample(c, node);
        let h = self.h_at(c, node);
        let phi = phi_at(self.mesh.space(), gamma, &s, &h);
        (s, phi)
    }

    /// Outward conormal of boundary facet `f` at `node`.
    #[inline]
    pub fn conormal(&self, f: usize, node: &Node) -> Vector {
        match &self.conormals {
            Some(n) => n[f],
            None => self.mesh.conormal_at(f, &node.x),
        }
    }

    /// Cell-domain radial integral with the context's schedule.
    pub fn cells<F>(&self, gamma_weight: f64, f: F) -> Result<RadialIntegral>
    where
        F: Fn(usize, &Node) -> f64 + Sync,
    {
        integrate_radial(&self.q, gamma_weight, self.schedule.as_ref(), f)
    }

    /// Boundary integral (never excised).
    pub fn facets<F>(&self, exponent: f64, f: F) -> Result<RadialIntegral>
    where
        F: Fn(usize, &Node) -> f64 + Sync,
    {
        let e = self.q.facets(exponent, f)?;
        Ok(RadialIntegral {
            value: e.value,
            err_quadrature: e.err,
            ..Default::default()
        })
    }
}
