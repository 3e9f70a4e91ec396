use super::report::{Builder, Theorem};
use super::{rellich_constants, with_refinement_budget, Context, ReportOptions, TermBreakdown};
use crate::error::Result;
use crate::linalg::{pcg, Vector};
use crate::mesh::SimplicialImmersion;
use crate::operators::{assemble, extend_from_trusted, split, OperatorMatrices, ScalarField};

/// Vertex values of `Delta psi` used by the Rellich report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LaplacianMode {
    /// Lumped Laplacian with the boundary flux `int phi_i d_nu psi` restored at
    /// boundary vertices.
    #[default]
    Flux,
    /// Lumped Laplacian at interior vertices, extended ring by ring to the boundary.
    Interior,
    /// Consistent-mass projection of the weak Laplacian with boundary flux.
    Consistent,
}

/// Boundary flux load `b_i = sum_f |f|/k <grad psi, nu_f>` over facets containing `i`.
fn boundary_flux(ctx: &Context) -> Vec<f64> {
    let mesh = ctx.mesh;
    let mut b = vec![0.0; mesh.num_vertices()];
    let k = mesh.dim() as f64;
    for (f, facet) in mesh.boundary_facets().iter().enumerate() {
        let nu = mesh.conormal_at(f, &mesh.facet_center(f));
        let flux = mesh.space().inner(&ctx.grads[facet.cell], &nu) * mesh.facet_volume(f) / k;
        for &v in facet.vertices() {
            b[v] += flux;
        }
    }
    b
}

fn vertex_laplacian(
    ctx: &Context,
    ops: &OperatorMatrices,
    mode: LaplacianMode,
) -> Result<Vec<f64>> {
    let mesh = ctx.mesh;
    let kpsi = ops.stiffness.mul_vec(ctx.psi);
    match mode {
        LaplacianMode::Interior => {
            let raw: Vec<f64> = kpsi
                .iter()
                .zip(&ops.lumped_mass)
                .map(|(a, m)| -a / m)
                .collect();
            let trusted: Vec<bool> = mesh.boundary_vertex_mask().iter().map(|b| !b).collect();
            Ok(extend_from_trusted(mesh, &raw, &trusted))
        }
        LaplacianMode::Flux | LaplacianMode::Consistent => {
            let b = boundary_flux(ctx);
            let load: Vec<f64> = kpsi.iter().zip(&b).map(|(a, b)| b - a).collect();
            if mode == LaplacianMode::Flux {
                return Ok(load
                    .iter()
                    .zip(&ops.lumped_mass)
                    .map(|(l, m)| l / m)
                    .collect());
            }
            let mut x: Vec<f64> = load
                .iter()
                .zip(&ops.lumped_mass)
                .map(|(l, m)| l / m)
                .collect();
            pcg(
                &ops.mass,
                &load,
                &mut x,
                1e-13,
                10 * mesh.num_vertices().max(100),
            )?;
            Ok(x)
        }
    }
}

fn rellich_once(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    xi: &Vector,
    options: &ReportOptions,
    p: f64,
    gamma: f64,
) -> Result<TermBreakdown> {
    let k = mesh.dim();
    let consts = rellich_constants(k, gamma, p, mesh.space().is_flat())?;
    let ctx = Context::new(mesh, psi, xi, options, true)?;
    let ops = assemble(mesh);
    let mode = options.laplacian;
    let lap = vertex_laplacian(&ctx, &ops, mode)?;
    let alternatives: Vec<Vec<f64>> = [
        LaplacianMode::Flux,
        LaplacianMode::Interior,
        LaplacianMode::Consistent,
    ]
    .into_iter()
    .filter(|m| *m != mode)
    .map(|m| vertex_laplacian(&ctx, &ops, m))
    .collect::<Result<_>>()?;
    let rate = k as f64 - gamma;
    let space = mesh.space();
    let (a, b) = (consts.a, consts.b);

    let lead = ctx
        .cells(gamma, |c, n| {
            ctx.psi_cell(c, &n.bary).powf(p) * n.r.powf(-gamma)
        })?
        .scaled(a);
    let phi_part = |plus: bool| {
        ctx.cells(gamma, |c, n| {
            let v = ctx.psi_cell(c, &n.bary);
            if v == 0.0 {
                return 0.0;
            }
            let (_, phi) = ctx.phi(gamma, c, n);
            v.powf(p) * if plus { phi.plus } else { phi.minus } * n.r.powf(-gamma)
        })
        .map(|r| r.scaled(b))
    };
    let laplacian_term = |values: &[f64]| {
        ctx.cells(gamma - 2.0 * p, |c, n| {
            let d: f64 = mesh
                .cell(c)
                .iter()
                .zip(&n.bary)
                .map(|(&i, w)| w * values[i])
                .sum();
            if d == 0.0 {
                0.0
            } else {
                d.abs().powf(p) * n.r.powf(2.0 * p - gamma)
            }
        })
    };
    let l2 = phi_part(true)?;
    let r_lap = laplacian_term(&lap)?;
    let r_alt: Vec<f64> = alternatives
        .iter()
        .map(|v| laplacian_term(v).map(|r| r.value))
        .collect::<Result<_>>()?;
    let r2 = phi_part(false)?;
    let boundary = ctx.facets(gamma - 1.0, |f, n| {
        let facet = &mesh.boundary_facets()[f];
        let v = ctx.psi_facet(f, &n.bary);
        let nu = ctx.conormal(f, n);
        let basis = ctx.frames.basis(mesh, facet.cell, &n.x);
        let (grad_r_t, _) = split(space, &basis, &n.grad_r);
        let mut w = ctx.grads[facet.cell] * consts.w_gradient;
        w.axpy(b * v / n.r, &grad_r_t);
        v.powf(p - 1.0) * n.r.powf(2.0 - gamma) * space.inner(&w, &nu)
    })?;

    let mut out = Builder::new(Theorem::Rellich, ctx.params(p, gamma));
    out.lhs("A_term", &lead, rate)
        .lhs("B_phi_plus", &l2, rate)
        .rhs("laplacian", &r_lap, rate + 2.0 * p)
        .rhs("B_phi_minus", &r2, rate)
        .rhs("boundary_W", &boundary, rate + 1.0)
        .aux("E", consts.e)
        .aux("A", consts.a)
        .aux("B", consts.b)
        .aux(
            "laplacian_spread",
            r_alt
                .iter()
                .map(|v| (v - r_lap.value).abs())
                .fold(0.0, f64::max),
        );
    if let Some(s) = consts.second_form {
        out.aux("second_form_A", s.a).aux("second_form_B", s.b);
    }
    let report = out.finish();
    let spread = report.auxiliary["laplacian_spread"];
    Ok(report.with_discretization(spread))
}

/// All terms of the Rellich inequality; `Delta psi` comes from vertex values
/// selected by `options.laplacian`.
pub fn rellich_report(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    p: f64,
    gamma: f64,
    xi: &Vector,
    options: &ReportOptions,
) -> Result<TermBreakdown> {
    rellich_constants(mesh.dim(), gamma, p, mesh.space().is_flat())?;
    with_refinement_budget(mesh, psi, xi, options, |m, f, x, o| {
        let base = rellich_once(m, f, x, o, p, gamma)?;
        Ok(base)
    })
}
