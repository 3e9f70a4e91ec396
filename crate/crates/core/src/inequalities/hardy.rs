use super::report::{Builder, Theorem};
use super::{
    log_log_slope, with_refinement_budget, Context, ExcisionSchedule, HardyParams, ReportOptions,
    TermBreakdown,
};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mesh::SimplicialImmersion;
use crate::operators::ScalarField;
use crate::quadrature::Quadrature;

fn check(mesh: &SimplicialImmersion, params: &HardyParams) -> Result<HardyParams> {
    HardyParams::new(params.p, params.gamma, mesh.dim())
}

/// `((k-gamma)/p)^p int psi^p / r^gamma`, shared by every Hardy form.
fn leading_term(ctx: &Context, prm: &HardyParams) -> Result<super::RadialIntegral> {
    let (p, g) = (prm.p, prm.gamma);
    Ok(ctx
        .cells(g, |c, n| ctx.psi_cell(c, &n.bary).powf(p) * n.r.powf(-g))?
        .scaled(prm.leading(ctx.k())))
}

/// `gamma c int psi^p |grad r^perp|^2 / r^gamma`.
fn perp_term(ctx: &Context, prm: &HardyParams) -> Result<super::RadialIntegral> {
    let (p, g) = (prm.p, prm.gamma);
    Ok(ctx
        .cells(g, |c, n| {
            let psi = ctx.psi_cell(c, &n.bary);
            if psi == 0.0 {
                return 0.0;
            }
            psi.powf(p) * ctx.sample(c, n).normal_sq * n.r.powf(-g)
        })?
        .scaled(g * prm.c(ctx.k())))
}

/// `int |grad psi|^p / r^{gamma - p}`.
fn gradient_term(ctx: &Context, prm: &HardyParams) -> Result<super::RadialIntegral> {
    let (p, g) = (prm.p, prm.gamma);
    ctx.cells(g - p, |c, n| {
        let d = ctx.grad_norm(c);
        if d == 0.0 {
            0.0
        } else {
            d.powf(p) * n.r.powf(p - g)
        }
    })
}

/// `c int_{bdry} psi^p / r^{gamma-1} <grad r, nu>`, or without the conormal factor.
fn boundary_term(
    ctx: &Context,
    prm: &HardyParams,
    conormal: bool,
) -> Result<super::RadialIntegral> {
    let (p, g) = (prm.p, prm.gamma);
    let space = ctx.mesh.space();
    Ok(ctx
        .facets(g - 1.0, |f, n| {
            let psi = ctx.psi_facet(f, &n.bary);
            if psi == 0.0 {
                return 0.0;
            }
            let factor = if conormal {
                space.inner(&n.grad_r, &ctx.conormal(f, n))
            } else {
                1.0
            };
            psi.powf(p) * n.r.powf(1.0 - g) * factor
        })?
        .scaled(prm.c(ctx.k())))
}

/// `c int psi^p r^{1-gamma} |<H, grad r>|`.
fn curvature_abs_term(ctx: &Context, prm: &HardyParams) -> Result<super::RadialIntegral> {
    let (p, g) = (prm.p, prm.gamma);
    let space = ctx.mesh.space();
    Ok(ctx
        .cells(g - 1.0, |c, n| {
            let psi = ctx.psi_cell(c, &n.bary);
            if psi == 0.0 {
                return 0.0;
            }
            psi.powf(p) * n.r.powf(1.0 - g) * space.inner(&ctx.h_at(c, n), &n.grad_r).abs()
        })?
        .scaled(prm.c(ctx.k())))
}

fn hardy_once(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    xi: &Vector,
    options: &ReportOptions,
    prm: &HardyParams,
) -> Result<TermBreakdown> {
    let ctx = Context::new(mesh, psi, xi, options, true)?;
    let k = ctx.k();
    let (p, g) = (prm.p, prm.gamma);
    let c = prm.c(k);
    let rate = k as f64 - g;
    let phi_part = |plus: bool| {
        ctx.cells(g, |cell, n| {
            let v = ctx.psi_cell(cell, &n.bary);
            if v == 0.0 {
                return 0.0;
            }
            let (_, phi) = ctx.phi(g, cell, n);
            v.powf(p) * if plus { phi.plus } else { phi.minus } * n.r.powf(-g)
        })
        .map(|r| r.scaled(c))
    };
    let l1 = leading_term(&ctx, prm)?;
    let l2 = phi_part(true)?;
    let r1 = gradient_term(&ctx, prm)?;
    let r2 = phi_part(false)?;
    let r3 = boundary_term(&ctx, prm, true)?;
    let mut b = Builder::new(Theorem::Hardy, ctx.params(p, g));
    b.lhs("L1", &l1, rate)
        .lhs("L2", &l2, rate)
        .rhs("R1", &r1, rate + p)
        .rhs("R2", &r2, rate)
        .rhs("R3", &r3, rate + 1.0);
    if p == 2.0 && g == 2.0 {
        // Phi^- <= r |H| bounds R2 by the classical curvature term.
        let space = mesh.space();
        let h = ctx
            .cells(1.0, |cell, n| {
                let v = ctx.psi_cell(cell, &n.bary);
                v * v * space.norm_sq(&ctx.h_at(cell, n)).max(0.0).sqrt() / n.r
            })?
            .scaled(c);
        b.aux("carron_curvature", h.value)
            .aux("carron_slack", r1.value + h.value + r3.value - l1.value);
    }
    Ok(b.finish())
}

/// All terms of the Hardy inequality with `Phi^+` and `Phi^-`.
pub fn hardy_report(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    params: &HardyParams,
    xi: &Vector,
    options: &ReportOptions,
) -> Result<TermBreakdown> {
    let prm = check(mesh, params)?;
    with_refinement_budget(mesh, psi, xi, options, |m, f, x, o| {
        hardy_once(m, f, x, o, &prm)
    })
}

fn carron_once(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    xi: &Vector,
    options: &ReportOptions,
    prm: &HardyParams,
) -> Result<TermBreakdown> {
    let ctx = Context::new(mesh, psi, xi, options, true)?;
    let k = ctx.k();
    let (p, g) = (prm.p, prm.gamma);
    let rate = k as f64 - g;
    let l1 = leading_term(&ctx, prm)?;
    let l2 = perp_term(&ctx, prm)?;
    let r1 = gradient_term(&ctx, prm)?;
    let rc = curvature_abs_term(&ctx, prm)?;
    let r3 = boundary_term(&ctx, prm, true)?;
    let mut b = Builder::new(Theorem::HardyCarron, ctx.params(p, g));
    b.lhs("L1", &l1, rate)
        .lhs("L2_perp", &l2, rate)
        .rhs("R1", &r1, rate + p)
        .rhs("R_curv", &rc, rate + 1.0)
        .rhs("R3", &r3, rate + 1.0);
    if g < 0.0 {
        // Signed form: L1 + c int psi^p Phi / r^gamma <= R1 + R3, then
        // -r<grad r, H> <= r|<grad r, H>|.
        let space = mesh.space();
        let signed = ctx
            .cells(g - 1.0, |cell, n| {
                let v = ctx.psi_cell(cell, &n.bary);
                if v == 0.0 {
                    return 0.0;
                }
                v.powf(p) * n.r.powf(1.0 - g) * space.inner(&ctx.h_at(cell, n), &n.grad_r)
            })?
            .scaled(prm.c(k));
        let phi_total = l2.value + signed.value;
        b.aux("phi_signed", phi_total)
            .aux(
                "intermediate_slack",
                r1.value + r3.value - l1.value - phi_total,
            )
            .aux("triangle_gap", rc.value + signed.value)
            .note("gamma < 0: signed Phi form followed by the triangle inequality");
    }
    Ok(b.finish())
}

/// Hardy inequality with `gamma |grad r^perp|^2` on the left and `|<H, grad r>|` on the right.
pub fn hardy_carron_report(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    params: &HardyParams,
    xi: &Vector,
    options: &ReportOptions,
) -> Result<TermBreakdown> {
    let prm = check(mesh, params)?;
    with_refinement_budget(mesh, psi, xi, options, |m, f, x, o| {
        carron_once(m, f, x, o, &prm)
    })
}

fn norm_once(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    xi: &Vector,
    options: &ReportOptions,
    prm: &HardyParams,
) -> Result<TermBreakdown> {
    let ctx = Context::new(mesh, psi, xi, options, true)?;
    let k = ctx.k();
    let (p, g) = (prm.p, prm.gamma);
    let rate = k as f64 - g;
    let space = mesh.space();
    let l1 = leading_term(&ctx, prm)?;
    let l2 = perp_term(&ctx, prm)?;
    let r1 = ctx.cells(g - p, |c, n| {
        let mut w = ctx.grads[c];
        w.axpy(ctx.psi_cell(c, &n.bary) / p, &ctx.h_at(c, n));
        let d = space.norm_sq(&w).max(0.0).sqrt();
        if d == 0.0 {
            0.0
        } else {
            d.powf(p) * n.r.powf(p - g)
        }
    })?;
    let r3 = boundary_term(&ctx, prm, false)?;
    let mut b = Builder::new(Theorem::HardyNorm, ctx.params(p, g));
    b.lhs("L1", &l1, rate)
        .lhs("L2_perp", &l2, rate)
        .rhs("R1_combined", &r1, rate + p)
        .rhs("R3_plain", &r3, rate + 1.0)
        .note("boundary term has no <grad r, nu> factor, unlike the Hardy and Carron forms");
    Ok(b.finish())
}

/// Hardy inequality with the combined field `grad psi + psi H / p`.
pub fn hardy_norm_report(
    mesh: &SimplicialImmersion,
    psi: &ScalarField,
    params: &HardyParams,
    xi: &Vector,
    options: &ReportOptions,
) -> Result<TermBreakdown> {
    let prm = check(mesh, params)?;
    with_refinement_budget(mesh, psi, xi, options, |m, f, x, o| {
        norm_once(m, f, x, o, &prm)
    })
}

/// Least-squares decay exponent of `int_{r < r0} psi / r^gamma` over the schedule.
pub fn excision_exponent(
    mesh: &SimplicialImmersion,
    xi: &Vector,
    psi: &ScalarField,
    gamma: f64,
    schedule: Option<&ExcisionSchedule>,
) -> Result<f64> {
    let k = mesh.dim() as f64;
    if !(gamma < k) {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} must be < k = {k}"
        )));
    }
    let q = Quadrature::with_pole(mesh, xi);
    if !q.pole_on_mesh() {
        return Err(Error::InvalidParameter(
            "the pole does not lie on the mesh".into(),
        ));
    }
    let default;
    let schedule = match schedule {
        Some(s) => s,
        None => {
            default = ExcisionSchedule::for_quadrature(&q)
                .ok_or_else(|| Error::InvalidParameter("no pole clearance".into()))?;
            &default
        }
    };
    let values = psi.values();
    let tails = q.cell_tails(gamma, schedule.radii(), |c, n| {
        let v: f64 = mesh
            .cell(c)
            .iter()
            .zip(&n.bary)
            .map(|(&i, b)| b * values[i])
            .sum();
        v * n.r.powf(-gamma)
    })?;
    let t: Vec<f64> = tails.iter().map(|t| t.value.abs()).collect();
    log_log_slope(schedule.radii(), &t)
        .ok_or_else(|| Error::NoConvergence("tail integrals vanish; exponent undefined".into()))
}
