//! Minimization of the discrete Hardy quotient over nonnegative P1 fields
//! vanishing on the boundary.

use serde::Serialize;

use crate::applications::smallest_pair;
use crate::error::{Error, Result};
use crate::inequalities::{hardy_report, BudgetMode, HardyParams, ReportOptions};
use crate::linalg::{small_spd_inverse, CsrMatrix, Small, Vector};
use crate::mesh::SimplicialImmersion;
use crate::operators::{phi_at, MeanCurvatureField, ScalarField, TangentFrames};
use crate::quadrature::{Node, Quadrature};

pub const STEP_TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 5000;
pub const FD_STEP: f64 = 1e-6;

/// Per-cell local matrix over the cell's vertices.
type LocalMatrix = [[f64; 4]; 4];

/// Minimize `[R1 + R2 + R3 - L2] / int psi^p / r^gamma` over `psi >= 0`,
/// `psi = 0` on the boundary.
#[derive(Clone, Debug)]
pub struct QuotientProblem<'m> {
    pub mesh: &'m SimplicialImmersion,
    pub params: HardyParams,
    pub xi: Vector,
}

impl<'m> QuotientProblem<'m> {
    pub fn new(mesh: &'m SimplicialImmersion, params: HardyParams, xi: &Vector) -> Result<Self> {
        let interior = mesh.boundary_vertex_mask().iter().filter(|b| !**b).count();
        if interior == 0 {
            return Err(Error::InvalidMesh("no interior vertices to vary".into()));
        }
        Ok(Self {
            mesh,
            params,
            xi: *xi,
        })
    }

    /// `(k - gamma)^p / p^p`.
    pub fn constant(&self) -> f64 {
        self.params.leading(self.mesh.dim())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Eigen,
    ProjectedGradient,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientResult {
    /// Minimizer at all vertices, zero on the boundary.
    pub psi: Vec<f64>,
    /// Quotient from the report terms at the minimizer.
    pub value: f64,
    /// Minimized discrete objective.
    pub discrete_value: f64,
    pub constant: f64,
    pub gap: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
}

/// Node data of one quadrature point: cell, barycentrics, weight for the
/// denominator and for the curvature numerator term.
#[derive(Clone, Copy, Debug)]
struct NodeData {
    cell: u32,
    bary: [f64; 4],
    denom: f64,
    curv: f64,
}

struct NodeTerms<'m> {
    mesh: &'m SimplicialImmersion,
    gamma: f64,
    c: f64,
    h: MeanCurvatureField,
    frames: TangentFrames,
}

impl<'m> NodeTerms<'m> {
    fn new(problem: &QuotientProblem<'m>) -> Result<Self> {
        let mesh = problem.mesh;
        Ok(Self {
            mesh,
            gamma: problem.params.gamma,
            c: problem.params.c(mesh.dim()),
            h: MeanCurvatureField::new(mesh, None)?,
            frames: TangentFrames::new(mesh),
        })
    }

    fn node(&self, cell: usize, n: &Node, w: f64) -> NodeData {
        let mesh = self.mesh;
        let s = self.frames.sample(mesh, cell, n);
        let phi = phi_at(
            mesh.space(),
            self.gamma,
            &s,
            &self.h.at(mesh, cell, &n.bary, &n.x),
        );
        let rg = n.r.powf(-self.gamma);
        NodeData {
            cell: cell as u32,
            bary: n.bary,
            denom: w * rg,
            curv: self.c * w * rg * (phi.minus - phi.plus),
        }
    }
}

/// The discrete objective on interior vertex values.
pub struct Objective<'m> {
    mesh: &'m SimplicialImmersion,
    p: f64,
    interior: Vec<usize>,
    slot: Vec<Option<usize>>,
    /// `int_c r^{p - gamma}` and the inverse edge Gram of each cell.
    cells: Vec<(f64, Small)>,
    nodes: Vec<NodeData>,
}

impl<'m> Objective<'m> {
    pub fn new(problem: &QuotientProblem<'m>) -> Result<Self> {
        Self::build(problem, true)
    }

    /// Cell data only; node terms are streamed by [`Self::quadratic_forms`].
    fn build(problem: &QuotientProblem<'m>, keep_nodes: bool) -> Result<Self> {
        let mesh = problem.mesh;
        let (p, g) = (problem.params.p, problem.params.gamma);
        let q = Quadrature::with_pole(mesh, &problem.xi);
        let mask = mesh.boundary_vertex_mask();
        let interior: Vec<usize> = (0..mesh.num_vertices()).filter(|&i| !mask[i]).collect();
        let mut slot = vec![None; mesh.num_vertices()];
        for (j, &i) in interior.iter().enumerate() {
            slot[i] = Some(j);
        }
        let weights = q.map_cell_nodes(g - p, |_, nodes| {
            nodes.iter().map(|(n, w)| w * n.r.powf(p - g)).sum::<f64>()
        })?;
        let cells = weights
            .into_iter()
            .enumerate()
            .map(|(cell, w)| {
                let frame = mesh.frame(cell);
                (
                    w,
                    small_spd_inverse(&frame.gram, mesh.dim()).expect("validated cell"),
                )
            })
            .collect();
        let nodes = if keep_nodes {
            let terms = NodeTerms::new(problem)?;
            q.map_cell_nodes(g, |cell, nodes| {
                nodes
                    .iter()
                    .map(|(n, w)| terms.node(cell, n, *w))
                    .collect::<Vec<_>>()
            })?
            .into_iter()
            .flatten()
            .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            mesh,
            p,
            interior,
            slot,
            cells,
            nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.interior.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Interior values of a full vertex field.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| full[i]).collect()
    }

    /// Full vertex field, zero on the boundary.
    pub fn extend(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.num_vertices()];
        for (&i, &v) in self.interior.iter().zip(x) {
            out[i] = v;
        }
        out
    }

    fn value_at(&self, x: &[f64], v: usize) -> f64 {
        self.slot[v].map_or(0.0, |j| x[j])
    }

    /// Numerator and denominator.
    pub fn parts(&self, x: &[f64]) -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for (c, (w, _)) in self.cells.iter().enumerate() {
            if *w != 0.0 {
                num += w * self.grad_sq(x, c).powf(0.5 * self.p);
            }
        }
        for n in &self.nodes {
            let psi = self.psi_node(x, n).powf(self.p);
            num += n.curv * psi;
            den += n.denom * psi;
        }
        (num, den)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (n, d) = self.parts(x);
        n / d
    }

    /// Quotient and its gradient with respect to the interior values.
    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let p = self.p;
        let k = self.mesh.dim();
        let (mut num, mut den) = (0.0, 0.0);
        let mut gn = vec![0.0; x.len()];
        let mut gd = vec![0.0; x.len()];
        for (c, (w, ginv)) in self.cells.iter().enumerate() {
            let d = self.edge_differences(x, c);
            let sq = quad(ginv, &d, k);
            if sq == 0.0 || *w == 0.0 {
                continue;
            }
            num += w * sq.powf(0.5 * p);
            // d/dd |g|^p = p |g|^{p-2} G^{-1} d.
            let scale = w * p * sq.powf(0.5 * p - 1.0);
            let cell = self.mesh.cell(c);
            for a in 0..k {
                let mut s = 0.0;
                for b in 0..k {
                    s += ginv[a][b] * d[b];
                }
                let s = scale * s;
                if let Some(j) = self.slot[cell[a + 1]] {
                    gn[j] += s;
                }
                if let Some(j) = self.slot[cell[0]] {
                    gn[j] -= s;
                }
            }
        }
        for n in &self.nodes {
            let psi = self.psi_node(x, n);
            if psi <= 0.0 {
                continue;
            }
            let pp = psi.powf(p);
            num += n.curv * pp;
            den += n.denom * pp;
            let dpsi = p * pp / psi;
            for (&v, b) in self.mesh.cell(n.cell as usize).iter().zip(&n.bary) {
                if let Some(j) = self.slot[v] {
                    gn[j] += n.curv * dpsi * b;
                    gd[j] += n.denom * dpsi * b;
                }
            }
        }
        let q = num / den;
        let grad = gn.iter().zip(&gd).map(|(a, b)| (a - q * b) / den).collect();
        (q, grad)
    }

    fn psi_node(&self, x: &[f64], n: &NodeData) -> f64 {
        self.mesh
            .cell(n.cell as usize)
            .iter()
            .zip(&n.bary)
            .map(|(&v, b)| b * self.value_at(x, v))
            .sum::<f64>()
            .max(0.0)
    }

    fn edge_differences(&self, x: &[f64], c: usize) -> [f64; 3] {
        let cell = self.mesh.cell(c);
        let base = self.value_at(x, cell[0]);
        let mut d = [0.0; 3];
        for a in 0..self.mesh.dim() {
            d[a] = self.value_at(x, cell[a + 1]) - base;
        }
        d
    }

    fn grad_sq(&self, x: &[f64], c: usize) -> f64 {
        quad(
            &self.cells[c].1,
            &self.edge_differences(x, c),
            self.mesh.dim(),
        )
    }

    /// Numerator and denominator matrices of the `p = 2` quotient.
    pub fn quadratic_forms(&self) -> (CsrMatrix, CsrMatrix) {
        let mut local = vec![([[0.0; 4]; 4], [[0.0; 4]; 4]); self.cells.len()];
        for n in &self.nodes {
            accumulate(&mut local[n.cell as usize], n);
        }
        self.assemble_forms(&local)
    }

    fn assemble_forms(&self, node_parts: &[(LocalMatrix, LocalMatrix)]) -> (CsrMatrix, CsrMatrix) {
        let k = self.mesh.dim();
        let mut a = Vec::new();
        let mut b = Vec::new();
        // Edge-difference selectors: d_e = x_{e+1} - x_0.
        let sel = |i: usize, e: usize| -> f64 {
            if i == 0 {
                -1.0
            } else if e + 1 == i {
                1.0
            } else {
                0.0
            }
        };
        for (c, ((w, ginv), (an, bn))) in self.cells.iter().zip(node_parts).enumerate() {
            let cell = self.mesh.cell(c);
            for i in 0..=k {
                let Some(si) = self.slot[cell[i]] else {
                    continue;
                };
                for j in 0..=k {
                    let Some(sj) = self.slot[cell[j]] else {
                        continue;
                    };
                    let mut s = 0.0;
                    for e in 0..k {
                        for f in 0..k {
                            s += sel(i, e) * ginv[e][f] * sel(j, f);
                        }
                    }
                    a.push((si, sj, w * s + an[i][j]));
                    b.push((si, sj, bn[i][j]));
                }
            }
        }
        let n = self.dim();
        (
            CsrMatrix::from_triplets(n, a),
            CsrMatrix::from_triplets(n, b),
        )
    }
}

fn accumulate(local: &mut (LocalMatrix, LocalMatrix), n: &NodeData) {
    for i in 0..4 {
        for j in 0..4 {
            let bb = n.bary[i] * n.bary[j];
            local.0[i][j] += n.curv * bb;
            local.1[i][j] += n.denom * bb;
        }
    }
}

/// `p = 2` forms without storing the nodes.
fn streamed_forms<'m>(
    problem: &QuotientProblem<'m>,
) -> Result<(Objective<'m>, CsrMatrix, CsrMatrix)> {
    let obj = Objective::build(problem, false)?;
    let terms = NodeTerms::new(problem)?;
    let q = Quadrature::with_pole(problem.mesh, &problem.xi);
    let parts = q.map_cell_nodes(problem.params.gamma, |cell, nodes| {
        let mut local = ([[0.0; 4]; 4], [[0.0; 4]; 4]);
        for (n, w) in nodes {
            accumulate(&mut local, &terms.node(cell, n, *w));
        }
        local
    })?;
    let (a, b) = obj.assemble_forms(&parts);
    Ok((obj, a, b))
}

fn quad(g: &Small, d: &[f64; 3], k: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..k {
        for b in 0..k {
            s += d[a] * g[a][b] * d[b];
        }
    }
    s.max(0.0)
}

/// Minimizes the quotient: weighted eigenproblem for `p = 2`, projected
/// gradient descent otherwise.
pub fn minimize_quotient(problem: &QuotientProblem) -> Result<QuotientResult> {
    if problem.params.p == 2.0 {
        let (obj, a, b) = streamed_forms(problem)?;
        if let Ok((x, v, it)) = eigen_path(&a, &b) {
            return finish(problem, &obj, x, v, Method::Eigen, it, true);
        }
    }
    minimize_quotient_gradient(problem, None)
}

/// Projected gradient descent regardless of `p`, from an optional start.
pub fn minimize_quotient_gradient(
    problem: &QuotientProblem,
    start: Option<&[f64]>,
) -> Result<QuotientResult> {
    let obj = Objective::new(problem)?;
    let x0 = start.map(|s| obj.restrict(s));
    let (x, v, it, ok) = projected_gradient(&obj, x0);
    finish(problem, &obj, x, v, Method::ProjectedGradient, it, ok)
}

fn finish(
    problem: &QuotientProblem,
    obj: &Objective,
    x: Vec<f64>,
    discrete_value: f64,
    method: Method,
    iterations: usize,
    converged: bool,
) -> Result<QuotientResult> {
    let psi = obj.extend(&x);
    let field = ScalarField::new(problem.mesh, psi.clone())?;
    let report = hardy_report(
        problem.mesh,
        &field,
        &problem.params,
        &problem.xi,
        &ReportOptions {
            budget: BudgetMode::Off,
            ..Default::default()
        },
    )?;
    let k = problem.mesh.dim();
    let integral = report.term("L1") / problem.params.leading(k);
    let value =
        (report.term("R1") + report.term("R2") + report.term("R3") - report.term("L2")) / integral;
    let constant = problem.constant();
    Ok(QuotientResult {
        psi,
        value,
        discrete_value,
        constant,
        gap: value - constant,
        method,
        iterations,
        converged,
    })
}

fn eigen_path(a: &CsrMatrix, b: &CsrMatrix) -> Result<(Vec<f64>, f64, usize)> {
    let (lambda, mut u, _, sweeps) = smallest_pair(a, b)?;
    u.iter_mut().for_each(|v| *v = v.max(0.0));
    let scale = u.iter().fold(0.0f64, |m, v| m.max(*v));
    u.iter_mut().for_each(|v| *v /= scale);
    Ok((u, lambda, sweeps))
}

fn normalize(obj: &Objective, x: &mut [f64]) {
    let (_, d) = obj.parts(x);
    if d > 0.0 {
        let s = d.powf(-1.0 / obj.p);
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Barzilai-Borwein steps with Armijo backtracking, clamping at zero and
/// renormalizing the denominator to one after every step.
fn projected_gradient(obj: &Objective, start: Option<Vec<f64>>) -> (Vec<f64>, f64, usize, bool) {
    let n = obj.dim();
    let mut x = start.unwrap_or_else(|| vec![1.0; n]);
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    if x.iter().all(|&v| v == 0.0) {
        x = vec![1.0; n];
    }
    normalize(obj, &mut x);
    let (mut f, mut g) = obj.value_and_gradient(&x);
    let mut step = 1.0 / crate::linalg::norm2(&g).max(1e-300);
    for it in 1..=MAX_ITER {
        let mut t = step;
        let (xn, fn_, gn) = loop {
            let mut trial: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(a, b)| (a - t * b).max(0.0))
                .collect();
            if trial.iter().all(|&v| v == 0.0) {
                t *= 0.5;
                continue;
            }
            let dec: f64 = trial
                .iter()
                .zip(&x)
                .zip(&g)
                .map(|((a, b), c)| (a - b) * c)
                .sum();
            normalize(obj, &mut trial);
            let (ft, gt) = obj.value_and_gradient(&trial);
            if ft <= f + 1e-4 * dec || t < 1e-30 {
                break (trial, ft, gt);
            }
            t *= 0.5;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = crate::linalg::dot(&s, &y);
        let rel = crate::linalg::norm2(&s) / crate::linalg::norm2(&xn).max(1e-300);
        step = if sy > 0.0 {
            crate::linalg::dot(&s, &s) / sy
        } else {
            2.0 * t
        };
        x = xn;
        f = fn_;
        g = gn;
        if rel < STEP_TOL {
            return (x, f, it, true);
        }
    }
    (x, f, MAX_ITER, false)
}

/// Largest deviation between the analytic gradient and central differences,
/// relative to the largest gradient component.
pub fn gradient_check(problem: &QuotientProblem, psi: &[f64]) -> Result<f64> {
    let obj = Objective::new(problem)?;
    if psi.len() != problem.mesh.num_vertices() {
        return Err(Error::InvalidField("field does not match the mesh".into()));
    }
    let x = obj.restrict(psi);
    let (_, g) = obj.value_and_gradient(&x);
    let mut worst: f64 = 0.0;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for j in 0..x.len() {
        let h = FD_STEP * x[j].abs().max(1.0);
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        let fd = (obj.value(&xp) - obj.value(&xm)) / (2.0 * h);
        worst = worst.max((fd - g[j]).abs() / scale);
    }
    Ok(worst)
}
