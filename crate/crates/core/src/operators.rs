//! P1 finite-element operators on an immersion and the pointwise geometry of
//! the radial field: tangential and normal parts of `grad r`, the mean
//! curvature vector and `Phi = gamma |grad r^perp|^2 + r <grad r, H>`.
//!
//! Sign convention: `Delta = div grad`, so `Delta |x|^2 = 2k` on flat meshes.

use rayon::prelude::*;

use crate::ambient::{AmbientSpace, POLE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Small, Vector};
use crate::mesh::{MeanCurvature, SimplicialImmersion};
use crate::quadrature::{simplex_rule, Node};

/// Values in `[-CLAMP_TOL, 0)` are rounded to zero when loading a field.
pub const CLAMP_TOL: f64 = 1e-12;

/// Nonnegative piecewise-linear function given by its vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: &SimplicialImmersion, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::InvalidField(format!(
                "{} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidField(format!(
                    "value at vertex {i} is not finite"
                )));
            }
            if *v < -CLAMP_TOL {
                return Err(Error::InvalidField(format!(
                    "negative value {v} at vertex {i}"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self { values })
    }

    /// Evaluates `f` at every vertex.
    pub fn from_fn(mesh: &SimplicialImmersion, f: impl Fn(&Vector) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.vertices().iter().map(f).collect())
    }

    pub fn constant(mesh: &SimplicialImmersion, c: f64) -> Result<Self> {
        Self::new(mesh, vec![c; mesh.num_vertices()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interpolated value in `cell` at barycentric coordinates `bary`.
    #[inline]
    pub fn at(&self, mesh: &SimplicialImmersion, cell: usize, bary: &[f64; 4]) -> f64 {
        mesh.cell(cell)
            .iter()
            .zip(bary)
            .map(|(&v, b)| b * self.values[v])
            .sum()
    }
}

/// Sparse P1 Galerkin matrices.
#[derive(Clone, Debug)]
pub struct OperatorMatrices {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub lumped_mass: Vec<f64>,
}

/// `out[i][j] = <grad phi_i, grad phi_j> = u_i^T G^{-1} u_j` where `u_0 = -1`
/// and `u_j = e_{j-1}` select edge differences.
fn basis_gradient_gram(g_inv: &Small, k: usize) -> [[f64; 4]; 4] {
    let sel = |i: usize, a: usize| -> f64 {
        if i == 0 {
            -1.0
        } else if a == i - 1 {
            1.0
        } else {
            0.0
        }
    };
    let mut out = [[0.0; 4]; 4];
    for i in 0..=k {
        for j in 0..=k {
            let mut s = 0.0;
            for a in 0..k {
                for b in 0..k {
                    s += sel(i, a) * g_inv[a][b] * sel(j, b);
                }
            }
            out[i][j] = s;
        }
    }
    out
}

/// Mixed Voronoi areas of a triangle from its edge Gram matrix. Circumcentric
/// cells when no angle is obtuse, otherwise half the area to the obtuse
/// corner and a quarter to the others.
fn mixed_areas(g: &Small, area: f64) -> [f64; 3] {
    let l01 = g[0][0];
    let l02 = g[1][1];
    let l12 = g[0][0] + g[1][1] - 2.0 * g[0][1];
    // Dot products of the two edges leaving each corner.
    let dots = [g[0][1], g[0][0] - g[0][1], g[1][1] - g[0][1]];
    if let Some(obtuse) = dots.iter().position(|&d| d < 0.0) {
        let mut out = [0.25 * area; 3];
        out[obtuse] = 0.5 * area;
        return out;
    }
    let cot = dots.map(|d| d / (2.0 * area));
    [
        (l01 * cot[2] + l02 * cot[1]) / 8.0,
        (l01 * cot[2] + l12 * cot[0]) / 8.0,
        (l02 * cot[1] + l12 * cot[0]) / 8.0,
    ]
}

/// Assembles stiffness, consistent mass and lumped mass. Triangles lump by
/// mixed Voronoi areas, other cells by row sums.
pub fn assemble(mesh: &SimplicialImmersion) -> OperatorMatrices {
    let k = mesh.dim();
    let n = mesh.num_vertices();
    #[allow(clippy::type_complexity)]
    let local: Vec<(Vec<(usize, usize, f64, f64)>, [f64; 4])> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let frame = mesh.frame(c);
            let gg = basis_gradient_gram(&frame.gram_inv, k);
            let cell = mesh.cell(c);
            let mass_unit = frame.volume / ((k + 1) * (k + 2)) as f64;
            let mut entries = Vec::with_capacity((k + 1) * (k + 1));
            for i in 0..=k {
                for j in 0..=k {
                    let m = if i == j { 2.0 * mass_unit } else { mass_unit };
                    entries.push((cell[i], cell[j], frame.volume * gg[i][j], m));
                }
            }
            let lumps = if k == 2 {
                let a = mixed_areas(&frame.gram, frame.volume);
                [a[0], a[1], a[2], 0.0]
            } else {
                [frame.volume / (k + 1) as f64; 4]
            };
            (entries, lumps)
        })
        .collect();
    let mut kt = Vec::with_capacity(local.len() * (k + 1) * (k + 1));
    let mut mt = Vec::with_capacity(kt.capacity());
    let mut lumped = vec![0.0; n];
    for (c, (entries, lumps)) in local.iter().enumerate() {
        for &(i, j, kv, mv) in entries {
            kt.push((i, j, kv));
            mt.push((i, j, mv));
        }
        for (&v, &m) in mesh.cell(c).iter().zip(lumps) {
            lumped[v] += m;
        }
    }
    OperatorMatrices {
        stiffness: CsrMatrix::from_triplets(n, kt),
        mass: CsrMatrix::from_triplets(n, mt),
        lumped_mass: lumped,
    }
}

/// Per-cell constant gradient of the P1 interpolant of `values`.
pub fn gradient(mesh: &SimplicialImmersion, values: &[f64]) -> Vec<Vector> {
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_gradient(mesh, c, values))
        .collect()
}

#[inline]
pub fn cell_gradient(mesh: &SimplicialImmersion, c: usize, values: &[f64]) -> Vector {
    let frame = mesh.frame(c);
    let cell = mesh.cell(c);
    let k = mesh.dim();
    let mut out = Vector::zeros(mesh.space().coord_len());
    for a in 0..k {
        let mut coef = 0.0;
        for b in 0..k {
            coef += frame.gram_inv[a][b] * (values[cell[b + 1]] - values[cell[0]]);
        }
        out.axpy(coef, &frame.edges[a]);
    }
    out
}

/// Discrete Laplacian with a flag for vertices where it is consistent.
#[derive(Clone, Debug)]
pub struct LaplacianField {
    /// `-M_L^{-1} K psi` at every vertex.
    pub raw: Vec<f64>,
    /// Interior vertices; boundary values of `raw` are not consistent.
    pub trusted: Vec<bool>,
    /// `raw` with untrusted values replaced by averages of trusted neighbors.
    pub extended: Vec<f64>,
}

pub fn laplacian_apply(
    mesh: &SimplicialImmersion,
    ops: &OperatorMatrices,
    values: &[f64],
) -> LaplacianField {
    let kpsi = ops.stiffness.mul_vec(values);
    let raw: Vec<f64> = kpsi
        .iter()
        .zip(&ops.lumped_mass)
        .map(|(a, m)| -a / m)
        .collect();
    let trusted: Vec<bool> = mesh.boundary_vertex_mask().iter().map(|b| !b).collect();
    let extended = extend_from_trusted(mesh, &raw, &trusted);
    LaplacianField {
        raw,
        trusted,
        extended,
    }
}

/// Replaces untrusted values by the mean of trusted neighbors, in passes that
/// grow the trusted set one ring at a time.
pub fn extend_from_trusted<T>(mesh: &SimplicialImmersion, values: &[T], trusted: &[bool]) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let adj = mesh.vertex_neighbors();
    let mut out = values.to_vec();
    let mut known = trusted.to_vec();
    if !known.iter().any(|&k| k) {
        return out;
    }
    loop {
        let mut updates = Vec::new();
        for v in 0..out.len() {
            if known[v] {
                continue;
            }
            let good: Vec<usize> = adj[v].iter().copied().filter(|&u| known[u]).collect();
            if let Some((&first, rest)) = good.split_first() {
                let mut acc = out[first];
                for &u in rest {
                    acc = acc + out[u];
                }
                updates.push((v, acc * (1.0 / good.len() as f64)));
            }
        }
        if updates.is_empty() {
            return out;
        }
        for (v, val) in updates {
            out[v] = val;
            known[v] = true;
        }
    }
}

/// Discrete mean curvature vector `H = Delta f` at every vertex (Euclidean only).
pub fn mean_curvature(mesh: &SimplicialImmersion, ops: &OperatorMatrices) -> Result<Vec<Vector>> {
    if !mesh.space().is_flat() {
        return Err(Error::Unsupported(
            "discrete mean curvature in a hyperbolic ambient; attach an analytic provider".into(),
        ));
    }
    let dim = mesh.space().coord_len();
    let mut h = vec![Vector::zeros(dim); mesh.num_vertices()];
    for d in 0..dim {
        let coord: Vec<f64> = mesh.vertices().iter().map(|v| v[d]).collect();
        let kf = ops.stiffness.mul_vec(&coord);
        for (i, hv) in h.iter_mut().enumerate() {
            hv[d] = -kf[i] / ops.lumped_mass[i];
        }
    }
    Ok(h)
}

/// Evaluates the mesh's attached mean curvature provider.
#[derive(Clone, Debug)]
pub enum MeanCurvatureField {
    Zero(usize),
    /// Vertex values (boundary vertices extended from the interior).
    Vertex(Vec<Vector>),
    Sphere {
        center: Vector,
        radius: f64,
        k: usize,
    },
}

impl MeanCurvatureField {
    pub fn new(mesh: &SimplicialImmersion, ops: Option<&OperatorMatrices>) -> Result<Self> {
        match mesh.mean_curvature_source() {
            MeanCurvature::Zero => Ok(Self::Zero(mesh.space().coord_len())),
            MeanCurvature::Missing => Err(Error::MissingMeanCurvature(
                "the mesh carries no mean curvature provider".into(),
            )),
            MeanCurvature::Sphere { center, radius } => Ok(Self::Sphere {
                center: *center,
                radius: *radius,
                k: mesh.dim(),
            }),
            MeanCurvature::Discrete => {
                let owned;
                let ops = match ops {
                    Some(o) => o,
                    None => {
                        owned = assemble(mesh);
                        &owned
                    }
                };
                let h = mean_curvature(mesh, ops)?;
                let trusted: Vec<bool> = mesh.boundary_vertex_mask().iter().map(|b| !b).collect();
                Ok(Self::Vertex(extend_from_trusted(mesh, &h, &trusted)))
            }
        }
    }

    #[inline]
    pub fn at(
        &self,
        mesh: &SimplicialImmersion,
        cell: usize,
        bary: &[f64; 4],
        x: &Vector,
    ) -> Vector {
        match self {
            Self::Zero(n) => Vector::zeros(*n),
            Self::Vertex(h) => {
                let mut out = Vector::zeros(x.len());
                for (&v, b) in mesh.cell(cell).iter().zip(bary) {
                    out.axpy(*b, &h[v]);
                }
                out
            }
            Self::Sphere { center, radius, k } => {
                (*x - *center) * (-(*k as f64) / (radius * radius))
            }
        }
    }

    /// Largest `|H|` over vertices (interior vertices for discrete fields).
    pub fn sup_norm(&self, mesh: &SimplicialImmersion) -> f64 {
        match self {
            Self::Zero(_) => 0.0,
            Self::Vertex(h) => {
                let mask = mesh.boundary_vertex_mask();
                h.iter()
                    .zip(&mask)
                    .filter(|(_, b)| !**b)
                    .map(|(v, _)| v.norm())
                    .fold(0.0, f64::max)
            }
            Self::Sphere { radius, k, .. } => *k as f64 / radius,
        }
    }
}

/// Orthonormal basis of the tangent space of `cell` at `at` (Minkowski-
/// orthonormal in hyperbolic space after projecting the chords to `T_at`).
pub fn tangent_basis(mesh: &SimplicialImmersion, cell: usize, at: &Vector) -> ([Vector; 3], usize) {
    let space = mesh.space();
    let k = mesh.dim();
    let frame = mesh.frame(cell);
    let zero = Vector::zeros(space.coord_len());
    let mut basis = [zero; 3];
    for a in 0..k {
        let mut e = space.project_tangent(at, &frame.edges[a]);
        for b in basis.iter().take(a) {
            let c = space.inner(&e, b);
            e.axpy(-c, b);
        }
        let n = space.norm_sq(&e).max(0.0).sqrt();
        basis[a] = e * (1.0 / n);
    }
    (basis, k)
}

/// Tangential part of `w` and the squared norm of its normal part.
#[inline]
pub fn split(space: &AmbientSpace, basis: &([Vector; 3], usize), w: &Vector) -> (Vector, f64) {
    let mut t = Vector::zeros(w.len());
    let mut tsq = 0.0;
    for b in basis.0.iter().take(basis.1) {
        let c = space.inner(w, b);
        t.axpy(c, b);
        tsq += c * c;
    }
    let normal_sq = (space.norm_sq(w) - tsq).max(0.0);
    (t, normal_sq)
}

/// Radial geometry at one quadrature node.
#[derive(Clone, Copy, Debug)]
pub struct RadialSample {
    pub cell: usize,
    pub x: Vector,
    pub r: f64,
    pub grad_r: Vector,
    pub tangent: Vector,
    pub tangent_sq: f64,
    pub normal_sq: f64,
}

/// Evaluates the radial split at a node of `cell`.
#[inline]
pub fn radial_sample(mesh: &SimplicialImmersion, cell: usize, node: &Node) -> RadialSample {
    if mesh.dim() == mesh.space().dim() {
        return full_dimensional(mesh, cell, node);
    }
    let basis = tangent_basis(mesh, cell, &node.x);
    sample_with_basis(mesh.space(), cell, node, &basis)
}

#[inline]
fn full_dimensional(mesh: &SimplicialImmersion, cell: usize, node: &Node) -> RadialSample {
    RadialSample {
        cell,
        x: node.x,
        r: node.r,
        grad_r: node.grad_r,
        tangent: node.grad_r,
        tangent_sq: mesh.space().norm_sq(&node.grad_r),
        normal_sq: 0.0,
    }
}

#[inline]
fn sample_with_basis(
    space: &AmbientSpace,
    cell: usize,
    node: &Node,
    basis: &([Vector; 3], usize),
) -> RadialSample {
    let (tangent, normal_sq) = split(space, basis, &node.grad_r);
    RadialSample {
        cell,
        x: node.x,
        r: node.r,
        grad_r: node.grad_r,
        tangent,
        tangent_sq: space.norm_sq(&tangent),
        normal_sq,
    }
}

/// Radial split with tangent bases cached per cell where they do not depend
/// on the evaluation point.
pub struct TangentFrames {
    cached: Option<Vec<([Vector; 3], usize)>>,
    full: bool,
}

impl TangentFrames {
    pub fn new(mesh: &SimplicialImmersion) -> Self {
        let full = mesh.dim() == mesh.space().dim();
        let cached = (!full && mesh.space().is_flat()).then(|| {
            (0..mesh.num_cells())
                .into_par_iter()
                .map(|c| tangent_basis(mesh, c, mesh.vertex(mesh.cell(c)[0])))
                .collect()
        });
        Self { cached, full }
    }

    #[inline]
    pub fn basis(
        &self,
        mesh: &SimplicialImmersion,
        cell: usize,
        at: &Vector,
    ) -> ([Vector; 3], usize) {
        match &self.cached {
            Some(b) => b[cell],
            None => tangent_basis(mesh, cell, at),
        }
    }

    #[inline]
    pub fn sample(&self, mesh: &SimplicialImmersion, cell: usize, node: &Node) -> RadialSample {
        if self.full {
            return full_dimensional(mesh, cell, node);
        }
        let basis = self.basis(mesh, cell, &node.x);
        sample_with_basis(mesh.space(), cell, node, &basis)
    }
}

/// Nodes of the degree `2k + 3` cell rule, as used for pointwise fields.
fn field_nodes(mesh: &SimplicialImmersion, pole: &Vector) -> Vec<(usize, Node)> {
    let rule = simplex_rule(mesh.dim(), mesh.dim() + 2);
    let space = mesh.space();
    let mut out = Vec::with_capacity(mesh.num_cells() * rule.points.len());
    for c in 0..mesh.num_cells() {
        for (bary, _) in &rule.points {
            let x = space.project(&mesh.cell_point(c, bary));
            let (r, grad_r) = space.radial(&x, pole);
            out.push((
                c,
                Node {
                    bary: *bary,
                    x,
                    r,
                    grad_r,
                },
            ));
        }
    }
    out
}

/// Splits `grad r` into tangential and normal parts at the cell quadrature nodes.
pub fn radial_decompose(mesh: &SimplicialImmersion, pole: &Vector) -> Result<Vec<RadialSample>> {
    field_nodes(mesh, pole)
        .par_iter()
        .map(|(c, node)| {
            if node.r <= POLE_TOL {
                return Err(Error::PoleSingularity(node.r));
            }
            Ok(radial_sample(mesh, *c, node))
        })
        .collect()
}

/// `Phi` and its positive and negative parts at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiValue {
    pub phi: f64,
    pub plus: f64,
    pub minus: f64,
}

impl PhiValue {
    #[inline]
    pub fn new(phi: f64) -> Self {
        Self {
            phi,
            plus: phi.max(0.0),
            minus: (-phi).max(0.0),
        }
    }
}

/// `Phi = gamma |grad r^perp|^2 + r <grad r, H>` at a node.
#[inline]
pub fn phi_at(space: &AmbientSpace, gamma: f64, sample: &RadialSample, h: &Vector) -> PhiValue {
    PhiValue::new(gamma * sample.normal_sq + sample.r * space.inner(&sample.grad_r, h))
}

/// `Phi` at every cell quadrature node.
pub fn phi_field(
    mesh: &SimplicialImmersion,
    pole: &Vector,
    gamma: f64,
) -> Result<Vec<(RadialSample, PhiValue)>> {
    let h = MeanCurvatureField::new(mesh, None)?;
    let samples = radial_decompose(mesh, pole)?;
    let rule = simplex_rule(mesh.dim(), mesh.dim() + 2);
    let per_cell = rule.points.len();
    Ok(samples
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let bary = rule.points[i % per_cell].0;
            let hv = h.at(mesh, s.cell, &bary, &s.x);
            (s, phi_at(mesh.space(), gamma, &s, &hv))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, GenParams};

    #[test]
    fn unit_segment_matrices() {
        let s = AmbientSpace::euclidean(2).unwrap();
        let m = SimplicialImmersion::build(
            s,
            vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]],
            vec![vec![0, 1], vec![1, 2]],
        )
        .unwrap();
        let ops = assemble(&m);
        let k = ops.stiffness.to_dense();
        let expect = [[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[(i, j)] - expect[i][j]).abs() < 1e-14);
            }
        }
        let mass = ops.mass.to_dense();
        assert!((mass[(0, 0)] - 1.0 / 6.0).abs() < 1e-15);
        assert!((mass[(0, 1)] - 1.0 / 12.0).abs() < 1e-15);
        for (a, b) in ops.lumped_mass.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_in_kernel_and_mass_sums_to_volume() {
        for name in ["flat_disk", "sphere", "flat_ball_3d", "hyperbolic_disk"] {
            let m = generate(name, &GenParams::new(1.0, 2)).unwrap();
            let ops = assemble(&m);
            for s in ops.stiffness.row_sums() {
                assert!(s.abs() < 1e-10);
            }
            let total: f64 = ops.mass.row_sums().iter().sum();
            assert!((total - m.total_volume()).abs() < 1e-10);
            assert!(ops.stiffness.max_asymmetry() < 1e-14);
        }
    }

    #[test]
    fn galerkin_identity() {
        let m = generate("sphere", &GenParams::new(1.5, 2)).unwrap();
        let ops = assemble(&m);
        let psi: Vec<f64> = m
            .vertices()
            .iter()
            .map(|v| 1.0 + v[0] * v[1] - 0.3 * v[2])
            .collect();
        let grads = gradient(&m, &psi);
        let direct: f64 = grads
            .iter()
            .enumerate()
            .map(|(c, g)| m.volume(c) * g.dot(g))
            .sum();
        assert!((ops.stiffness.quad_form(&psi) - direct).abs() < 1e-10);
    }

    #[test]
    fn affine_gradient_exact() {
        let m = generate("flat_disk", &GenParams::new(1.0, 3)).unwrap();
        let psi: Vec<f64> = m.vertices().iter().map(|v| v[0]).collect();
        for g in gradient(&m, &psi) {
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        }
        let ops = assemble(&m);
        let lap = laplacian_apply(&m, &ops, &psi);
        for (v, t) in lap.raw.iter().zip(&lap.trusted) {
            if *t {
                assert!(v.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sphere_gradient_of_height() {
        let m = generate("sphere", &GenParams::new(1.0, 4)).unwrap();
        let psi: Vec<f64> = m.vertices().iter().map(|v| v[2]).collect();
        let grads = gradient(&m, &psi);
        let mut worst: f64 = 0.0;
        for (c, g) in grads.iter().enumerate() {
            let z = m.cell_point(c, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
            let z = z * (1.0 / z.norm());
            worst = worst.max((g.dot(g) - (1.0 - z[2] * z[2])).abs());
        }
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn laplacian_of_radius_squared() {
        let m = generate("flat_disk", &GenParams::new(1.0, 6)).unwrap();
        let ops = assemble(&m);
        let psi: Vec<f64> = m.vertices().iter().map(|v| v.dot(v)).collect();
        let lap = laplacian_apply(&m, &ops, &psi);
        let mut worst: f64 = 0.0;
        for (v, t) in lap.raw.iter().zip(&lap.trusted) {
            if *t {
                worst = worst.max((v - 4.0).abs() / 4.0);
            }
        }
        assert!(worst < 0.02, "{worst}");
    }

    #[test]
    fn sphere_eigenfunction_relation() {
        let r = 2.0;
        let m = generate("sphere", &GenParams::new(r, 4)).unwrap();
        let ops = assemble(&m);
        let z: Vec<f64> = m.vertices().iter().map(|v| v[2]).collect();
        let lap = laplacian_apply(&m, &ops, &z);
        let err: Vec<f64> = lap
            .raw
            .iter()
            .zip(&z)
            .map(|(l, z)| l + 2.0 / (r * r) * z)
            .collect();
        let rms = mass_rms(&err, &ops.lumped_mass);
        assert!(rms < 1e-2, "{rms}");
    }

    #[test]
    fn sphere_mean_curvature() {
        let m = generate("sphere", &GenParams::new(2.0, 5)).unwrap();
        let ops = assemble(&m);
        let h = mean_curvature(&m, &ops).unwrap();
        let err: Vec<f64> = h
            .iter()
            .zip(m.vertices())
            .map(|(hv, x)| (*hv + *x * 0.5).norm())
            .collect();
        let max = err.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(max < 1e-2, "{max}");
    }

    #[test]
    fn sphere_mean_curvature_converges() {
        let errs: Vec<(f64, f64)> = (3..=5)
            .map(|l| {
                let m = generate("sphere", &GenParams::new(1.0, l)).unwrap();
                let ops = assemble(&m);
                let h = mean_curvature(&m, &ops).unwrap();
                let err: Vec<f64> = h
                    .iter()
                    .zip(m.vertices())
                    .map(|(hv, x)| (*hv + *x * 2.0).norm())
                    .collect();
                (m.mesh_size(), mass_rms(&err, &ops.lumped_mass))
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!(order >= 1.0, "{order}");
        }
    }

    fn mass_rms(err: &[f64], mass: &[f64]) -> f64 {
        let num: f64 = err.iter().zip(mass).map(|(e, m)| e * e * m).sum();
        (num / mass.iter().sum::<f64>()).sqrt()
    }

    #[test]
    fn flat_disk_is_minimal_and_hyperbolic_unsupported() {
        let m = generate("flat_disk", &GenParams::new(1.0, 3)).unwrap();
        let ops = assemble(&m);
        let h = mean_curvature(&m, &ops).unwrap();
        let mask = m.boundary_vertex_mask();
        for (hv, b) in h.iter().zip(mask) {
            if !b {
                assert!(hv.norm() < 1e-10);
            }
        }
        let hd = generate("hyperbolic_disk", &GenParams::new(1.0, 1)).unwrap();
        assert!(matches!(
            mean_curvature(&hd, &assemble(&hd)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn radial_split_cases() {
        let disk = generate("flat_disk", &GenParams::new(1.0, 2)).unwrap();
        for s in radial_decompose(&disk, disk.pole()).unwrap() {
            assert!(s.normal_sq < 1e-12);
            assert!((s.tangent_sq + s.normal_sq - 1.0).abs() < 1e-10);
        }
        let sphere = generate("sphere", &GenParams::new(1.0, 2)).unwrap();
        for s in radial_decompose(&sphere, sphere.pole()).unwrap() {
            // grad r is normal to the chord cells only up to the cell's tilt
            assert!((s.tangent_sq + s.normal_sq - 1.0).abs() < 1e-10);
            assert!(s.tangent_sq < 0.05);
        }
        let hyp = generate("hyperbolic_disk", &GenParams::new(1.0, 2)).unwrap();
        for s in radial_decompose(&hyp, hyp.pole()).unwrap() {
            assert!(s.normal_sq < 1e-12);
        }
    }

    #[test]
    fn segment_tangent_fraction() {
        let seg = generate(
            "segment",
            &GenParams {
                offset: 1.0,
                length: Some(4.0),
                ..GenParams::new(1.0, 2)
            },
        )
        .unwrap();
        let x = Vector::from_slice(&[1.0, 1.0]);
        let (r, g) = seg.space().radial(&x, seg.pole());
        let node = Node {
            bary: [0.5, 0.5, 0.0, 0.0],
            x,
            r,
            grad_r: g,
        };
        let s = radial_sample(&seg, 2, &node);
        assert!((s.tangent_sq - 0.5).abs() < 1e-14);
    }

    #[test]
    fn phi_closed_forms() {
        let disk = generate("flat_disk", &GenParams::new(1.0, 2)).unwrap();
        for (_, p) in phi_field(&disk, disk.pole(), 1.0).unwrap() {
            assert!(p.phi.abs() < 1e-12);
        }
        let r = 2.0;
        let sphere = generate(
            "sphere",
            &GenParams {
                analytic_h: true,
                ..GenParams::new(r, 3)
            },
        )
        .unwrap();
        let gamma = 1.0;
        for (s, p) in phi_field(&sphere, sphere.pole(), gamma).unwrap() {
            // chord nodes sit slightly inside the sphere: r < R, H scales with x
            let expect = gamma * s.normal_sq - 2.0 * s.r * s.r / (r * r);
            assert!((p.phi - expect).abs() < 1e-12);
            assert!((p.phi - (gamma - 2.0)).abs() < 0.05);
            assert_eq!(p.plus * p.minus, 0.0);
            assert!((p.plus - p.minus - p.phi).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_field_validation() {
        let m = generate("segment", &GenParams::new(1.0, 1)).unwrap();
        assert!(
            ScalarField::new(&m, vec![1.0, -1e-13, 0.5])
                .unwrap()
                .values()[1]
                == 0.0
        );
        assert!(ScalarField::new(&m, vec![1.0, -1e-6, 0.5]).is_err());
        assert!(ScalarField::new(&m, vec![1.0, 0.5]).is_err());
    }
}
