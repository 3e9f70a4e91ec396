//! Quadrature over the cells and boundary facets of an immersion for
//! integrands with a radial singularity `r^{-e}` at the pole.
//!
//! Cells away from the pole use collapsed Gauss-Jacobi product rules. A cell
//! containing the pole is split into cones with apex at the pole, and the radial
//! direction of each cone uses Gauss-Jacobi nodes for the weight `t^{m-1-e}`.
//! Cells close to the pole are bisected until their size is below half their
//! distance to it. Every estimate carries the difference to the next lower rule.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{small_det, Vector};
use crate::mesh::SimplicialImmersion;

/// Barycentric coordinates are treated as zero below this value.
const BARY_TOL: f64 = 1e-12;
const MAX_DEPTH: usize = 40;
/// Points per direction on the facets of pole cones, where the angular density
/// `|y - apex|^{-m}` is smooth but not polynomial.
const CONE_FACET_POINTS: usize = 10;

/// Gauss-Jacobi rule on `[0, 1]` for the weight `(1-x)^alpha x^beta`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    diag[0] = (beta - alpha) / (ab + 2.0);
    for j in 1..n {
        let jf = j as f64;
        let s = 2.0 * jf + ab;
        diag[j] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
        let num = 4.0 * jf * (jf + alpha) * (jf + beta) * (jf + ab);
        let den = s * s * (s + 1.0) * (s - 1.0);
        off[j - 1] = (num / den).sqrt();
    }
    let jac = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let eig = jac.symmetric_eigen();
    let mu0 = (libm::lgamma(alpha + 1.0) + libm::lgamma(beta + 1.0) - libm::lgamma(ab + 2.0)).exp();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + eig.eigenvalues[i]), mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Product rule on the reference `dim`-simplex in barycentric coordinates,
/// weights normalized to sum to one.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub dim: usize,
    pub points: Vec<([f64; 4], f64)>,
}

/// Collapsed Gauss-Jacobi rule with `n` points per direction, exact for
/// polynomials of degree `2n - 1`.
pub fn simplex_rule(dim: usize, n: usize) -> SimplexRule {
    if dim == 0 {
        return SimplexRule {
            dim,
            points: vec![([1.0, 0.0, 0.0, 0.0], 1.0)],
        };
    }
    let lines: Vec<(Vec<f64>, Vec<f64>)> = (1..=dim)
        .map(|i| gauss_jacobi(n, (dim - i) as f64, 0.0))
        .collect();
    let norm: f64 = (1..=dim).map(|i| i as f64).product();
    let mut points = Vec::with_capacity(n.pow(dim as u32));
    let mut idx = vec![0usize; dim];
    loop {
        let mut bary = [0.0; 4];
        let mut rest = 1.0;
        let mut w = norm;
        for (d, &i) in idx.iter().enumerate() {
            let u = lines[d].0[i];
            bary[d + 1] = rest * u;
            rest *= 1.0 - u;
            w *= lines[d].1[i];
        }
        bary[0] = 1.0 - bary[1..=dim].iter().sum::<f64>();
        points.push((bary, w));
        let mut d = dim;
        loop {
            if d == 0 {
                return SimplexRule { dim, points };
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// An integrand evaluation site.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    /// Barycentric coordinates in the owning cell or facet.
    pub bary: [f64; 4],
    /// Ambient position (projected onto the hyperboloid in hyperbolic space).
    pub x: Vector,
    /// Distance to the pole.
    pub r: f64,
    /// Unit gradient of the distance (zero at the pole).
    pub grad_r: Vector,
}

/// Quadrature value with an error estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

/// Neumaier-compensated sum, deterministic for a fixed input order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn sum_estimates(parts: &[Estimate]) -> Estimate {
    Estimate {
        value: compensated_sum(parts.iter().map(|e| e.value)),
        err: compensated_sum(parts.iter().map(|e| e.err)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Regular,
    Near,
    /// Contains the pole at these barycentric coordinates.
    Pole([f64; 4]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Domain {
    Cells,
    Facets,
}

/// Quadrature engine bound to a mesh and a pole.
pub struct Quadrature<'m> {
    mesh: &'m SimplicialImmersion,
    pole: Vector,
    points: usize,
    cell_kinds: Vec<Kind>,
    facet_kinds: Vec<Kind>,
    clearance: Option<f64>,
}

struct Simplex {
    verts: [Vector; 4],
    m: usize,
    volume: f64,
}

impl<'m> Quadrature<'m> {
    /// Engine for the mesh's own pole.
    pub fn new(mesh: &'m SimplicialImmersion) -> Self {
        Self::with_pole(mesh, mesh.pole())
    }

    pub fn with_pole(mesh: &'m SimplicialImmersion, pole: &Vector) -> Self {
        let mut q = Self {
            mesh,
            pole: *pole,
            points: mesh.dim() + 2,
            cell_kinds: Vec::new(),
            facet_kinds: Vec::new(),
            clearance: None,
        };
        let vertex_r: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|v| mesh.space().dist(v, pole))
            .collect();
        q.cell_kinds = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| q.classify(Domain::Cells, c, &vertex_r))
            .collect();
        q.facet_kinds = (0..mesh.boundary_facets().len())
            .into_par_iter()
            .map(|f| q.classify(Domain::Facets, f, &vertex_r))
            .collect();
        q.clearance = q.compute_clearance();
        q
    }

    pub fn mesh(&self) -> &SimplicialImmersion {
        self.mesh
    }

    pub fn pole(&self) -> &Vector {
        &self.pole
    }

    /// Number of Gauss points per collapsed direction of the main rule.
    pub fn points_per_direction(&self) -> usize {
        self.points
    }

    /// True when some cell contains the pole.
    pub fn pole_on_mesh(&self) -> bool {
        self.cell_kinds.iter().any(|k| matches!(k, Kind::Pole(_)))
    }

    /// Radius of a ball about the pole covered by the cones of the pole cells.
    pub fn clearance(&self) -> Option<f64> {
        self.clearance
    }

    fn indices(&self, domain: Domain, i: usize) -> &[usize] {
        match domain {
            Domain::Cells => self.mesh.cell(i),
            Domain::Facets => self.mesh.boundary_facets()[i].vertices(),
        }
    }

    fn simplex(&self, domain: Domain, i: usize) -> Simplex {
        let idx = self.indices(domain, i);
        let zero = Vector::zeros(self.mesh.space().coord_len());
        let mut verts = [zero; 4];
        for (j, &v) in idx.iter().enumerate() {
            verts[j] = *self.mesh.vertex(v);
        }
        let volume = match domain {
            Domain::Cells => self.mesh.volume(i),
            Domain::Facets => self.mesh.facet_volume(i),
        };
        Simplex {
            verts,
            m: idx.len() - 1,
            volume,
        }
    }

    fn chord(&self, a: &Vector, b: &Vector) -> f64 {
        let d = *a - *b;
        self.mesh.space().norm_sq(&d).max(0.0).sqrt()
    }

    fn diameter(&self, s: &Simplex) -> f64 {
        let mut d: f64 = 0.0;
        for a in 0..=s.m {
            for b in a + 1..=s.m {
                d = d.max(self.chord(&s.verts[a], &s.verts[b]));
            }
        }
        d
    }

    fn classify(&self, domain: Domain, i: usize, vertex_r: &[f64]) -> Kind {
        let s = self.simplex(domain, i);
        let idx = self.indices(domain, i);
        let diam = self.diameter(&s);
        let rmin = idx
            .iter()
            .map(|&v| vertex_r[v])
            .fold(f64::INFINITY, f64::min);
        if rmin - diam > 2.0 * diam {
            return Kind::Regular;
        }
        match self.pole_bary(&s, diam) {
            Some(b) => Kind::Pole(b),
            None => Kind::Near,
        }
    }

    /// Barycentric coordinates of the pole if it lies in the simplex.
    fn pole_bary(&self, s: &Simplex, diam: f64) -> Option<[f64; 4]> {
        let space = self.mesh.space();
        let m = s.m;
        let tol = 1e-10 * diam.max(1e-300);
        if m == 0 {
            return (space.dist(&s.verts[0], &self.pole) <= tol).then_some([1.0, 0.0, 0.0, 0.0]);
        }
        for (j, v) in s.verts[..=m].iter().enumerate() {
            if space.dist(v, &self.pole) <= tol {
                let mut b = [0.0; 4];
                b[j] = 1.0;
                return Some(b);
            }
        }
        let rows = space.coord_len();
        let cols = if space.is_flat() { m } else { m + 1 };
        let a = nalgebra::DMatrix::from_fn(rows, cols, |r, c| {
            if c < m {
                s.verts[c + 1][r] - s.verts[0][r]
            } else {
                -self.pole[r]
            }
        });
        let rhs = nalgebra::DVector::from_fn(rows, |r, _| {
            if space.is_flat() {
                self.pole[r] - s.verts[0][r]
            } else {
                -s.verts[0][r]
            }
        });
        let sol = a.clone().svd(true, true).solve(&rhs, 1e-14).ok()?;
        let resid = (&a * &sol - &rhs).norm();
        if resid > tol {
            return None;
        }
        let mut b = [0.0; 4];
        let mut sum = 0.0;
        for j in 0..m {
            b[j + 1] = sol[j];
            sum += sol[j];
        }
        b[0] = 1.0 - sum;
        if b[..=m].iter().any(|&x| x < -BARY_TOL) {
            return None;
        }
        for x in b[..=m].iter_mut() {
            if *x < BARY_TOL {
                *x = 0.0;
            }
        }
        let total: f64 = b[..=m].iter().sum();
        for x in b[..=m].iter_mut() {
            *x /= total;
        }
        Some(b)
    }

    fn compute_clearance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (c, kind) in self.cell_kinds.iter().enumerate() {
            if let Kind::Pole(beta) = kind {
                let s = self.simplex(Domain::Cells, c);
                for i in 0..=s.m {
                    if beta[i] <= BARY_TOL {
                        continue;
                    }
                    let h = beta[i] * s.m as f64 * s.volume / self.face_volume(&s, i);
                    best = Some(best.map_or(h, |b: f64| b.min(h)));
                }
            }
        }
        best
    }

    fn face_volume(&self, s: &Simplex, skip: usize) -> f64 {
        let face: Vec<&Vector> = (0..=s.m)
            .filter(|&j| j != skip)
            .map(|j| &s.verts[j])
            .collect();
        let m = face.len() - 1;
        if m == 0 {
            return 1.0;
        }
        let mut g = [[0.0; 3]; 3];
        for a in 0..m {
            for b in 0..m {
                let ea = *face[a + 1] - *face[0];
                let eb = *face[b + 1] - *face[0];
                g[a][b] = self.mesh.space().inner(&ea, &eb);
            }
        }
        let fact: f64 = (1..=m).map(|i| i as f64).product();
        small_det(&g, m).max(0.0).sqrt() / fact
    }

    #[inline]
    fn node(&self, s: &Simplex, bary: [f64; 4]) -> Node {
        let space = self.mesh.space();
        let mut x = Vector::zeros(space.coord_len());
        for j in 0..=s.m {
            x.axpy(bary[j], &s.verts[j]);
        }
        let x = space.project(&x);
        let (r, grad_r) = space.radial(&x, &self.pole);
        Node { bary, x, r, grad_r }
    }

    fn visit_rule<S: FnMut(Node, f64)>(
        &self,
        s: &Simplex,
        sub: &[[f64; 4]],
        frac: f64,
        rule: &SimplexRule,
        sink: &mut S,
    ) {
        for (lam, w) in &rule.points {
            let mut bary = [0.0; 4];
            for (j, corner) in sub.iter().enumerate().take(s.m + 1) {
                for (b, c) in bary.iter_mut().zip(corner.iter()) {
                    *b += lam[j] * c;
                }
            }
            sink(self.node(s, bary), w * frac * s.volume);
        }
    }

    fn apply_rule<F: Fn(&Node) -> f64>(
        &self,
        s: &Simplex,
        sub: &[[f64; 4]],
        frac: f64,
        rule: &SimplexRule,
        f: &F,
    ) -> f64 {
        let mut acc = 0.0;
        self.visit_rule(s, sub, frac, rule, &mut |n, w| acc += w * f(&n));
        acc
    }

    fn regular<F: Fn(&Node) -> f64>(&self, s: &Simplex, rules: &Rules, f: &F) -> Estimate {
        let corners = identity_corners();
        let hi = self.apply_rule(s, &corners, 1.0, &rules.hi, f);
        let lo = self.apply_rule(s, &corners, 1.0, &rules.lo, f);
        Estimate {
            value: hi,
            err: (hi - lo).abs(),
        }
    }

    fn adaptive<F: Fn(&Node) -> f64>(&self, s: &Simplex, rules: &Rules, f: &F) -> Estimate {
        let mut out = Estimate::default();
        for (corners, frac) in self.adaptive_leaves(s) {
            let hi = self.apply_rule(s, &corners, frac, &rules.hi, f);
            let lo = self.apply_rule(s, &corners, frac, &rules.lo, f);
            out.value += hi;
            out.err += (hi - lo).abs();
        }
        out
    }

    /// Bisection of a near-pole simplex until every piece is well separated.
    fn adaptive_leaves(&self, s: &Simplex) -> Vec<([[f64; 4]; 4], f64)> {
        let mut leaves = Vec::new();
        let mut stack = vec![(identity_corners(), 1.0f64, 0usize)];
        let space = self.mesh.space();
        while let Some((corners, frac, depth)) = stack.pop() {
            let pts: Vec<Vector> = corners[..=s.m].iter().map(|b| self.node(s, *b).x).collect();
            let mut diam: f64 = 0.0;
            let mut longest = (0, 1);
            for a in 0..=s.m {
                for b in a + 1..=s.m {
                    let d = self.chord(&pts[a], &pts[b]);
                    if d > diam {
                        diam = d;
                        longest = (a, b);
                    }
                }
            }
            let rmin = pts
                .iter()
                .map(|p| space.dist(p, &self.pole))
                .fold(f64::INFINITY, f64::min);
            if rmin - diam >= 2.0 * diam || depth >= MAX_DEPTH {
                leaves.push((corners, frac));
                continue;
            }
            let (a, b) = longest;
            let mut mid = [0.0; 4];
            for (t, (x, y)) in mid.iter_mut().zip(corners[a].iter().zip(corners[b].iter())) {
                *t = 0.5 * (x + y);
            }
            let mut left = corners;
            left[b] = mid;
            let mut right = corners;
            right[a] = mid;
            stack.push((left, 0.5 * frac, depth + 1));
            stack.push((right, 0.5 * frac, depth + 1));
        }
        leaves
    }

    /// Cone integral over the part of the simplex within `t <= T(y)` of the
    /// apex, where `T` is 1 (whole simplex) or set by a truncation radius.
    fn cone<F: Fn(&Node) -> f64>(
        &self,
        s: &Simplex,
        apex: &[f64; 4],
        rules: &ConeRules,
        truncate: Option<f64>,
        f: &F,
    ) -> Estimate {
        let mut hi_total = 0.0;
        let mut lo_total = 0.0;
        self.visit_cone(
            s,
            apex,
            rules,
            truncate,
            &mut |n, w| hi_total += w * f(&n),
            Some(&mut |n: Node, w: f64| lo_total += w * f(&n)),
        );
        Estimate {
            value: hi_total,
            err: (hi_total - lo_total).abs(),
        }
    }

    /// Feeds the nodes and weights of the cone rules to `hi` and `lo`.
    /// Weights include the radial factor `t^exponent`.
    fn visit_cone<H: FnMut(Node, f64), L: FnMut(Node, f64)>(
        &self,
        s: &Simplex,
        apex: &[f64; 4],
        rules: &ConeRules,
        truncate: Option<f64>,
        hi: &mut H,
        mut lo: Option<&mut L>,
    ) {
        let m = s.m;
        if m == 0 {
            hi(self.node(s, *apex), 1.0);
            if let Some(lo) = lo.as_mut() {
                lo(self.node(s, *apex), 1.0);
            }
            return;
        }
        let apex_x = self.node(s, *apex).x;
        for i in 0..=m {
            if apex[i] <= BARY_TOL {
                continue;
            }
            let scale = m as f64 * apex[i] * s.volume;
            let height = apex[i] * m as f64 * s.volume / self.face_volume(s, i);
            // Facet pieces as corner lists in cell barycentric coordinates.
            let mut corners = [[0.0; 4]; 3];
            let mut c = 0;
            for j in 0..=m {
                if j != i {
                    corners[c][j] = 1.0;
                    c += 1;
                }
            }
            let mut stack = vec![(corners, 1.0f64, 0usize)];
            while let Some((piece, frac, depth)) = stack.pop() {
                let pts: Vec<Vector> = piece[..m].iter().map(|b| self.node(s, *b).x).collect();
                let mut diam: f64 = 0.0;
                let mut longest = (0, 0);
                for a in 0..m {
                    for b in a + 1..m {
                        let d = self.chord(&pts[a], &pts[b]);
                        if d > diam {
                            diam = d;
                            longest = (a, b);
                        }
                    }
                }
                let near = pts
                    .iter()
                    .map(|p| self.chord(p, &apex_x))
                    .fold(f64::INFINITY, f64::min);
                let dist = height.max(near - diam);
                if diam > dist && depth < MAX_DEPTH {
                    let (a, b) = longest;
                    let mut mid = [0.0; 4];
                    for (t, (x, y)) in mid.iter_mut().zip(piece[a].iter().zip(piece[b].iter())) {
                        *t = 0.5 * (x + y);
                    }
                    let mut left = piece;
                    left[b] = mid;
                    let mut right = piece;
                    right[a] = mid;
                    stack.push((left, 0.5 * frac, depth + 1));
                    stack.push((right, 0.5 * frac, depth + 1));
                    continue;
                }
                for which in 0..2 {
                    let (rule_facet, radial) = if which == 0 {
                        (&rules.facet_hi, &rules.radial_hi)
                    } else {
                        (&rules.facet_lo, &rules.radial_lo)
                    };
                    if which == 1 && lo.is_none() {
                        continue;
                    }
                    for (lam, wy) in &rule_facet.points {
                        let mut y = [0.0; 4];
                        for (corner, l) in piece[..m].iter().zip(lam.iter()) {
                            for (yj, cj) in y.iter_mut().zip(corner.iter()) {
                                *yj += l * cj;
                            }
                        }
                        let t_max = match truncate {
                            None => 1.0,
                            Some(r0) => self.ray_truncation(s, apex, &apex_x, &y, r0),
                        };
                        if t_max <= 0.0 {
                            continue;
                        }
                        let outer = scale * frac * wy * t_max.powi(m as i32);
                        for (sn, ws) in radial.0.iter().zip(&radial.1) {
                            let t = t_max * sn;
                            let mut bary = [0.0; 4];
                            for j in 0..=m {
                                bary[j] = apex[j] + t * (y[j] - apex[j]);
                            }
                            let w = outer * ws * sn.powf(rules.exponent);
                            let node = self.node(s, bary);
                            if which == 0 {
                                hi(node, w);
                            } else if let Some(lo) = lo.as_mut() {
                                lo(node, w);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Ray parameter at which the distance to the pole reaches `r0`.
    fn ray_truncation(
        &self,
        s: &Simplex,
        apex: &[f64; 4],
        apex_x: &Vector,
        y: &[f64; 4],
        r0: f64,
    ) -> f64 {
        let space = self.mesh.space();
        let yx = self.node(s, *y).x;
        if space.is_flat() {
            let len = (yx - *apex_x).norm();
            return (r0 / len).min(1.0);
        }
        let dist_at = |t: f64| {
            let mut b = [0.0; 4];
            for j in 0..=s.m {
                b[j] = apex[j] + t * (y[j] - apex[j]);
            }
            self.node(s, b).r
        };
        if dist_at(1.0) <= r0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if dist_at(mid) < r0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn integrate<F>(&self, domain: Domain, exponent: f64, f: F) -> Result<Estimate>
    where
        F: Fn(usize, &Node) -> f64 + Sync,
    {
        let kinds = match domain {
            Domain::Cells => &self.cell_kinds,
            Domain::Facets => &self.facet_kinds,
        };
        if kinds.is_empty() {
            return Ok(Estimate::default());
        }
        let m = self.indices(domain, 0).len() - 1;
        let rules = Rules::new(m, self.points);
        let cone = if kinds.iter().any(|k| matches!(k, Kind::Pole(_))) && m > 0 {
            Some(ConeRules::new(m, self.points, exponent)?)
        } else {
            None
        };
        let parts: Vec<Estimate> = (0..kinds.len())
            .into_par_iter()
            .map(|i| {
                let s = self.simplex(domain, i);
                let g = |n: &Node| f(i, n);
                match kinds[i] {
                    Kind::Regular => self.regular(&s, &rules, &g),
                    Kind::Near => self.adaptive(&s, &rules, &g),
                    Kind::Pole(apex) => match &cone {
                        Some(c) => self.cone(&s, &apex, c, None, &g),
                        None => Estimate {
                            value: g(&self.node(&s, apex)),
                            err: 0.0,
                        },
                    },
                }
            })
            .collect();
        let total = sum_estimates(&parts);
        if !total.value.is_finite() {
            return Err(Error::NoConvergence(format!(
                "non-finite quadrature value (singular exponent {exponent})"
            )));
        }
        Ok(total)
    }

    /// Integral over all cells of `f(cell, node)`; `exponent` is the order of
    /// the pole singularity `r^{-exponent}` carried by `f`.
    pub fn cells<F>(&self, exponent: f64, f: F) -> Result<Estimate>
    where
        F: Fn(usize, &Node) -> f64 + Sync,
    {
        self.integrate(Domain::Cells, exponent, f)
    }

    /// Integral over the boundary facets of `f(facet, node)`.
    pub fn facets<F>(&self, exponent: f64, f: F) -> Result<Estimate>
    where
        F: Fn(usize, &Node) -> f64 + Sync,
    {
        self.integrate(Domain::Facets, exponent, f)
    }

    /// Calls `f(cell, nodes)` for every cell with the nodes and weights of the
    /// main rule; `exponent` is the pole singularity the integrands will carry.
    pub fn map_cell_nodes<T, F>(&self, exponent: f64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &[(Node, f64)]) -> T + Sync,
    {
        let m = self.mesh.dim();
        let rules = Rules::new(m, self.points);
        let cone = if self.pole_on_mesh() && m > 0 {
            Some(ConeRules::new(m, self.points, exponent)?)
        } else {
            None
        };
        Ok((0..self.cell_kinds.len())
            .into_par_iter()
            .map(|c| {
                let s = self.simplex(Domain::Cells, c);
                let mut nodes = Vec::with_capacity(rules.hi.points.len());
                let mut push = |n: Node, w: f64| nodes.push((n, w));
                match self.cell_kinds[c] {
                    Kind::Regular => {
                        self.visit_rule(&s, &identity_corners(), 1.0, &rules.hi, &mut push)
                    }
                    Kind::Near => {
                        for (corners, frac) in self.adaptive_leaves(&s) {
                            self.visit_rule(&s, &corners, frac, &rules.hi, &mut push);
                        }
                    }
                    Kind::Pole(apex) => match &cone {
                        Some(cr) => self.visit_cone(
                            &s,
                            &apex,
                            cr,
                            None,
                            &mut push,
                            None::<&mut fn(Node, f64)>,
                        ),
                        None => push(self.node(&s, apex), 1.0),
                    },
                }
                f(c, &nodes)
            })
            .collect())
    }

    /// Integrals of `f` over `{r < r0}` for each radius, which must not exceed
    /// [`Self::clearance`].
    pub fn cell_tails<F>(&self, exponent: f64, radii: &[f64], f: F) -> Result<Vec<Estimate>>
    where
        F: Fn(usize, &Node) -> f64 + Sync,
    {
        let m = self.mesh.dim();
        let cone = ConeRules::new(m, self.points, exponent)?;
        let poles: Vec<(usize, [f64; 4])> = self
            .cell_kinds
            .iter()
            .enumerate()
            .filter_map(|(c, k)| match k {
                Kind::Pole(b) => Some((c, *b)),
                _ => None,
            })
            .collect();
        radii
            .iter()
            .map(|&r0| {
                let parts: Vec<Estimate> = poles
                    .par_iter()
                    .map(|(c, apex)| {
                        let s = self.simplex(Domain::Cells, *c);
                        self.cone(&s, apex, &cone, Some(r0), &|n: &Node| f(*c, n))
                    })
                    .collect();
                Ok(sum_estimates(&parts))
            })
            .collect()
    }
}

fn identity_corners() -> [[f64; 4]; 4] {
    let mut c = [[0.0; 4]; 4];
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    c
}

struct Rules {
    hi: SimplexRule,
    lo: SimplexRule,
}

impl Rules {
    fn new(m: usize, n: usize) -> Self {
        Self {
            hi: simplex_rule(m, n),
            lo: simplex_rule(m, n - 1),
        }
    }
}

struct ConeRules {
    exponent: f64,
    radial_hi: (Vec<f64>, Vec<f64>),
    radial_lo: (Vec<f64>, Vec<f64>),
    facet_hi: SimplexRule,
    facet_lo: SimplexRule,
}

impl ConeRules {
    fn new(m: usize, n: usize, exponent: f64) -> Result<Self> {
        let beta = m as f64 - 1.0 - exponent;
        if beta <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "singular exponent {exponent} is not integrable on a {m}-dimensional neighborhood of the pole"
            )));
        }
        Ok(Self {
            exponent,
            radial_hi: gauss_jacobi(n, 0.0, beta),
            radial_lo: gauss_jacobi(n - 1, 0.0, beta),
            facet_hi: simplex_rule(m - 1, CONE_FACET_POINTS),
            facet_lo: simplex_rule(m - 1, CONE_FACET_POINTS - 4),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, GenParams};
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_jacobi(3, 0.0, 0.0);
        for deg in 0..=5 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn gauss_jacobi_singular_weight() {
        let (x, w) = gauss_jacobi(4, 0.0, -0.5);
        for deg in 0..=7 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((q - 1.0 / (deg as f64 + 0.5)).abs() < 1e-13, "deg {deg}");
        }
        let (x, w) = gauss_jacobi(3, 2.0, 1.5);
        // Beta(2 + 1, 1.5 + 1 + 1) = Gamma(3) Gamma(3.5) / Gamma(6.5)
        let exact = (libm::lgamma(3.0) + libm::lgamma(3.5) - libm::lgamma(6.5)).exp();
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x).sum();
        assert!((q - exact).abs() < 1e-14);
    }

    #[test]
    fn simplex_rules_integrate_monomials() {
        // Integral of x^a y^b over the unit triangle is a! b! / (a + b + 2)!, times 2 for normalization.
        let rule = simplex_rule(2, 4);
        let fact = |n: u32| (1..=n).map(|i| i as f64).product::<f64>();
        for a in 0..4u32 {
            for b in 0..(7 - a) {
                let q: f64 = rule
                    .points
                    .iter()
                    .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                    .sum();
                let exact = 2.0 * fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-14, "{a} {b}");
            }
        }
        let rule3 = simplex_rule(3, 5);
        let w: f64 = rule3.points.iter().map(|p| p.1).sum();
        assert!((w - 1.0).abs() < 1e-14);
        let q: f64 = rule3
            .points
            .iter()
            .map(|(l, w)| w * l[0] * l[1] * l[2] * l[3])
            .sum();
        assert!((q - 6.0 / fact(7)).abs() < 1e-15);
    }

    #[test]
    fn inverse_radius_on_disk() {
        let m = generate("flat_disk", &GenParams::new(1.0, 4)).unwrap();
        let q = Quadrature::new(&m);
        assert!(q.pole_on_mesh());
        let est = q.cells(1.0, |_, n| 1.0 / n.r).unwrap();
        // exact for the polygon: sum over boundary edges of the integral of 1/r over the wedge
        let mut exact = 0.0;
        for f in m.boundary_facets() {
            let (a, b) = (m.vertex(f.vertices()[0]), m.vertex(f.vertices()[1]));
            let area2 = (a[0] * b[1] - a[1] * b[0]).abs();
            let e = (*b - *a).norm();
            let h = area2 / e;
            // wedge integral = h * (asinh(s_b / h) - asinh(s_a / h)) with foot-point offsets s
            let d = (*b - *a) * (1.0 / e);
            let (sa, sb) = (a.dot(&d), b.dot(&d));
            exact += h * ((sb / h).asinh() - (sa / h).asinh());
        }
        assert!((est.value - exact).abs() < 1e-9, "{} vs {exact}", est.value);
        assert!((est.value - 2.0 * PI).abs() < 2e-2);
    }

    #[test]
    fn off_vertex_pole_and_area() {
        let m = generate(
            "flat_disk",
            &GenParams {
                pole: Some(vec![0.013, 0.021]),
                ..GenParams::new(1.0, 3)
            },
        )
        .unwrap();
        let q = Quadrature::new(&m);
        assert!(q.pole_on_mesh());
        let area = q.cells(0.0, |_, _| 1.0).unwrap();
        assert!((area.value - m.total_volume()).abs() < 1e-12);
        let a = q.cells(1.5, |_, n| n.r.powf(-1.5)).unwrap();
        let fine = crate::mesh::refine(&m).unwrap();
        let b = Quadrature::new(&fine)
            .cells(1.5, |_, n| n.r.powf(-1.5))
            .unwrap();
        assert!(
            (a.value - b.value).abs() < 1e-5 * b.value,
            "{} {}",
            a.value,
            b.value
        );
        assert!(a.err < 1e-4 * a.value);
    }

    #[test]
    fn tails_follow_power_law() {
        let m = generate("flat_disk", &GenParams::new(1.0, 3)).unwrap();
        let q = Quadrature::new(&m);
        let c = q.clearance().unwrap();
        let radii = [0.5 * c, 0.25 * c];
        let t = q.cell_tails(1.0, &radii, |_, n| 1.0 / n.r).unwrap();
        for (r0, e) in radii.iter().zip(&t) {
            assert!(
                (e.value - 2.0 * PI * r0).abs() < 1e-12,
                "{} {}",
                e.value,
                2.0 * PI * r0
            );
        }
    }

    #[test]
    fn ball_inverse_power() {
        let m = generate("flat_ball_3d", &GenParams::new(1.0, 2)).unwrap();
        let q = Quadrature::new(&m);
        let est = q.cells(2.5, |_, n| n.r.powf(-2.5)).unwrap();
        // 4 pi / 0.5 for the unit ball; the polyhedron is slightly smaller
        assert!(
            (est.value - 8.0 * PI).abs() / (8.0 * PI) < 0.05,
            "{}",
            est.value
        );
        let c = q.clearance().unwrap();
        let t = q
            .cell_tails(2.5, &[0.5 * c], |_, n| n.r.powf(-2.5))
            .unwrap();
        assert!((t[0].value - 8.0 * PI * (0.5 * c).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn hyperbolic_tails_match_closed_form() {
        let m = generate("hyperbolic_disk", &GenParams::new(1.0, 3)).unwrap();
        let q = Quadrature::new(&m);
        let c = q.clearance().unwrap();
        let r0 = 0.5 * c;
        let t = q.cell_tails(0.0, &[r0], |_, _| 1.0).unwrap();
        // chord cells are flat, so the tail is close to the geodesic disk area
        let exact = 2.0 * PI * (r0.cosh() - 1.0);
        assert!(
            (t[0].value - exact).abs() / exact < 1e-2,
            "{} {exact}",
            t[0].value
        );
    }

    #[test]
    fn facet_integral_is_perimeter() {
        let m = generate("flat_disk", &GenParams::new(2.0, 3)).unwrap();
        let q = Quadrature::new(&m);
        let p = q.facets(0.0, |_, _| 1.0).unwrap();
        let exact: f64 = (0..m.boundary_facets().len())
            .map(|f| m.facet_volume(f))
            .sum();
        assert!((p.value - exact).abs() < 1e-12);
    }

    #[test]
    fn near_cells_are_subdivided() {
        let m = generate("annulus", &GenParams::new(1.0, 1)).unwrap();
        let shifted = m.with_pole(&[0.49, 0.0]).unwrap();
        let q = Quadrature::new(&shifted);
        assert!(!q.pole_on_mesh());
        let est = q.cells(0.0, |_, n| 1.0 / n.r).unwrap();
        let fine = crate::mesh::refine(&shifted).unwrap();
        let est2 = Quadrature::new(&fine).cells(0.0, |_, n| 1.0 / n.r).unwrap();
        assert!(est.err < 1e-3);
        assert!((est.value - est2.value).abs() < 0.02);
    }

    /// Integral of `r^{-e}` over a triangle about an interior point, by summing
    /// `rho(theta)^{2-e} / (2-e)` over the angle subtended by each edge.
    fn angular_reference(v: &[[f64; 2]; 3], pole: [f64; 2], e: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..3 {
            let (p, q) = (v[i], v[(i + 1) % 3]);
            let steps = 100_000;
            let at = |t: f64| {
                [
                    p[0] + t * (q[0] - p[0]) - pole[0],
                    p[1] + t * (q[1] - p[1]) - pole[1],
                ]
            };
            for j in 0..steps {
                let (t0, t1) = (j as f64 / steps as f64, (j + 1) as f64 / steps as f64);
                let (a, b, mid) = (at(t0), at(t1), at(0.5 * (t0 + t1)));
                let dtheta = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
                let rho = (mid[0] * mid[0] + mid[1] * mid[1]).sqrt();
                total += rho.powf(2.0 - e) / (2.0 - e) * dtheta;
            }
        }
        total.abs()
    }

    #[test]
    fn interior_pole_matches_angular_reference() {
        let s = crate::ambient::AmbientSpace::euclidean(2).unwrap();
        let v = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.9]];
        let m = SimplicialImmersion::build(
            s,
            v.iter().map(|p| p.to_vec()).collect(),
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        for pole in [[0.3, 0.3], [0.0, 0.0], [0.5, 0.0], [0.3, 0.01]] {
            let mp = m.with_pole(&pole).unwrap();
            let q = Quadrature::new(&mp);
            for e in [1.0, 1.5] {
                let est = q.cells(e, |_, n| n.r.powf(-e)).unwrap();
                let exact = angular_reference(&v, pole, e);
                assert!(
                    (est.value - exact).abs() < 1e-8 * exact,
                    "{pole:?} {e}: {} vs {exact}",
                    est.value
                );
            }
        }
    }
}
