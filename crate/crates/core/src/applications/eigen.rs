//! First Dirichlet eigenvalue of the P1 Laplace-Beltrami operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, pcg, CsrMatrix};
use crate::mesh::SimplicialImmersion;
use crate::operators::assemble;

/// Required relative residual `|K u - lambda M u| / |lambda M u|`.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

const BLOCK: usize = 4;
const MAX_SWEEPS: usize = 400;
const SOLVE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Vertex values, zero on the boundary, unit mass norm, nonnegative sum.
    pub vector: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
}

pub fn first_eigenvalue(mesh: &SimplicialImmersion) -> Result<f64> {
    Ok(first_eigenpair(mesh)?.lambda)
}

/// Smallest eigenpair of `K u = lambda M u` on interior vertices, by block
/// inverse iteration with Rayleigh-Ritz projection.
pub fn first_eigenpair(mesh: &SimplicialImmersion) -> Result<Eigenpair> {
    if !mesh.has_boundary() {
        return Err(Error::EmptyBoundary(
            "the Dirichlet problem needs a boundary".into(),
        ));
    }
    let boundary = mesh.boundary_vertex_mask();
    let interior: Vec<usize> = (0..mesh.num_vertices()).filter(|&i| !boundary[i]).collect();
    if interior.is_empty() {
        return Err(Error::InvalidMesh("no interior vertices".into()));
    }
    let ops = assemble(mesh);
    let k = ops.stiffness.principal_submatrix(&interior);
    let m = ops.mass.principal_submatrix(&interior);
    let (lambda, u, residual, sweeps) = smallest_pair(&k, &m)?;
    let mut vector = vec![0.0; mesh.num_vertices()];
    for (&i, &v) in interior.iter().zip(&u) {
        vector[i] = v;
    }
    Ok(Eigenpair {
        lambda,
        vector,
        residual,
        sweeps,
    })
}

/// Smallest generalized eigenpair of SPD `(k, m)`.
pub fn smallest_pair(k: &CsrMatrix, m: &CsrMatrix) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = k.dim();
    let p = BLOCK.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut q: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..n)
                .map(|_| {
                    if j == 0 {
                        1.0
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut theta = vec![1.0; p];
    let mut last_residual = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        let mut y = Vec::with_capacity(p);
        for (qj, &t) in q.iter().zip(&theta) {
            let b = m.mul_vec(qj);
            let mut x: Vec<f64> = qj.iter().map(|v| v / t).collect();
            pcg(k, &b, &mut x, SOLVE_TOL, 20 * n + 100)?;
            y.push(x);
        }
        m_orthonormalize(m, &mut y, &mut rng);
        let (vals, vecs) = ritz(k, m, &y)?;
        q = (0..p)
            .map(|j| {
                let mut v = vec![0.0; n];
                for (i, yi) in y.iter().enumerate() {
                    let c = vecs[(i, j)];
                    v.iter_mut().zip(yi).for_each(|(a, b)| *a += c * b);
                }
                v
            })
            .collect();
        theta = vals;
        let u = &q[0];
        let lambda = theta[0];
        let ku = k.mul_vec(u);
        let mu = m.mul_vec(u);
        let r: Vec<f64> = ku.iter().zip(&mu).map(|(a, b)| a - lambda * b).collect();
        let residual = norm2(&r) / (lambda * norm2(&mu));
        if residual <= 1e-2 * EIGEN_RESIDUAL
            || (residual <= EIGEN_RESIDUAL && residual >= 0.5 * last_residual)
        {
            return finish(k, m, q.swap_remove(0), lambda, residual, sweep);
        }
        last_residual = residual;
    }
    Err(Error::NoConvergence(format!(
        "inverse iteration: residual {last_residual:e} after {MAX_SWEEPS} sweeps"
    )))
}

fn finish(
    k: &CsrMatrix,
    m: &CsrMatrix,
    mut u: Vec<f64>,
    lambda: f64,
    residual: f64,
    sweeps: usize,
) -> Result<(f64, Vec<f64>, f64, usize)> {
    let rq = k.quad_form(&u) / m.quad_form(&u);
    if (rq - lambda).abs() > 1e-10 * lambda {
        return Err(Error::NoConvergence(format!(
            "Rayleigh quotient {rq} disagrees with eigenvalue {lambda}"
        )));
    }
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((lambda, u, residual, sweeps))
}

/// Modified Gram-Schmidt in the `m` inner product; dependent columns are
/// replaced by random ones.
fn m_orthonormalize(m: &CsrMatrix, y: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for j in 0..y.len() {
        for attempt in 0..3 {
            for i in 0..j {
                let mi = m.mul_vec(&y[i]);
                let c = dot(&y[j], &mi);
                let (head, tail) = y.split_at_mut(j);
                tail[0]
                    .iter_mut()
                    .zip(&head[i])
                    .for_each(|(a, b)| *a -= c * b);
            }
            let nrm = m.quad_form(&y[j]).max(0.0).sqrt();
            if nrm > 1e-10 || attempt == 2 {
                y[j].iter_mut().for_each(|v| *v /= nrm);
                break;
            }
            y[j].iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
    }
}

/// Ritz values (ascending) and coefficient vectors of an m-orthonormal block.
fn ritz(k: &CsrMatrix, m: &CsrMatrix, y: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let p = y.len();
    let ky: Vec<Vec<f64>> = y.iter().map(|v| k.mul_vec(v)).collect();
    let my: Vec<Vec<f64>> = y.iter().map(|v| m.mul_vec(v)).collect();
    let a = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
    let b = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &my[j]) + dot(&y[j], &my[i])));
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::NoConvergence("Ritz block lost mass-orthogonality".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::NoConvergence("singular Ritz block".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let w = l_inv.transpose() * &eig.eigenvectors;
    let vecs = DMatrix::from_fn(p, p, |i, j| w[(i, order[j])]);
    Ok((vals, vecs))
}
