use std::collections::HashMap;

use super::{SimplicialImmersion, Surface};
use crate::error::Result;
use crate::linalg::Vector;

/// Parent edge `(a, b)` of every vertex created by a refinement, in order of
/// creation. New vertex `i` has index `old_vertex_count + i`.
pub type EdgeMidpoints = Vec<(usize, usize)>;

/// Splits every cell at its edge midpoints.
pub fn refine(mesh: &SimplicialImmersion) -> Result<SimplicialImmersion> {
    refine_with_map(mesh).map(|(m, _)| m)
}

/// Like [`refine`], also returning the parent edge of each new vertex so that
/// P1 fields can be prolonged.
pub fn refine_with_map(mesh: &SimplicialImmersion) -> Result<(SimplicialImmersion, EdgeMidpoints)> {
    let k = mesh.dim();
    let space = *mesh.space();
    let mut vertices: Vec<Vector> = mesh.vertices().to_vec();
    let mut edges: EdgeMidpoints = Vec::new();
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let surface = *mesh.surface();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector>| -> usize {
        let key = (a.min(b), a.max(b));
        *lookup.entry(key).or_insert_with(|| {
            let mut m = (vertices[a] + vertices[b]) * 0.5;
            if let Surface::Sphere { center, radius } = surface {
                let d = m - center;
                m = center + d * (radius / d.norm());
            }
            m = space.project(&m);
            vertices.push(m);
            edges.push(key);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(mesh.num_cells() * (1 << k) * (k + 1));
    for cell in mesh.cells() {
        match k {
            1 => {
                let m = midpoint(cell[0], cell[1], &mut vertices);
                cells.extend_from_slice(&[cell[0], m, m, cell[1]]);
            }
            2 => {
                let [a, b, c] = [cell[0], cell[1], cell[2]];
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                cells.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, c, ab, bc, ca]);
            }
            _ => {
                let x = [cell[0], cell[1], cell[2], cell[3]];
                let mut m = [[0usize; 4]; 4];
                for i in 0..4 {
                    for j in i + 1..4 {
                        m[i][j] = midpoint(x[i], x[j], &mut vertices);
                        m[j][i] = m[i][j];
                    }
                }
                // Bey's subdivision, interior octahedron split along x02-x13.
                let children = [
                    [x[0], m[0][1], m[0][2], m[0][3]],
                    [m[0][1], x[1], m[1][2], m[1][3]],
                    [m[0][2], m[1][2], x[2], m[2][3]],
                    [m[0][3], m[1][3], m[2][3], x[3]],
                    [m[0][1], m[0][2], m[0][3], m[1][3]],
                    [m[0][1], m[0][2], m[1][2], m[1][3]],
                    [m[0][2], m[0][3], m[1][3], m[2][3]],
                    [m[0][2], m[1][2], m[1][3], m[2][3]],
                ];
                for c in children {
                    cells.extend_from_slice(&c);
                }
            }
        }
    }
    let refined = SimplicialImmersion::from_parts(
        space,
        k,
        vertices,
        cells,
        *mesh.pole(),
        surface,
        *mesh.mean_curvature_source(),
    )?;
    Ok((refined, edges))
}

/// Prolongs vertex values to a refined mesh by linear interpolation on edges.
pub fn prolong(values: &[f64], edges: &EdgeMidpoints) -> Vec<f64> {
    let mut out = values.to_vec();
    out.extend(edges.iter().map(|&(a, b)| 0.5 * (values[a] + values[b])));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, GenParams};

    #[test]
    fn cell_counts_multiply() {
        let disk = generate("flat_disk", &GenParams::new(1.0, 2)).unwrap();
        let r = refine(&disk).unwrap();
        assert_eq!(r.num_cells(), 4 * disk.num_cells());
        assert!((r.total_volume() - disk.total_volume()).abs() < 1e-12);
        let ball = generate("flat_ball_3d", &GenParams::new(1.0, 1)).unwrap();
        let rb = refine(&ball).unwrap();
        assert_eq!(rb.num_cells(), 8 * ball.num_cells());
        assert!((rb.total_volume() - ball.total_volume()).abs() < 1e-12);
    }

    #[test]
    fn segment_refined_twice() {
        let s = generate("segment", &GenParams::new(1.0, 2)).unwrap();
        let r = refine(&refine(&s).unwrap()).unwrap();
        assert_eq!(r.num_cells(), 4 * s.num_cells());
        assert!((r.total_volume() - s.total_volume()).abs() < 1e-12);
    }

    #[test]
    fn sphere_midpoints_reprojected() {
        let s = generate("sphere", &GenParams::new(1.0, 1)).unwrap();
        let r = refine(&s).unwrap();
        for v in r.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperbolic_midpoints_on_hyperboloid() {
        let h = generate("hyperbolic_disk", &GenParams::new(1.0, 1)).unwrap();
        let r = refine(&h).unwrap();
        for v in r.vertices() {
            assert!((h.space().norm_sq(v) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prolongation_reproduces_affine() {
        let disk = generate("flat_disk", &GenParams::new(1.0, 1)).unwrap();
        let f: Vec<f64> = disk
            .vertices()
            .iter()
            .map(|v| 1.0 + 2.0 * v[0] - v[1])
            .collect();
        let (r, map) = refine_with_map(&disk).unwrap();
        let g = prolong(&f, &map);
        for (v, val) in r.vertices().iter().zip(&g) {
            assert!((1.0 + 2.0 * v[0] - v[1] - val).abs() < 1e-14);
        }
    }
}
