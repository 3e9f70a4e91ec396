//! Simplicial immersions of dimension `k <= 3` in a Euclidean or hyperbolic
//! ambient space.
//!
//! Hyperbolic cells are the affine simplices spanned by hyperboloid chords; their
//! metric is the restriction of the Minkowski form to the chord span.

mod generate;
mod io;
mod refine;

pub use generate::{generate, GenParams, GENERATORS};
pub use io::{mesh_to_string, parse_mesh, read_mesh, write_mesh};
pub use refine::{prolong, refine, refine_with_map, EdgeMidpoints};

use crate::ambient::AmbientSpace;
use crate::error::{Error, Result};
use crate::linalg::{small_det, small_spd_inverse, small_sym_eigenvalues, Small, Vector};

/// Exact surface that refinement midpoints are projected back onto.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    Flat,
    Sphere { center: Vector, radius: f64 },
}

/// Where the mean curvature vector of the immersion comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeanCurvature {
    /// Minimal immersion, `H = 0` identically.
    Zero,
    /// Lumped-mass Laplacian of the coordinate functions (Euclidean only).
    Discrete,
    /// Round `k`-sphere of the given center and radius: `H = -k (x - c) / R^2`.
    Sphere { center: Vector, radius: f64 },
    /// No provider attached.
    Missing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFacet {
    vertices: [usize; 3],
    /// Cell containing the facet.
    pub cell: usize,
    /// Local index in the cell of the vertex opposite the facet.
    pub opposite: usize,
    k: usize,
}

impl BoundaryFacet {
    pub fn vertices(&self) -> &[usize] {
        &self.vertices[..self.k]
    }
}

/// Chord frame of one cell: `edges[j] = v_{j+1} - v_0` and the induced metric.
#[derive(Clone, Copy, Debug)]
pub struct CellFrame {
    pub origin: Vector,
    pub edges: [Vector; 3],
    pub gram: Small,
    pub gram_inv: Small,
    pub volume: f64,
}

#[derive(Clone, Debug)]
pub struct SimplicialImmersion {
    space: AmbientSpace,
    k: usize,
    vertices: Vec<Vector>,
    cells: Vec<usize>,
    boundary: Vec<BoundaryFacet>,
    volumes: Vec<f64>,
    pole: Vector,
    surface: Surface,
    mean_curvature: MeanCurvature,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl SimplicialImmersion {
    /// Validates and builds an immersion with the pole at the ambient origin.
    pub fn build(
        space: AmbientSpace,
        vertices: Vec<Vec<f64>>,
        cells: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let pole = space.origin();
        let verts = vertices
            .iter()
            .map(|v| space.point(v).map(|p| *p.coords()))
            .collect::<Result<Vec<_>>>()?;
        let k = cells
            .first()
            .map(|c| c.len().saturating_sub(1))
            .unwrap_or(0);
        let mut flat = Vec::with_capacity(cells.len() * (k + 1));
        for (i, c) in cells.iter().enumerate() {
            if c.len() != k + 1 {
                return Err(Error::InvalidMesh(format!(
                    "cell {i} has {} vertices, expected {}",
                    c.len(),
                    k + 1
                )));
            }
            flat.extend_from_slice(c);
        }
        let default_h = if space.is_flat() {
            MeanCurvature::Discrete
        } else if k == space.dim() {
            MeanCurvature::Zero
        } else {
            MeanCurvature::Missing
        };
        Self::from_parts(space, k, verts, flat, pole, Surface::Flat, default_h)
    }

    pub(crate) fn from_parts(
        space: AmbientSpace,
        k: usize,
        vertices: Vec<Vector>,
        cells: Vec<usize>,
        pole: Vector,
        surface: Surface,
        mean_curvature: MeanCurvature,
    ) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(Error::InvalidMesh(format!(
                "intrinsic dimension {k} not in 1..=3"
            )));
        }
        if k > space.dim() {
            return Err(Error::InvalidMesh(format!(
                "intrinsic dimension {k} exceeds ambient dimension {}",
                space.dim()
            )));
        }
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        if vertices.len() < k + 1 {
            return Err(Error::InvalidMesh(format!(
                "{} vertices cannot carry a {k}-simplex",
                vertices.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&i| i >= vertices.len()) {
            return Err(Error::InvalidMesh(format!(
                "vertex index {bad} out of range"
            )));
        }
        space.point(pole.as_slice())?;
        let mut mesh = Self {
            space,
            k,
            vertices,
            cells,
            boundary: Vec::new(),
            volumes: Vec::new(),
            pole,
            surface,
            mean_curvature,
        };
        mesh.validate_cells()?;
        mesh.boundary = mesh.extract_boundary()?;
        Ok(mesh)
    }

    fn validate_cells(&mut self) -> Result<()> {
        let k = self.k;
        let mut volumes = Vec::with_capacity(self.num_cells());
        for c in 0..self.num_cells() {
            let cell = self.cell(c);
            for i in 0..=k {
                if cell[i + 1..].contains(&cell[i]) {
                    return Err(Error::DegenerateCell {
                        cell: c,
                        reason: format!("repeated vertex {}", cell[i]),
                    });
                }
            }
            let frame = self.raw_frame(c);
            let ev = small_sym_eigenvalues(&frame.gram, k);
            let (lo, hi) = (ev[0], ev[k - 1]);
            if !(lo > 1e-14 * hi) || !hi.is_finite() {
                return Err(Error::DegenerateCell {
                    cell: c,
                    reason: format!("Gram eigenvalues [{lo:e}, {hi:e}]"),
                });
            }
            let det = small_det(&frame.gram, k);
            volumes.push(det.sqrt() / factorial(k));
        }
        self.volumes = volumes;
        Ok(())
    }

    fn extract_boundary(&self) -> Result<Vec<BoundaryFacet>> {
        let k = self.k;
        let mut facets: Vec<([usize; 3], usize, usize)> =
            Vec::with_capacity(self.num_cells() * (k + 1));
        for c in 0..self.num_cells() {
            let cell = self.cell(c);
            for opp in 0..=k {
                let mut key = [usize::MAX; 3];
                let mut m = 0;
                for (j, &v) in cell.iter().enumerate() {
                    if j != opp {
                        key[m] = v;
                        m += 1;
                    }
                }
                key[..k].sort_unstable();
                facets.push((key, c, opp));
            }
        }
        facets.sort_unstable();
        let mut out = Vec::new();
        let mut i = 0;
        while i < facets.len() {
            let mut j = i + 1;
            while j < facets.len() && facets[j].0 == facets[i].0 {
                j += 1;
            }
            match j - i {
                1 => {
                    let (key, cell, opposite) = facets[i];
                    out.push(BoundaryFacet {
                        vertices: key,
                        cell,
                        opposite,
                        k,
                    });
                }
                2 => {}
                count => {
                    return Err(Error::NonManifoldFacet {
                        facet: facets[i].0[..k].to_vec(),
                        count,
                    })
                }
            }
            i = j;
        }
        out.sort_by_key(|f| (f.cell, f.opposite));
        Ok(out)
    }

    fn raw_frame(&self, c: usize) -> CellFrame {
        let cell = self.cell(c);
        let origin = self.vertices[cell[0]];
        let zero = Vector::zeros(origin.len());
        let mut edges = [zero; 3];
        for j in 0..self.k {
            edges[j] = self.vertices[cell[j + 1]] - origin;
        }
        let mut gram = [[0.0; 3]; 3];
        for a in 0..self.k {
            for b in a..self.k {
                let g = self.space.inner(&edges[a], &edges[b]);
                gram[a][b] = g;
                gram[b][a] = g;
            }
        }
        CellFrame {
            origin,
            edges,
            gram,
            gram_inv: [[0.0; 3]; 3],
            volume: 0.0,
        }
    }

    /// Chord frame, induced Gram matrix and its inverse for cell `c`.
    pub fn frame(&self, c: usize) -> CellFrame {
        let mut f = self.raw_frame(c);
        f.gram_inv = small_spd_inverse(&f.gram, self.k).expect("validated cell");
        f.volume = self.volumes[c];
        f
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.k + 1)
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Vector {
        &self.vertices[i]
    }

    #[inline]
    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.k + 1;
        &self.cells[c * s..(c + 1) * s]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.chunks_exact(self.k + 1)
    }

    pub fn volume(&self, c: usize) -> f64 {
        self.volumes[c]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary.is_empty()
    }

    /// Marks every vertex lying on a boundary facet.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for f in &self.boundary {
            for &v in f.vertices() {
                mask[v] = true;
            }
        }
        mask
    }

    pub fn pole(&self) -> &Vector {
        &self.pole
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    pub fn mean_curvature_source(&self) -> &MeanCurvature {
        &self.mean_curvature
    }

    /// Same mesh with a different pole.
    pub fn with_pole(&self, pole: &[f64]) -> Result<Self> {
        let p = self.space.point(pole)?;
        let mut m = self.clone();
        m.pole = *p.coords();
        Ok(m)
    }

    pub fn with_mean_curvature(&self, h: MeanCurvature) -> Result<Self> {
        if h == MeanCurvature::Discrete && !self.space.is_flat() {
            return Err(Error::Unsupported(
                "discrete mean curvature needs a Euclidean ambient".into(),
            ));
        }
        let mut m = self.clone();
        m.mean_curvature = h;
        Ok(m)
    }

    /// Longest edge length (ambient chord norm).
    pub fn mesh_size(&self) -> f64 {
        let mut h: f64 = 0.0;
        for cell in self.cells() {
            for a in 0..cell.len() {
                for b in a + 1..cell.len() {
                    let e = self.vertices[cell[a]] - self.vertices[cell[b]];
                    h = h.max(self.space.norm_sq(&e).max(0.0).sqrt());
                }
            }
        }
        h
    }

    /// Point of cell `c` with barycentric coordinates `bary` (chord simplex).
    #[inline]
    pub fn cell_point(&self, c: usize, bary: &[f64]) -> Vector {
        let cell = self.cell(c);
        let mut x = Vector::zeros(self.space.coord_len());
        for (j, &v) in cell.iter().enumerate() {
            x.axpy(bary[j], &self.vertices[v]);
        }
        x
    }

    /// Outward unit conormal of boundary facet `f`, evaluated at the ambient
    /// point `at` (which only matters in hyperbolic space).
    pub fn conormal_at(&self, f: usize, at: &Vector) -> Vector {
        let facet = &self.boundary[f];
        let cell = self.cell(facet.cell);
        let verts = facet.vertices();
        let base = self.vertices[verts[0]];
        let tangent = |v: Vector| self.space.project_tangent(at, &v);
        let mut basis: Vec<Vector> = Vec::with_capacity(2);
        for &v in &verts[1..] {
            let mut e = tangent(self.vertices[v] - base);
            for b in &basis {
                let c = self.space.inner(&e, b);
                e.axpy(-c, b);
            }
            let n = self.space.norm_sq(&e).max(0.0).sqrt();
            basis.push(e * (1.0 / n));
        }
        let mut w = tangent(self.vertices[cell[facet.opposite]] - base);
        for b in &basis {
            let c = self.space.inner(&w, b);
            w.axpy(-c, b);
        }
        let n = self.space.norm_sq(&w).max(0.0).sqrt();
        w * (-1.0 / n)
    }

    /// Midpoint of boundary facet `f`, projected onto the ambient space.
    pub fn facet_center(&self, f: usize) -> Vector {
        let verts = self.boundary[f].vertices();
        let mut x = Vector::zeros(self.space.coord_len());
        for &v in verts {
            x.axpy(1.0 / verts.len() as f64, &self.vertices[v]);
        }
        self.space.project(&x)
    }

    /// Outward unit conormal of boundary facet `f` at its center.
    pub fn conormal(&self, f: usize) -> Result<Vector> {
        if f >= self.boundary.len() {
            return Err(Error::InvalidParameter(format!(
                "boundary facet index {f} out of range ({} facets)",
                self.boundary.len()
            )));
        }
        Ok(self.conormal_at(f, &self.facet_center(f)))
    }

    /// Conormal of the facet with the given vertex set; fails for interior facets.
    pub fn conormal_of(&self, facet: &[usize]) -> Result<Vector> {
        let mut key = facet.to_vec();
        key.sort_unstable();
        match self
            .boundary
            .iter()
            .position(|f| f.vertices() == key.as_slice())
        {
            Some(i) => self.conormal(i),
            None => Err(Error::InteriorFacet(key)),
        }
    }

    /// (k-1)-volume of boundary facet `f`.
    pub fn facet_volume(&self, f: usize) -> f64 {
        let verts = self.boundary[f].vertices();
        let m = verts.len() - 1;
        if m == 0 {
            return 1.0;
        }
        let base = self.vertices[verts[0]];
        let edges: Vec<Vector> = verts[1..]
            .iter()
            .map(|&v| self.vertices[v] - base)
            .collect();
        let mut g = [[0.0; 3]; 3];
        for a in 0..m {
            for b in 0..m {
                g[a][b] = self.space.inner(&edges[a], &edges[b]);
            }
        }
        small_det(&g, m).max(0.0).sqrt() / factorial(m)
    }

    /// Vertex adjacency lists (sorted, without self loops).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices()];
        for cell in self.cells() {
            for &a in cell {
                for &b in cell {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    /// Isometric copy with all coordinates multiplied by `s` (Euclidean only).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !self.space.is_flat() {
            return Err(Error::Unsupported("scaling a hyperbolic mesh".into()));
        }
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor {s}")));
        }
        let vertices = self.vertices.iter().map(|v| *v * s).collect();
        let scale_surface = |c: Vector, r: f64| (c * s, r * s);
        let surface = match self.surface {
            Surface::Flat => Surface::Flat,
            Surface::Sphere { center, radius } => {
                let (center, radius) = scale_surface(center, radius);
                Surface::Sphere { center, radius }
            }
        };
        let h = match self.mean_curvature {
            MeanCurvature::Sphere { center, radius } => {
                let (center, radius) = scale_surface(center, radius);
                MeanCurvature::Sphere { center, radius }
            }
            other => other,
        };
        Self::from_parts(
            self.space,
            self.k,
            vertices,
            self.cells.clone(),
            self.pole * s,
            surface,
            h,
        )
    }
}
