use std::f64::consts::PI;

use super::{MeanCurvature, SimplicialImmersion, Surface};
use crate::ambient::AmbientSpace;
use crate::error::{Error, Result};
use crate::linalg::Vector;

pub const GENERATORS: [&str; 7] = [
    "flat_disk",
    "flat_ball_3d",
    "sphere",
    "spherical_cap",
    "annulus",
    "segment",
    "hyperbolic_disk",
];

/// Generator parameters. Unset optional fields take per-generator defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub radius: f64,
    pub level: u32,
    /// Ambient dimension `n`.
    pub ambient_dim: Option<usize>,
    /// Pole coordinates; defaults to the generator's center (cap: apex).
    pub pole: Option<Vec<f64>>,
    /// Annulus inner radius.
    pub inner_radius: Option<f64>,
    /// Spherical cap polar half-angle in radians.
    pub angle: Option<f64>,
    /// Segment length.
    pub length: Option<f64>,
    /// Segment distance from the pole's axis.
    pub offset: f64,
    /// Attach the closed-form mean curvature to sphere meshes.
    pub analytic_h: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            radius: 1.0,
            level: 3,
            ambient_dim: None,
            pole: None,
            inner_radius: None,
            angle: None,
            length: None,
            offset: 0.0,
            analytic_h: false,
        }
    }
}

impl GenParams {
    pub fn new(radius: f64, level: u32) -> Self {
        Self {
            radius,
            level,
            ..Self::default()
        }
    }

    /// Parses `key=value` pairs such as `R=1,level=6,pole=0.1;0`.
    pub fn parse_pairs<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut p = Self::default();
        for pair in pairs {
            let pair = pair.trim();
            if pair.is_empty() {
                continue;
            }
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{pair}'")))?;
            let num = |v: &str| -> Result<f64> {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("invalid number '{v}' for '{key}'")))
            };
            match key.trim() {
                "R" | "radius" => p.radius = num(value)?,
                "level" | "l" => {
                    p.level = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("invalid level '{value}'")))?
                }
                "n" => {
                    p.ambient_dim = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| Error::Parse(format!("invalid dimension '{value}'")))?,
                    )
                }
                "pole" => p.pole = Some(value.split(';').map(num).collect::<Result<Vec<_>>>()?),
                "inner" => p.inner_radius = Some(num(value)?),
                "angle" => p.angle = Some(num(value)?),
                "length" => p.length = Some(num(value)?),
                "offset" => p.offset = num(value)?,
                "hmean" => match value.trim() {
                    "analytic" => p.analytic_h = true,
                    "discrete" => p.analytic_h = false,
                    other => return Err(Error::Parse(format!("unknown hmean '{other}'"))),
                },
                other => {
                    return Err(Error::Parse(format!(
                        "unknown generator parameter '{other}'"
                    )))
                }
            }
        }
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.level > 10 {
            return Err(Error::InvalidParameter(format!(
                "level {} exceeds 10",
                self.level
            )));
        }
        Ok(())
    }
}

/// Builds one of the named generator meshes.
pub fn generate(name: &str, params: &GenParams) -> Result<SimplicialImmersion> {
    params.check()?;
    let mesh = match name {
        "flat_disk" => flat_disk(params),
        "flat_ball_3d" => flat_ball(params),
        "sphere" => sphere(params),
        "spherical_cap" => spherical_cap(params),
        "annulus" => annulus(params),
        "segment" => segment(params),
        "hyperbolic_disk" => hyperbolic_disk(params),
        other => return Err(Error::UnsupportedGenerator(other.to_string())),
    }?;
    match &params.pole {
        Some(p) => mesh.with_pole(p),
        None => Ok(mesh),
    }
}

fn ambient_dim(params: &GenParams, min: usize) -> Result<usize> {
    let n = params.ambient_dim.unwrap_or(min);
    if n < min {
        return Err(Error::InvalidParameter(format!(
            "ambient dimension {n} below the generator minimum {min}"
        )));
    }
    Ok(n)
}

fn embed(n: usize, xs: &[f64]) -> Vector {
    let mut v = Vector::zeros(n);
    for (i, x) in xs.iter().enumerate() {
        v[i] = *x;
    }
    v
}

/// Hexagonal lattice triangulation of the unit disk with `6 N^2` triangles,
/// `N = 2^level`, mapped radially so that the hexagon boundary lands on the
/// unit circle. Returns planar points and triangles; index 0 is the center.
fn hex_disk(level: u32) -> (Vec<[f64; 2]>, Vec<usize>) {
    let n = 1i64 << level;
    let inside = |i: i64, j: i64| i.abs() <= n && j.abs() <= n && (i + j).abs() <= n;
    let side = (2 * n + 1) as usize;
    let slot = |i: i64, j: i64| ((i + n) as usize) * side + (j + n) as usize;
    let mut index = vec![usize::MAX; side * side];
    let mut points = Vec::new();
    let h = 1.0 / n as f64;
    let s3 = 3f64.sqrt();
    let normals = [[s3 / 2.0, 0.5], [0.0, 1.0], [-s3 / 2.0, 0.5]];
    let mut push = |i: i64, j: i64, index: &mut Vec<usize>| {
        let p = [(i as f64 + 0.5 * j as f64) * h, (0.5 * s3 * j as f64) * h];
        let len = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let q = if len == 0.0 {
            [0.0, 0.0]
        } else {
            let hex = normals
                .iter()
                .map(|m| (p[0] * m[0] + p[1] * m[1]).abs())
                .fold(0.0, f64::max)
                / (s3 / 2.0);
            [p[0] * hex / len, p[1] * hex / len]
        };
        index[slot(i, j)] = points.len();
        points.push(q);
    };
    push(0, 0, &mut index);
    for i in -n..=n {
        for j in -n..=n {
            if (i, j) != (0, 0) && inside(i, j) {
                push(i, j, &mut index);
            }
        }
    }
    let mut tris = Vec::new();
    for i in -n..n {
        for j in -n..n {
            if inside(i, j) && inside(i + 1, j) && inside(i, j + 1) {
                tris.extend_from_slice(&[
                    index[slot(i, j)],
                    index[slot(i + 1, j)],
                    index[slot(i, j + 1)],
                ]);
            }
            if inside(i + 1, j) && inside(i + 1, j + 1) && inside(i, j + 1) {
                tris.extend_from_slice(&[
                    index[slot(i + 1, j)],
                    index[slot(i + 1, j + 1)],
                    index[slot(i, j + 1)],
                ]);
            }
        }
    }
    (points, tris)
}

fn flat_disk(params: &GenParams) -> Result<SimplicialImmersion> {
    let n = ambient_dim(params, 2)?;
    let space = AmbientSpace::euclidean(n)?;
    let (pts, tris) = hex_disk(params.level);
    let r = params.radius;
    let vertices = pts
        .iter()
        .map(|p| embed(n, &[r * p[0], r * p[1]]))
        .collect();
    SimplicialImmersion::from_parts(
        space,
        2,
        vertices,
        tris,
        space.origin(),
        Surface::Flat,
        MeanCurvature::Zero,
    )
}

fn flat_ball(params: &GenParams) -> Result<SimplicialImmersion> {
    if params.level == 0 {
        return Err(Error::InvalidParameter(
            "flat_ball_3d needs level >= 1".into(),
        ));
    }
    let n = ambient_dim(params, 3)?;
    let space = AmbientSpace::euclidean(n)?;
    let m = 1usize << params.level;
    let side = m + 1;
    let id = |i: usize, j: usize, l: usize| (i * side + j) * side + l;
    let h = 2.0 / m as f64;
    let mut vertices = Vec::with_capacity(side * side * side);
    for i in 0..side {
        for j in 0..side {
            for l in 0..side {
                let p = [
                    -1.0 + i as f64 * h,
                    -1.0 + j as f64 * h,
                    -1.0 + l as f64 * h,
                ];
                let q = cube_to_ball(p);
                let s = params.radius;
                vertices.push(embed(n, &[q[0] * s, q[1] * s, q[2] * s]));
            }
        }
    }
    // Kuhn subdivision along the cube diagonal pointing away from the center,
    // so every tetrahedron has a vertex off the boundary.
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let half = m / 2;
    let mut cells = Vec::with_capacity(6 * m * m * m);
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                let lo = [i, j, l];
                let mut start = [0usize; 3];
                let mut step = [0isize; 3];
                for a in 0..3 {
                    if lo[a] >= half {
                        start[a] = lo[a];
                        step[a] = 1;
                    } else {
                        start[a] = lo[a] + 1;
                        step[a] = -1;
                    }
                }
                for perm in PERMS {
                    let mut c = start;
                    cells.push(id(c[0], c[1], c[2]));
                    for axis in perm {
                        c[axis] = (c[axis] as isize + step[axis]) as usize;
                        cells.push(id(c[0], c[1], c[2]));
                    }
                }
            }
        }
    }
    SimplicialImmersion::from_parts(
        space,
        3,
        vertices,
        cells,
        space.origin(),
        Surface::Flat,
        MeanCurvature::Zero,
    )
}

/// Smooth map of `[-1,1]^3` onto the closed unit ball, sending faces to the sphere.
fn cube_to_ball(p: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = p;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let q = [
        x * (1.0 - y2 / 2.0 - z2 / 2.0 + y2 * z2 / 3.0).sqrt(),
        y * (1.0 - z2 / 2.0 - x2 / 2.0 + z2 * x2 / 3.0).sqrt(),
        z * (1.0 - x2 / 2.0 - y2 / 2.0 + x2 * y2 / 3.0).sqrt(),
    ];
    // Exact unit length on the faces.
    if x2.max(y2).max(z2) == 1.0 {
        let len = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        return [q[0] / len, q[1] / len, q[2] / len];
    }
    q
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<usize>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let norm = (1.0 + t * t).sqrt();
    let pts = raw
        .iter()
        .map(|p| [p[0] / norm, p[1] / norm, p[2] / norm])
        .collect();
    let faces = vec![
        0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11, 1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7,
        1, 8, 3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9, 4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9,
        8, 1,
    ];
    (pts, faces)
}

fn sphere(params: &GenParams) -> Result<SimplicialImmersion> {
    let n = ambient_dim(params, 3)?;
    let space = AmbientSpace::euclidean(n)?;
    let (pts, faces) = icosahedron();
    let r = params.radius;
    let vertices = pts
        .iter()
        .map(|p| embed(n, &[r * p[0], r * p[1], r * p[2]]))
        .collect();
    let center = space.origin();
    let h = if params.analytic_h {
        MeanCurvature::Sphere { center, radius: r }
    } else {
        MeanCurvature::Discrete
    };
    let mut mesh = SimplicialImmersion::from_parts(
        space,
        2,
        vertices,
        faces,
        center,
        Surface::Sphere { center, radius: r },
        h,
    )?;
    for _ in 0..params.level {
        mesh = super::refine(&mesh)?;
    }
    Ok(mesh)
}

fn spherical_cap(params: &GenParams) -> Result<SimplicialImmersion> {
    let n = ambient_dim(params, 3)?;
    let space = AmbientSpace::euclidean(n)?;
    let theta_max = params.angle.unwrap_or(PI / 6.0);
    if !(theta_max > 0.0 && theta_max < PI) {
        return Err(Error::InvalidParameter(format!(
            "cap angle {theta_max} not in (0, pi)"
        )));
    }
    let r = params.radius;
    let (pts, tris) = hex_disk(params.level);
    let vertices = pts
        .iter()
        .map(|q| {
            let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
            let theta = rho * theta_max;
            let (c, s) = if rho == 0.0 {
                (1.0, 0.0)
            } else {
                (q[0] / rho, q[1] / rho)
            };
            embed(
                n,
                &[r * theta.sin() * c, r * theta.sin() * s, r * theta.cos()],
            )
        })
        .collect();
    let center = space.origin();
    let apex = embed(n, &[0.0, 0.0, r]);
    SimplicialImmersion::from_parts(
        space,
        2,
        vertices,
        tris,
        apex,
        Surface::Sphere { center, radius: r },
        MeanCurvature::Sphere { center, radius: r },
    )
}

fn annulus(params: &GenParams) -> Result<SimplicialImmersion> {
    let n = ambient_dim(params, 2)?;
    let space = AmbientSpace::euclidean(n)?;
    let outer = params.radius;
    let inner = params.inner_radius.unwrap_or(0.5 * outer);
    if !(inner > 0.0 && inner < outer) {
        return Err(Error::InvalidParameter(format!(
            "annulus inner radius {inner} not in (0, {outer})"
        )));
    }
    let n_theta = 12usize << params.level;
    let mean_spacing = PI * (inner + outer) / n_theta as f64;
    let n_r = (((outer - inner) / mean_spacing).round() as usize).max(1);
    let mut vertices = Vec::with_capacity((n_r + 1) * n_theta);
    for i in 0..=n_r {
        let rad = inner + (outer - inner) * i as f64 / n_r as f64;
        for j in 0..n_theta {
            // Alternate rings are rotated half a step for better shaped triangles.
            let phi = 2.0 * PI * (j as f64 + 0.5 * (i % 2) as f64) / n_theta as f64;
            vertices.push(embed(n, &[rad * phi.cos(), rad * phi.sin()]));
        }
    }
    let id = |i: usize, j: usize| i * n_theta + j % n_theta;
    let mut cells = Vec::with_capacity(2 * n_r * n_theta * 3);
    for i in 0..n_r {
        for j in 0..n_theta {
            if i % 2 == 0 {
                cells.extend_from_slice(&[id(i, j), id(i, j + 1), id(i + 1, j)]);
                cells.extend_from_slice(&[id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)]);
            } else {
                cells.extend_from_slice(&[id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
                cells.extend_from_slice(&[id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
            }
        }
    }
    SimplicialImmersion::from_parts(
        space,
        2,
        vertices,
        cells,
        space.origin(),
        Surface::Flat,
        MeanCurvature::Zero,
    )
}

fn segment(params: &GenParams) -> Result<SimplicialImmersion> {
    let n = ambient_dim(params, 2)?;
    let space = AmbientSpace::euclidean(n)?;
    let len = params.length.unwrap_or(2.0 * params.radius);
    if !(len > 0.0) {
        return Err(Error::InvalidParameter(format!("segment length {len}")));
    }
    let cells_n = 1usize << params.level;
    let vertices = (0..=cells_n)
        .map(|i| {
            embed(
                n,
                &[-0.5 * len + len * i as f64 / cells_n as f64, params.offset],
            )
        })
        .collect();
    let cells = (0..cells_n).flat_map(|i| [i, i + 1]).collect();
    SimplicialImmersion::from_parts(
        space,
        1,
        vertices,
        cells,
        space.origin(),
        Surface::Flat,
        MeanCurvature::Zero,
    )
}

fn hyperbolic_disk(params: &GenParams) -> Result<SimplicialImmersion> {
    let n = ambient_dim(params, 2)?;
    let space = AmbientSpace::hyperbolic(n)?;
    let (pts, tris) = hex_disk(params.level);
    let r = params.radius;
    let vertices = pts
        .iter()
        .map(|q| {
            let rho = r * (q[0] * q[0] + q[1] * q[1]).sqrt();
            let (c, s) = if rho == 0.0 {
                (0.0, 0.0)
            } else {
                (r * q[0] / rho, r * q[1] / rho)
            };
            embed(n + 1, &[rho.cosh(), rho.sinh() * c, rho.sinh() * s])
        })
        .collect();
    SimplicialImmersion::from_parts(
        space,
        2,
        vertices,
        tris,
        space.origin(),
        Surface::Flat,
        MeanCurvature::Zero,
    )
    .map_err(|e| match e {
        // Secant cells stop being Riemannian once edges are long compared to the curvature scale.
        Error::DegenerateCell { cell, .. } => Error::InvalidParameter(format!(
            "hyperbolic_disk radius {r} is too coarse at level {}: secant cell {cell} is not spacelike; raise the level",
            params.level
        )),
        e => e,
    })
}
