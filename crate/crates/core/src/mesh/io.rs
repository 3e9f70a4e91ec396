//! Plain-text mesh format.
//!
//! ```text
//! ambient euclidean 2
//! k 2
//! pole 0 0
//! surface flat              # optional: `surface sphere <R> <center..>`
//! hmean zero                # optional: zero | discrete | missing | sphere <R> <center..>
//! v 0 0
//! c 0 1 2
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{MeanCurvature, SimplicialImmersion, Surface};
use crate::ambient::{AmbientKind, AmbientSpace};
use crate::error::{Error, Result};
use crate::linalg::Vector;

fn push_coords(out: &mut String, v: &Vector) {
    for x in v.as_slice() {
        let _ = write!(out, " {x}");
    }
}

/// Serializes a mesh. Floats use the shortest representation that round-trips.
pub fn mesh_to_string(mesh: &SimplicialImmersion) -> String {
    let mut out = String::new();
    let space = mesh.space();
    let _ = writeln!(out, "ambient {} {}", space.kind(), space.dim());
    let _ = writeln!(out, "k {}", mesh.dim());
    out.push_str("pole");
    push_coords(&mut out, mesh.pole());
    out.push('\n');
    match mesh.surface() {
        Surface::Flat => out.push_str("surface flat\n"),
        Surface::Sphere { center, radius } => {
            let _ = write!(out, "surface sphere {radius}");
            push_coords(&mut out, center);
            out.push('\n');
        }
    }
    match mesh.mean_curvature_source() {
        MeanCurvature::Zero => out.push_str("hmean zero\n"),
        MeanCurvature::Discrete => out.push_str("hmean discrete\n"),
        MeanCurvature::Missing => out.push_str("hmean missing\n"),
        MeanCurvature::Sphere { center, radius } => {
            let _ = write!(out, "hmean sphere {radius}");
            push_coords(&mut out, center);
            out.push('\n');
        }
    }
    for v in mesh.vertices() {
        out.push('v');
        push_coords(&mut out, v);
        out.push('\n');
    }
    for c in mesh.cells() {
        out.push('c');
        for i in c {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    out
}

pub fn write_mesh(mesh: &SimplicialImmersion, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<SimplicialImmersion> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

fn floats(line: usize, tokens: &[&str]) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: invalid number '{t}'")))
        })
        .collect()
}

pub fn parse_mesh(text: &str) -> Result<SimplicialImmersion> {
    let mut space: Option<AmbientSpace> = None;
    let mut k: Option<usize> = None;
    let mut pole: Option<Vec<f64>> = None;
    let mut surface = Surface::Flat;
    let mut hmean: Option<MeanCurvature> = None;
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let need_space =
            || space.ok_or_else(|| Error::Parse(format!("line {line}: 'ambient' must come first")));
        let sphere_of = |rest: &[&str]| -> Result<(Vector, f64)> {
            let s = need_space()?;
            let vals = floats(line, rest)?;
            if vals.len() != s.coord_len() + 1 {
                return Err(Error::Parse(format!(
                    "line {line}: expected radius and {} center coordinates",
                    s.coord_len()
                )));
            }
            Ok((Vector::from_slice(&vals[1..]), vals[0]))
        };
        match tokens[0] {
            "ambient" => {
                if tokens.len() != 3 {
                    return Err(Error::Parse(format!(
                        "line {line}: expected 'ambient <kind> <n>'"
                    )));
                }
                let kind = match tokens[1] {
                    "euclidean" => AmbientKind::Euclidean,
                    "hyperbolic" => AmbientKind::Hyperbolic,
                    other => {
                        return Err(Error::Parse(format!(
                            "line {line}: unknown ambient kind '{other}'"
                        )))
                    }
                };
                let n = tokens[2].parse().map_err(|_| {
                    Error::Parse(format!("line {line}: invalid dimension '{}'", tokens[2]))
                })?;
                space = Some(AmbientSpace::new(kind, n)?);
            }
            "k" => {
                k = Some(
                    tokens
                        .get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("line {line}: expected 'k <dim>'")))?,
                )
            }
            "pole" => pole = Some(floats(line, &tokens[1..])?),
            "surface" => {
                surface = match tokens.get(1) {
                    Some(&"flat") => Surface::Flat,
                    Some(&"sphere") => {
                        let (center, radius) = sphere_of(&tokens[2..])?;
                        Surface::Sphere { center, radius }
                    }
                    _ => {
                        return Err(Error::Parse(format!(
                            "line {line}: unknown surface '{content}'"
                        )))
                    }
                }
            }
            "hmean" => {
                hmean = Some(match tokens.get(1) {
                    Some(&"zero") => MeanCurvature::Zero,
                    Some(&"discrete") => MeanCurvature::Discrete,
                    Some(&"missing") => MeanCurvature::Missing,
                    Some(&"sphere") => {
                        let (center, radius) = sphere_of(&tokens[2..])?;
                        MeanCurvature::Sphere { center, radius }
                    }
                    _ => {
                        return Err(Error::Parse(format!(
                            "line {line}: unknown hmean '{content}'"
                        )))
                    }
                })
            }
            "v" => {
                let s = need_space()?;
                let p = s.point(&floats(line, &tokens[1..])?)?;
                vertices.push(*p.coords());
            }
            "c" => {
                let idx = tokens[1..]
                    .iter()
                    .map(|t| {
                        t.parse::<usize>().map_err(|_| {
                            Error::Parse(format!("line {line}: invalid vertex index '{t}'"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                cells.push(idx);
            }
            other => {
                return Err(Error::Parse(format!(
                    "line {line}: unknown record '{other}'"
                )))
            }
        }
    }
    let space = space.ok_or_else(|| Error::Parse("missing 'ambient' line".into()))?;
    let k = k.ok_or_else(|| Error::Parse("missing 'k' line".into()))?;
    let pole = match pole {
        Some(p) => *space.point(&p)?.coords(),
        None => space.origin(),
    };
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
    let hmean = hmean.unwrap_or(if space.is_flat() {
        MeanCurvature::Discrete
    } else if k == space.dim() {
        MeanCurvature::Zero
    } else {
        MeanCurvature::Missing
    });
    SimplicialImmersion::from_parts(space, k, vertices, flat, pole, surface, hmean)
}
