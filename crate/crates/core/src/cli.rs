//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambient::{AmbientKind, AmbientSpace};
use crate::applications::{eigen_bound_check, shrinker_check};
use crate::error::{Error, Result};
use crate::expr::PsiSpec;
use crate::inequalities::{
    hardy_carron_report, hardy_norm_report, hardy_report, rellich_constants, rellich_report,
    BudgetMode, HardyParams, LaplacianMode, ReportOptions, TermBreakdown, Verdict,
};
use crate::linalg::Vector;
use crate::mesh::{generate, read_mesh, refine, write_mesh, GenParams, SimplicialImmersion};
use crate::operators::{assemble, laplacian_apply};
use crate::sharpness::{minimize_quotient, QuotientProblem};

#[derive(Debug, Parser)]
#[command(
    name = "subgeo",
    version,
    about = "Hardy and Rellich inequalities on discretized submanifolds"
)]
pub struct Cli {
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, refine or describe meshes.
    #[command(subcommand)]
    Mesh(MeshCmd),
    /// Evaluate one inequality term by term.
    Verify(VerifyArgs),
    /// Print inequality constants.
    #[command(subcommand)]
    Constants(ConstantsCmd),
    /// Shrinker and eigenvalue applications.
    #[command(subcommand)]
    App(AppCmd),
    /// Minimize the Hardy quotient over successive refinements.
    Sharpness(SharpnessArgs),
    /// Convergence study of one inequality over refinement levels.
    Study(StudyArgs),
    /// Export a vertex field as CSV.
    Field(FieldArgs),
    /// Ambient comparison checks.
    #[command(subcommand)]
    Ambient(AmbientCmd),
}

#[derive(Debug, Subcommand)]
pub enum MeshCmd {
    Gen {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 3)]
        level: u32,
        /// Extra generator parameters as key=value.
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    Refine {
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        out: PathBuf,
    },
    Info {
        #[arg(long)]
        mesh: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TheoremArg {
    Hardy,
    HardyCarron,
    HardyNorm,
    Rellich,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BudgetArg {
    Auto,
    Refine,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LaplacianArg {
    Flux,
    Interior,
    Consistent,
}

#[derive(Debug, Args)]
pub struct InequalityArgs {
    /// Mesh file or `gen:<name>,key=value,...`.
    #[arg(long)]
    pub mesh: String,
    /// `radial:<expr>`, `coord:<expr>` or `file:<path>`.
    #[arg(long)]
    pub psi: String,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub gamma: f64,
    /// Pole coordinates, comma separated; defaults to the mesh pole.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,
    #[arg(long, value_enum, default_value_t = BudgetArg::Auto)]
    pub budget: BudgetArg,
    #[arg(long, value_enum, default_value_t = LaplacianArg::Flux)]
    pub laplacian: LaplacianArg,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub theorem: TheoremArg,
    #[command(flatten)]
    pub common: InequalityArgs,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ConstantsCmd {
    Rellich {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        p: f64,
        /// Use the hyperbolic validity range.
        #[arg(long)]
        curved: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AppCmd {
    Shrinker {
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<String>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    EigenBound {
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SharpnessArgs {
    #[arg(long)]
    pub mesh: String,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub gamma: f64,
    /// Number of refinement levels, starting at the given mesh.
    #[arg(long, default_value_t = 1)]
    pub levels: u32,
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum, default_value_t = TheoremArg::Hardy)]
    pub theorem: TheoremArg,
    #[command(flatten)]
    pub common: InequalityArgs,
    #[arg(long, default_value_t = 3)]
    pub levels: u32,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FieldKind {
    Psi,
    Laplacian,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[arg(long)]
    pub mesh: String,
    #[arg(long)]
    pub psi: String,
    #[arg(long, value_enum, default_value_t = FieldKind::Psi)]
    pub kind: FieldKind,
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AmbientCmd {
    /// Samples the Hessian comparison defect at random points.
    Defect {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Largest distance of sampled points from the origin.
        #[arg(long, default_value_t = 5.0)]
        radius: f64,
        #[arg(long)]
        euclidean: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Process exit status of a completed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Holds = 0,
    Inconclusive = 2,
    Violated = 1,
}

impl Outcome {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn of(v: Verdict) -> Self {
        match v {
            Verdict::Holds => Self::Holds,
            Verdict::Inconclusive => Self::Inconclusive,
            Verdict::Violated => Self::Violated,
        }
    }

    /// Violated dominates inconclusive, which dominates holds.
    fn worst(self, other: Self) -> Self {
        let rank = |o: Self| match o {
            Self::Holds => 0,
            Self::Inconclusive => 1,
            Self::Violated => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

/// Mesh given by a file path or a generator spec.
#[derive(Clone, Debug)]
pub enum MeshSource {
    File(PathBuf),
    Gen { name: String, params: GenParams },
}

impl MeshSource {
    pub fn parse(s: &str) -> Result<Self> {
        match s.strip_prefix("gen:") {
            Some(rest) => {
                let mut parts = rest.split(',');
                let name = parts.next().unwrap_or_default().trim().to_string();
                let params = GenParams::parse_pairs(parts)?;
                Ok(Self::Gen { name, params })
            }
            None => Ok(Self::File(PathBuf::from(s))),
        }
    }

    pub fn load(&self) -> Result<SimplicialImmersion> {
        match self {
            Self::File(p) => read_mesh(p),
            Self::Gen { name, params } => generate(name, params),
        }
    }

    /// Meshes at `levels` successive refinements, with their level numbers.
    pub fn levels(&self, levels: u32) -> Result<Vec<(u32, SimplicialImmersion)>> {
        let mut out = Vec::new();
        match self {
            Self::Gen { name, params } => {
                for j in 0..levels {
                    let p = GenParams {
                        level: params.level + j,
                        ..params.clone()
                    };
                    out.push((p.level, generate(name, &p)?));
                }
            }
            Self::File(_) => {
                let mut m = self.load()?;
                for j in 0..levels {
                    let next = if j + 1 < levels {
                        Some(refine(&m)?)
                    } else {
                        None
                    };
                    out.push((j, m));
                    match next {
                        Some(n) => m = n,
                        None => break,
                    }
                }
            }
        }
        Ok(out)
    }
}

fn pole(mesh: &SimplicialImmersion, xi: Option<&str>) -> Result<Vector> {
    match xi {
        None => Ok(*mesh.pole()),
        Some(s) => {
            let coords = s
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("invalid pole coordinate '{t}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(*mesh.space().base_point(&coords)?.coords())
        }
    }
}

fn options(a: &InequalityArgs) -> ReportOptions {
    ReportOptions {
        budget: match a.budget {
            BudgetArg::Auto => BudgetMode::Auto,
            BudgetArg::Refine => BudgetMode::Refine,
            BudgetArg::Off => BudgetMode::Off,
        },
        laplacian: match a.laplacian {
            LaplacianArg::Flux => LaplacianMode::Flux,
            LaplacianArg::Interior => LaplacianMode::Interior,
            LaplacianArg::Consistent => LaplacianMode::Consistent,
        },
        ..Default::default()
    }
}

fn report(
    theorem: TheoremArg,
    mesh: &SimplicialImmersion,
    a: &InequalityArgs,
) -> Result<TermBreakdown> {
    let xi = pole(mesh, a.xi.as_deref())?;
    let psi = PsiSpec::parse(&a.psi)?.field(mesh, &xi)?;
    let opts = options(a);
    let k = mesh.dim();
    match theorem {
        TheoremArg::Hardy => {
            hardy_report(mesh, &psi, &HardyParams::new(a.p, a.gamma, k)?, &xi, &opts)
        }
        TheoremArg::HardyCarron => {
            hardy_carron_report(mesh, &psi, &HardyParams::new(a.p, a.gamma, k)?, &xi, &opts)
        }
        TheoremArg::HardyNorm => {
            hardy_norm_report(mesh, &psi, &HardyParams::new(a.p, a.gamma, k)?, &xi, &opts)
        }
        TheoremArg::Rellich => rellich_report(mesh, &psi, a.p, a.gamma, &xi, &opts),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot write {}: {e}", path.display()),
        ))
    })
}

/// Prints `text` and writes it to `path` when given.
fn emit(text: &str, path: Option<&Path>, out: &mut String) -> Result<()> {
    out.push_str(text);
    if let Some(p) = path {
        write_file(p, text)?;
    }
    Ok(())
}

/// Runs one command; stdout text is appended to `out`.
pub fn run(cli: &Cli, out: &mut String) -> Result<Outcome> {
    match &cli.command {
        Command::Mesh(cmd) => mesh_cmd(cmd, out),
        Command::Verify(v) => {
            let mesh = MeshSource::parse(&v.common.mesh)?.load()?;
            let r = report(v.theorem, &mesh, &v.common)?;
            emit(&to_json(&r), v.json.as_deref(), out)?;
            Ok(Outcome::of(r.verdict))
        }
        Command::Constants(ConstantsCmd::Rellich {
            k,
            gamma,
            p,
            curved,
            json,
        }) => {
            let c = rellich_constants(*k, *gamma, *p, !curved)?;
            let _ = writeln!(out, "E={} A={} B={}", c.e, c.a, c.b);
            if let Some(path) = json {
                write_file(path, &to_json(&c))?;
            }
            Ok(Outcome::Holds)
        }
        Command::App(AppCmd::Shrinker {
            mesh,
            lambda,
            xi,
            json,
        }) => {
            let m = MeshSource::parse(mesh)?.load()?;
            let xi = pole(&m, xi.as_deref())?;
            let r = shrinker_check(&m, *lambda, &xi)?;
            emit(&to_json(&r), json.as_deref(), out)?;
            Ok(if !r.consistent {
                Outcome::Violated
            } else if r.conclusion.is_none() {
                Outcome::Inconclusive
            } else {
                Outcome::Holds
            })
        }
        Command::App(AppCmd::EigenBound { mesh, json }) => {
            let m = MeshSource::parse(mesh)?.load()?;
            let r = eigen_bound_check(&m)?;
            emit(&to_json(&r), json.as_deref(), out)?;
            Ok(if r.holds {
                Outcome::Holds
            } else {
                Outcome::Violated
            })
        }
        Command::Sharpness(a) => sharpness_cmd(a, out),
        Command::Study(a) => study_cmd(a, out),
        Command::Field(a) => field_cmd(a, out),
        Command::Ambient(AmbientCmd::Defect {
            n,
            samples,
            radius,
            euclidean,
            json,
        }) => {
            let kind = if *euclidean {
                AmbientKind::Euclidean
            } else {
                AmbientKind::Hyperbolic
            };
            let r = defect_sample(kind, *n, *samples, *radius, cli.seed)?;
            emit(&to_json(&r), json.as_deref(), out)?;
            Ok(if r.min_defect >= -DEFECT_TOL {
                Outcome::Holds
            } else {
                Outcome::Violated
            })
        }
    }
}

fn mesh_cmd(cmd: &MeshCmd, out: &mut String) -> Result<Outcome> {
    match cmd {
        MeshCmd::Gen {
            name,
            radius,
            level,
            params,
            out: path,
        } => {
            let mut p = GenParams::parse_pairs(params.iter().map(String::as_str))?;
            p.radius = *radius;
            p.level = *level;
            let m = generate(name, &p)?;
            write_mesh(&m, path)?;
            let _ = writeln!(
                out,
                "{} vertices {} cells -> {}",
                m.num_vertices(),
                m.num_cells(),
                path.display()
            );
        }
        MeshCmd::Refine { mesh, out: path } => {
            let m = refine(&MeshSource::parse(mesh)?.load()?)?;
            write_mesh(&m, path)?;
            let _ = writeln!(
                out,
                "{} vertices {} cells -> {}",
                m.num_vertices(),
                m.num_cells(),
                path.display()
            );
        }
        MeshCmd::Info { mesh } => {
            let m = MeshSource::parse(mesh)?.load()?;
            out.push_str(&to_json(&MeshInfo::of(&m)));
        }
    }
    Ok(Outcome::Holds)
}

#[derive(Serialize)]
struct MeshInfo {
    ambient: String,
    n: usize,
    k: usize,
    vertices: usize,
    cells: usize,
    boundary_facets: usize,
    volume: f64,
    mesh_size: f64,
    pole: Vec<f64>,
}

impl MeshInfo {
    fn of(m: &SimplicialImmersion) -> Self {
        Self {
            ambient: ambient_name(m.space()),
            n: m.space().dim(),
            k: m.dim(),
            vertices: m.num_vertices(),
            cells: m.num_cells(),
            boundary_facets: m.boundary_facets().len(),
            volume: m.total_volume(),
            mesh_size: m.mesh_size(),
            pole: m.pole().as_slice().to_vec(),
        }
    }
}

fn ambient_name(space: &AmbientSpace) -> String {
    space.kind().to_string()
}

#[derive(Serialize)]
struct SharpnessRow {
    level: u32,
    h: f64,
    min_quotient: f64,
    gap: f64,
    discrete_value: f64,
    method: crate::sharpness::Method,
    converged: bool,
}

#[derive(Serialize)]
struct SharpnessOutput {
    p: f64,
    gamma: f64,
    constant: f64,
    rows: Vec<SharpnessRow>,
    /// Gap positive at every level and nonincreasing.
    non_attainment: bool,
}

fn sharpness_cmd(a: &SharpnessArgs, out: &mut String) -> Result<Outcome> {
    let meshes = MeshSource::parse(&a.mesh)?.levels(a.levels)?;
    let mut rows = Vec::new();
    let mut constant = 0.0;
    for (level, m) in &meshes {
        let xi = pole(m, a.xi.as_deref())?;
        let prob = QuotientProblem::new(m, HardyParams::new(a.p, a.gamma, m.dim())?, &xi)?;
        let r = minimize_quotient(&prob)?;
        constant = r.constant;
        rows.push(SharpnessRow {
            level: *level,
            h: m.mesh_size(),
            min_quotient: r.value,
            gap: r.gap,
            discrete_value: r.discrete_value,
            method: r.method,
            converged: r.converged,
        });
    }
    let positive = rows.iter().all(|r| r.gap > 0.0);
    let monotone = rows
        .windows(2)
        .all(|w| w[1].min_quotient <= w[0].min_quotient);
    let converged = rows.iter().all(|r| r.converged);
    let result = SharpnessOutput {
        p: a.p,
        gamma: a.gamma,
        constant,
        non_attainment: positive && monotone,
        rows,
    };
    if let Some(path) = &a.csv {
        let mut csv = String::from("level,h,min_quotient,gap\n");
        for r in &result.rows {
            let _ = writeln!(csv, "{},{},{},{}", r.level, r.h, r.min_quotient, r.gap);
        }
        write_file(path, &csv)?;
    }
    emit(&to_json(&result), a.json.as_deref(), out)?;
    Ok(if !positive {
        Outcome::Violated
    } else if !converged || !monotone {
        Outcome::Inconclusive
    } else {
        Outcome::Holds
    })
}

fn study_cmd(a: &StudyArgs, out: &mut String) -> Result<Outcome> {
    let meshes = MeshSource::parse(&a.common.mesh)?.levels(a.levels)?;
    let mut reports = Vec::new();
    for (level, m) in &meshes {
        reports.push((*level, m.mesh_size(), report(a.theorem, m, &a.common)?));
    }
    let csv = study_csv(&reports);
    if let Some(path) = &a.csv {
        write_file(path, &csv)?;
    }
    out.push_str(&csv);
    Ok(reports.iter().fold(Outcome::Holds, |o, (_, _, r)| {
        o.worst(Outcome::of(r.verdict))
    }))
}

/// Rows of `level,h,<terms>,lhs,rhs,slack,budget,verdict,excision_exponent,slack_order`.
pub fn study_csv(reports: &[(u32, f64, TermBreakdown)]) -> String {
    let mut csv = String::new();
    let Some((_, _, first)) = reports.first() else {
        return csv;
    };
    let names: Vec<&String> = first.terms.keys().collect();
    csv.push_str("level,h");
    for n in &names {
        let _ = write!(csv, ",{n}");
    }
    csv.push_str(",lhs,rhs,slack,budget,verdict,excision_exponent,slack_order\n");
    for (i, (level, h, r)) in reports.iter().enumerate() {
        let _ = write!(csv, "{level},{h}");
        for n in &names {
            let _ = write!(csv, ",{}", r.term(n));
        }
        let exponent = r
            .lhs_terms
            .first()
            .and_then(|t| r.excision.get(t))
            .and_then(|e| e.exponent)
            .map_or("n/a".to_string(), |e| e.to_string());
        let order = if i == 0 {
            "n/a".to_string()
        } else {
            let (_, h0, r0) = &reports[i - 1];
            let (s0, s1) = (r0.slack.abs(), r.slack.abs());
            if s0 > 0.0 && s1 > 0.0 {
                ((s0 / s1).ln() / (h0 / h).ln()).to_string()
            } else {
                "n/a".to_string()
            }
        };
        let _ = writeln!(
            csv,
            ",{},{},{},{},{},{exponent},{order}",
            r.lhs, r.rhs, r.slack, r.budget.total, r.verdict
        );
    }
    csv
}

fn field_cmd(a: &FieldArgs, out: &mut String) -> Result<Outcome> {
    let mesh = MeshSource::parse(&a.mesh)?.load()?;
    let xi = pole(&mesh, a.xi.as_deref())?;
    let psi = PsiSpec::parse(&a.psi)?.field(&mesh, &xi)?;
    let values = match a.kind {
        FieldKind::Psi => psi.values().to_vec(),
        FieldKind::Laplacian => laplacian_apply(&mesh, &assemble(&mesh), psi.values()).raw,
    };
    let mut csv = String::from("vertex,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(csv, "{i},{v}");
    }
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => out.push_str(&csv),
    }
    Ok(Outcome::Holds)
}

/// Tolerance on the sampled comparison defect.
pub const DEFECT_TOL: f64 = 1e-10;

#[derive(Debug, Serialize)]
pub struct DefectSample {
    pub ambient: String,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub min_defect: f64,
    pub max_defect: f64,
}

/// Hessian comparison defect at `samples` random (point, pole, direction)
/// triples within `radius` of the origin.
pub fn defect_sample(
    kind: AmbientKind,
    n: usize,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<DefectSample> {
    let space = AmbientSpace::new(kind, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = space.origin();
    let random_point = |rng: &mut ChaCha8Rng| -> Vector {
        let mut v = Vector::zeros(space.coord_len());
        let off = usize::from(kind == AmbientKind::Hyperbolic);
        for i in 0..n {
            v[i + off] = rng.gen_range(-1.0..1.0);
        }
        let len = space.norm_sq(&v).sqrt().max(1e-300);
        let t = radius * rng.gen::<f64>();
        space.project(&space.exp_map(&origin, &(v * (t / len))))
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut taken = 0;
    while taken < samples {
        let x = random_point(&mut rng);
        let xi = random_point(&mut rng);
        if space.dist(&x, &xi) < 1e-6 {
            continue;
        }
        let mut w = Vector::zeros(space.coord_len());
        for i in 0..space.coord_len() {
            w[i] = rng.gen_range(-1.0..1.0);
        }
        let v = space.project_tangent(&x, &w);
        let len = space.norm_sq(&v).max(0.0).sqrt();
        if len < 1e-8 {
            continue;
        }
        let v = v * (1.0 / len);
        let d = space.hessian_defect(
            &space.point(x.as_slice())?,
            &space.base_point(xi.as_slice())?,
            &v,
        )?;
        lo = lo.min(d);
        hi = hi.max(d);
        taken += 1;
    }
    Ok(DefectSample {
        ambient: ambient_name(&space),
        n,
        samples,
        seed,
        min_defect: lo,
        max_defect: hi,
    })
}
