use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Discrete maximum principle toolkit for P1 finite elements.
///
/// Every subcommand writes its results and a `manifest.json` into `--out-dir`.
/// Exit codes: 0 success, 1 certificate not held or trial violations,
/// 2 usage or invalid parameter, 3 numerical failure. The thread count
/// defaults to `DMP_THREADS` when set.
#[derive(Debug, Parser)]
#[command(name = "dmp", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a structured mesh.
    #[command(after_help = MESH_GEN_OUTPUT)]
    MeshGen(MeshGenArgs),
    /// Assemble stiffness, mass and reaction matrices.
    #[command(after_help = ASSEMBLE_OUTPUT)]
    Assemble(AssembleArgs),
    /// Certify a discrete maximum principle from a patch cover.
    #[command(after_help = CERTIFY_OUTPUT)]
    Certify(CertifyArgs),
    /// Solve a linear or semilinear Dirichlet problem.
    #[command(after_help = SOLVE_OUTPUT)]
    Solve(SolveArgs),
    /// Discrete Green's function for an interior source vertex.
    #[command(after_help = GREEN_OUTPUT)]
    Green(GreenArgs),
    /// Randomized empirical test of a maximum principle.
    #[command(after_help = DMP_TEST_OUTPUT)]
    DmpTest(DmpTestArgs),
    /// Parameter sweeps and exact matrix studies.
    Study(StudyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MeshGen(_) => "mesh-gen",
            Command::Assemble(_) => "assemble",
            Command::Certify(_) => "certify",
            Command::Solve(_) => "solve",
            Command::Green(_) => "green",
            Command::DmpTest(_) => "dmp-test",
            Command::Study(_) => "study",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutDir {
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = "dmp-out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

const MESH_GEN_OUTPUT: &str = "\
Outputs:
  mesh.json     {vertices: [[x, y]], triangles: [[i, j, k]], labels?: {name: vertex}}
  sidecar.json  {generator, num_vertices, num_triangles, interior, boundary,
                 defect_edges: [[i, j]], patches: [{name, triangles}]}
The sidecar can be passed to `certify --patches`.";

#[derive(Debug, Args, Serialize)]
pub struct MeshGenArgs {
    #[command(subcommand)]
    pub kind: MeshKind,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutDir,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKind {
    /// Unit square, n x n cells, each cut by its slope -1 diagonal.
    ThreeLine {
        #[arg(long)]
        n: usize,
    },
    /// Uniform rhombus mesh with angle theta.
    Rhombus {
        /// Rhombus angle in radians (accepts forms like `0.3pi` and `pi/3`).
        #[arg(long, value_parser = parse_angle)]
        theta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = CutArg::Short)]
        cut: CutArg,
        #[arg(long, value_enum, default_value_t = ConventionArg::Centered)]
        convention: ConventionArg,
        /// Remove the two sharp corner triangles.
        #[arg(long)]
        trim: bool,
    },
    /// The defect patch G_k(theta).
    Gk {
        #[arg(long)]
        k: usize,
        #[arg(long, value_parser = parse_angle)]
        theta: f64,
    },
    /// Rhombus mesh with embedded G_k blocks.
    Defect {
        #[arg(long, value_enum, default_value_t = DefectPreset::FourG1)]
        preset: DefectPreset,
        /// JSON file `{theta, n, placements: [{k, anchor: [i, j]}]}` overriding the preset.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// The six-triangle degenerate construction on its own.
    Degenerate {
        #[arg(long, value_parser = parse_angle)]
        alpha: f64,
    },
    /// The degenerate construction embedded in a three-line mesh.
    EmbedDegenerate {
        #[arg(long, value_parser = parse_angle)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = PlacementArg::OneLayerInside)]
        placement: PlacementArg,
        /// Row of the triangle's base for `--placement inside`.
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutArg {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    Sheared,
    Centered,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectPreset {
    FourG1,
    #[value(name = "mixed-g1-g2")]
    MixedG1G2,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementArg {
    AtBoundary,
    OneLayerInside,
    Inside,
}

const ASSEMBLE_OUTPUT: &str = "\
Outputs (JSON matrices are {rows, cols, data: [[...]]} row-major; CSV has one matrix row per line):
  stiffness.{json,csv}, mass.{json,csv}, reaction.{json,csv} (only with --c-tilde > 0)
  check.json  {relative_discrepancy, row_sum_defect, passed} with --check-cotangent;
              exit 3 when the two assembly paths differ by more than --tol";

#[derive(Debug, Args, Serialize)]
pub struct AssembleArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub c_tilde: f64,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Json)]
    pub format: MatrixFormat,
    /// Compare gradient and cotangent assembly.
    #[arg(long)]
    pub check_cotangent: bool,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    Json,
    Csv,
}

const CERTIFY_OUTPUT: &str = "\
Outputs:
  certificate.json  {mode, holds, interior_components, isolated_boundary, reduced_triangles,
                     uncovered, patches: [{index, interior_vertices, check}], semilinear?,
                     failures, cover: {source, names, auto_seeds?, uncoverable?}}
  summary.txt       human-readable verdict (also printed)
Exit 0 iff the certificate holds, 1 otherwise.
--patches: `auto` grows rings around failing stars, `stars` uses every interior star,
`whole` uses the mesh itself, anything else is a JSON file with {patches: [{name, triangles}]}.";

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, value_enum)]
    pub mode: CertModeArg,
    /// Constant reaction coefficient (sdmp-b).
    #[arg(long, default_value_t = 0.0)]
    pub c_tilde: f64,
    /// Lipschitz constant of the reaction (semilinear).
    #[arg(long, default_value_t = 1.0)]
    pub lc: f64,
    #[arg(long, default_value = "auto")]
    pub patches: String,
    /// Largest ring radius tried by `--patches auto`.
    #[arg(long, default_value_t = 3)]
    pub max_ring: usize,
    /// Relative sign tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutDir,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertModeArg {
    SdmpA,
    SdmpB,
    WdmpA,
    Semilinear,
}

const SOLVE_OUTPUT: &str = "\
Inputs: --bc and --f are CSV files with header `vertex,value`; unlisted vertices get 0.
        --table is a CSV with header `u,c` (piecewise linear, constant extension).
Outputs:
  solution.csv  vertex,x,y,u
  solve.json    {reaction, residual, iterations, min, max, min_boundary, max_boundary}";

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Constant reaction coefficient; solves the linear problem.
    #[arg(long, conflicts_with = "reaction")]
    pub c_tilde: Option<f64>,
    /// Semilinear reaction c(u).
    #[arg(long, value_enum)]
    pub reaction: Option<ReactionArg>,
    /// Slope of `linear`, scale of `tanh`.
    #[arg(long, default_value_t = 1.0)]
    pub reaction_param: f64,
    #[arg(long, required_if_eq("reaction", "table"))]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub bc: Option<PathBuf>,
    #[arg(long)]
    pub f: Option<PathBuf>,
    /// Whether `--f` holds nodal source values or an assembled dual load.
    #[arg(long, value_enum, default_value_t = LoadKind::Nodal)]
    pub f_kind: LoadKind,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionArg {
    Linear,
    Tanh,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadKind {
    Nodal,
    Dual,
}

const GREEN_OUTPUT: &str = "\
Outputs:
  green.csv   vertex,x,y,boundary,g
  green.json  {source, min_interior, argmin, negative_interior: [vertex]}";

#[derive(Debug, Args, Serialize)]
pub struct GreenArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Interior vertex carrying the unit dual source.
    #[arg(long)]
    pub source: usize,
    #[arg(long, default_value_t = 0.0)]
    pub c_tilde: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutDir,
}

const DMP_TEST_OUTPUT: &str = "\
Outputs:
  trials.json     {mode, trials, seed, violations, min_margin, failed_solves}
  violations.csv  trial,kind,vertex,value,bound
Exit 0 when no trial violates the principle, 1 otherwise.";

#[derive(Debug, Args, Serialize)]
pub struct DmpTestArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, value_enum)]
    pub mode: TrialModeArg,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant reaction coefficient for the -b modes.
    #[arg(long, default_value_t = 0.0)]
    pub c_tilde: f64,
    /// Use the semilinear tanh reaction with this scale instead of a constant one (-b modes).
    #[arg(long)]
    pub tanh: Option<f64>,
    /// Trial t < #interior puts a unit source at interior vertex t with zero boundary data.
    #[arg(long)]
    pub adversarial: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutDir,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialModeArg {
    WdmpA,
    SdmpA,
    WdmpB,
    SdmpB,
}

#[derive(Debug, Args, Serialize)]
pub struct StudyArgs {
    #[command(subcommand)]
    pub study: Study,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutDir,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// Smallest inverse entry of G_k(theta) over a theta grid.
    #[command(after_help = "\
Outputs:
  fig4.csv   k,theta,min_entry,row,col,certified
  fig4.json  {brackets: [{k, below, above}], records}")]
    Fig4 {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        k: Vec<usize>,
        /// `lo:hi:count` (linear) or a comma list.
        #[arg(long, default_value = "0.3pi:0.49pi:20")]
        theta_grid: String,
        /// Width of the sign-change brackets in radians.
        #[arg(long, default_value_t = 1e-4)]
        bracket_tol: f64,
    },
    /// Smallest inverse entry of the degenerate patch block over an alpha grid.
    #[command(after_help = "\
Outputs:
  fig8.csv   alpha,min_entry,row,col,certified,condition
  fig8.json  {all_positive, smallest: {alpha, min_entry, argmin, condition}, records}")]
    Fig8 {
        /// `lo:hi:count` (logarithmic) or a comma list.
        #[arg(long, default_value = "2.36e-4:pi/6:50")]
        alpha_grid: String,
    },
    /// Exact limit matrices and the hierarchical splitting at given alphas.
    #[command(after_help = "\
Outputs:
  appendix.json  {exact: {a_inv, c0_inv, a_inv_r0, r0t_a_inv_r0, t0} as \"p/q\" strings,
                  t0_singular_values, rate: {alphas, errors, slope}, bundles: [per-alpha matrices]}
  limit.csv      alpha,error")]
    Appendix {
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
        alpha: Vec<f64>,
    },
    /// Green's function with source at P for two placements of the degenerate triangle.
    #[command(after_help = "\
Outputs:
  fig10.csv   placement,vertex,x,y,boundary,g
  fig10.json  {alpha, n, one_layer_inside: {min_interior, argmin, value_at_n}, at_boundary: {...}}")]
    Fig10 {
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
}

/// Parses `1.2`, `0.3pi`, `pi/6`, `2pi/5` or `pi`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let bad = || format!("cannot parse angle `{s}`");
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let (coef, rest) = (&t[..pos], &t[pos + 2..]);
    let coef = match coef.trim_end_matches('*') {
        "" => 1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let div = match rest {
        "" => 1.0,
        r => r.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(coef * std::f64::consts::PI / div)
}
