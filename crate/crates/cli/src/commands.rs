use std::fmt::Write as _;
use std::path::Path;

use dmp_core::assembly::{mass_matrix, relative_discrepancy, stiffness_cotangent, stiffness_gradient, Load};
use dmp_core::certify::{auto_cover, certify_cover, defect_edges, verdict_label, CertMode, Certificate, CertifyOptions};
use dmp_core::generators::{
    defect_mesh, degenerate_triangle_mesh, embed_degenerate, gk_patch, rhombus_mesh, three_line_mesh, Cut, DefectSpec,
    DegenerateSpec, Placement, RhombusConvention, RhombusSpec,
};
use dmp_core::io::{mesh_from_json, mesh_to_json};
use dmp_core::mesh::{classify_boundary, extract_subdomain, star, Edge};
use dmp_core::solvers::{
    empirical_dmp_test, empirical_semilinear_test, greens_column, solve_linear, solve_semilinear, validate_reaction, LinearReaction,
    NewtonOptions, Reaction, TableReaction, TanhReaction, TrialMode, TrialOptions, TrialReport,
};
use dmp_core::{Matrix, Mesh, Patch, System};
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::error::CliError;
use crate::output::{num, Run};

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    /// Certificate not held, or trials found violations.
    NotHeld,
}

/// False for negative values and NaN.
fn nonnegative(x: f64) -> bool {
    x >= 0.0
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn load_mesh(run: &mut Run, path: &Path) -> Result<Mesh, CliError> {
    let text = run.read_input(path)?;
    mesh_from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NamedPatch {
    pub name: String,
    pub triangles: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PatchFile {
    patches: Vec<NamedPatch>,
}

#[derive(Debug, Serialize)]
struct Sidecar {
    generator: &'static str,
    num_vertices: usize,
    num_triangles: usize,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    defect_edges: Vec<Edge>,
    patches: Vec<NamedPatch>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    extended_patches: Vec<NamedPatch>,
}

fn named(name: impl Into<String>, p: &Patch) -> NamedPatch {
    NamedPatch { name: name.into(), triangles: p.parent_triangles.clone() }
}

fn star_name(p: &Patch) -> String {
    format!("star-{}", p.to_parent(p.partition.interior[0]))
}

fn whole(mesh: &Mesh) -> NamedPatch {
    NamedPatch { name: "whole".into(), triangles: (0..mesh.num_triangles()).collect() }
}

pub fn mesh_gen(args: &MeshGenArgs, run: &mut Run) -> Result<Verdict, CliError> {
    let (generator, mesh, patches, extended) = match &args.kind {
        MeshKind::ThreeLine { n } => ("three-line", three_line_mesh::<f64>(*n)?, vec![], vec![]),
        MeshKind::Rhombus { theta, n, cut, convention, trim } => {
            let cut = match cut {
                CutArg::Short => Cut::Short,
                CutArg::Long => Cut::Long,
            };
            let convention = match convention {
                ConventionArg::Sheared => RhombusConvention::Sheared,
                ConventionArg::Centered => RhombusConvention::Centered,
            };
            let mut spec = RhombusSpec::uniform(*theta, *n, cut, convention);
            if *trim {
                spec = spec.trimmed();
            }
            ("rhombus", rhombus_mesh(&spec)?, vec![], vec![])
        }
        MeshKind::Gk { k, theta } => {
            let m = gk_patch(*k, *theta)?;
            let p = vec![whole(&m)];
            ("gk", m, p, vec![])
        }
        MeshKind::Defect { preset, spec } => {
            let spec = match spec {
                Some(path) => {
                    let text = run.read_input(path)?;
                    serde_json::from_str::<DefectSpec<f64>>(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
                }
                None => match preset {
                    DefectPreset::FourG1 => DefectSpec::four_g1(),
                    DefectPreset::MixedG1G2 => DefectSpec::mixed_g1_g2(),
                },
            };
            let d = defect_mesh(&spec)?;
            let nblocks = d.blocks.len();
            let patches = d
                .cover()?
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if i < nblocks {
                        let b = d.blocks[i].placement;
                        named(format!("G{}-at-{}-{}", b.k, b.anchor.0, b.anchor.1), p)
                    } else {
                        named(star_name(p), p)
                    }
                })
                .collect();
            ("defect", d.mesh().clone(), patches, vec![])
        }
        MeshKind::Degenerate { alpha } => {
            let d = degenerate_triangle_mesh(*alpha)?;
            let p = vec![whole(&d.mesh)];
            ("degenerate", d.mesh, p, vec![])
        }
        MeshKind::EmbedDegenerate { alpha, placement, layers, n } => {
            let placement = match placement {
                PlacementArg::AtBoundary => Placement::AtBoundary,
                PlacementArg::OneLayerInside => Placement::OneLayerInside,
                PlacementArg::Inside => Placement::Inside(*layers),
            };
            let d = embed_degenerate(&DegenerateSpec { alpha: *alpha, placement, n: *n })?;
            let cover = |extended: bool| -> Result<Vec<NamedPatch>, CliError> {
                Ok(d.cover(extended)?
                    .iter()
                    .enumerate()
                    .map(|(i, p)| match (i, extended) {
                        (0, false) => named("E", p),
                        (0, true) => named("E+star(A')", p),
                        _ => named(star_name(p), p),
                    })
                    .collect())
            };
            let extended = if d.vertices.a_prime.is_some() { cover(true)? } else { vec![] };
            ("embed-degenerate", d.mesh.clone(), cover(false)?, extended)
        }
    };
    let partition = classify_boundary(&mesh);
    let sidecar = Sidecar {
        generator,
        num_vertices: mesh.num_vertices(),
        num_triangles: mesh.num_triangles(),
        interior: partition.interior,
        boundary: partition.boundary,
        defect_edges: defect_edges(&mesh, 1e-12)?,
        patches,
        extended_patches: extended,
    };
    run.write_text("mesh.json", &mesh_to_json(&mesh))?;
    run.write_json("sidecar.json", &sidecar)?;
    println!("{generator}: {} vertices, {} triangles, {} defect edges", sidecar.num_vertices, sidecar.num_triangles, sidecar.defect_edges.len());
    Ok(Verdict::Ok)
}

#[derive(Serialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<Vec<f64>>,
}

fn write_matrix(run: &mut Run, name: &str, m: &Matrix, format: MatrixFormat) -> Result<(), CliError> {
    match format {
        MatrixFormat::Json => run.write_json(&format!("{name}.json"), &MatrixJson { rows: m.rows(), cols: m.cols(), data: m.to_rows() }),
        MatrixFormat::Csv => {
            let header: Vec<String> = (0..m.cols()).map(|j| format!("c{j}")).collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            run.write_csv(&format!("{name}.csv"), &header, m.to_rows().into_iter().map(|r| r.into_iter().map(num).collect()))
        }
    }
}

pub fn assemble(args: &AssembleArgs, run: &mut Run) -> Result<Verdict, CliError> {
    if !nonnegative(args.c_tilde) {
        return Err(CliError::usage("--c-tilde must be nonnegative"));
    }
    let mesh = load_mesh(run, &args.mesh)?;
    let stiffness = stiffness_gradient(&mesh)?;
    let mass = mass_matrix(&mesh)?;
    write_matrix(run, "stiffness", &stiffness, args.format)?;
    write_matrix(run, "mass", &mass, args.format)?;
    if args.c_tilde > 0.0 {
        write_matrix(run, "reaction", &mass.scale(args.c_tilde), args.format)?;
    }
    println!("assembled {} x {} matrices", stiffness.rows(), stiffness.cols());
    if args.check_cotangent {
        let cot = stiffness_cotangent(&mesh)?;
        let discrepancy = relative_discrepancy(&stiffness, &cot)?;
        let row_sum_defect = (0..stiffness.rows()).map(|i| stiffness.row(i).iter().sum::<f64>().abs()).fold(0.0, f64::max);
        let passed = discrepancy <= args.tol && row_sum_defect <= args.tol * stiffness.max_abs().max(1.0);
        #[derive(Serialize)]
        struct Check {
            relative_discrepancy: f64,
            row_sum_defect: f64,
            tol: f64,
            passed: bool,
        }
        run.write_json("check.json", &Check { relative_discrepancy: discrepancy, row_sum_defect, tol: args.tol, passed })?;
        println!("cotangent check: relative discrepancy {discrepancy:.3e}, row-sum defect {row_sum_defect:.3e}");
        if !passed {
            return Err(CliError::Numerical(format!("assembly paths differ by {discrepancy:e}")));
        }
    }
    Ok(Verdict::Ok)
}

#[derive(Serialize)]
struct CoverInfo {
    source: String,
    names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    auto_seeds: Option<Vec<(usize, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uncoverable: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct CertifyOutput<'a> {
    #[serde(flatten)]
    certificate: &'a Certificate<f64>,
    cover: CoverInfo,
}

fn summarize(cert: &Certificate<f64>, mesh: &Mesh, cover: &CoverInfo) -> String {
    let mut s = String::new();
    let failing = cert.patches.iter().filter(|p| !p.check.passed).count();
    let interior = classify_boundary(mesh).interior.len();
    let _ = writeln!(s, "mode: {}", serde_json::to_value(cert.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
    let _ = writeln!(s, "verdict: {}", verdict_label(cert.holds));
    let _ = writeln!(s, "mesh: {} vertices, {} triangles, {interior} interior", mesh.num_vertices(), mesh.num_triangles());
    let _ = writeln!(s, "cover: {} ({} patches, {failing} failing)", cover.source, cert.patches.len());
    let _ = writeln!(s, "interior graph components: {}", cert.interior_components);
    if let Some(u) = cover.uncoverable.as_ref().filter(|u| !u.is_empty()) {
        let _ = writeln!(s, "no passing ring found around: {u:?}");
    }
    if !cert.uncovered.is_empty() {
        let _ = writeln!(s, "uncovered interior vertices: {:?}", cert.uncovered);
    }
    if !cert.reduced_triangles.is_empty() {
        let _ = writeln!(s, "triangles dropped at isolated boundary vertices: {:?}", cert.reduced_triangles);
    }
    if let Some(r) = &cert.semilinear {
        let fmt = |x: Option<f64>| x.map_or("unbounded".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(s, "semilinear: C_A = {}, h = {:.6e}, h_max = {}, L = {}", fmt(r.c_a), r.mesh_size, fmt(r.h_max), r.lipschitz);
    }
    for f in &cert.failures {
        let _ = writeln!(s, "failure: {f}");
    }
    s
}

pub fn certify(args: &CertifyArgs, run: &mut Run) -> Result<Verdict, CliError> {
    if !nonnegative(args.c_tilde) || !positive(args.lc) || !nonnegative(args.tol) {
        return Err(CliError::usage("--c-tilde and --tol must be nonnegative, --lc positive"));
    }
    let mesh = load_mesh(run, &args.mesh)?;
    let mode = match args.mode {
        CertModeArg::SdmpA => CertMode::SdmpA,
        CertModeArg::SdmpB => CertMode::SdmpB,
        CertModeArg::WdmpA => CertMode::WdmpA,
        CertModeArg::Semilinear => CertMode::Semilinear,
    };
    if args.c_tilde > 0.0 && mode != CertMode::SdmpB {
        log::warn!("--c-tilde is only used by sdmp-b");
    }
    let mut opts = CertifyOptions::new(mode).with_reaction(args.c_tilde);
    opts.lipschitz = args.lc;
    opts.tol_rel = args.tol;

    let (patches, cover) = match args.patches.as_str() {
        "auto" => {
            let ac = auto_cover(&mesh, &opts, args.max_ring)?;
            let names = ac.seeds.iter().map(|(v, k)| format!("ring{k}-{v}")).collect();
            (ac.patches, CoverInfo { source: "auto".into(), names, auto_seeds: Some(ac.seeds), uncoverable: Some(ac.uncoverable) })
        }
        "stars" => {
            let p = classify_boundary(&mesh);
            let stars = p.interior.iter().map(|&v| star(&mesh, v)).collect::<Result<Vec<_>, _>>()?;
            let names = stars.iter().map(star_name).collect();
            (stars, CoverInfo { source: "stars".into(), names, auto_seeds: None, uncoverable: None })
        }
        "whole" => {
            let all = extract_subdomain(&mesh, &whole(&mesh).triangles)?;
            (vec![all], CoverInfo { source: "whole".into(), names: vec!["whole".into()], auto_seeds: None, uncoverable: None })
        }
        file => {
            let path = Path::new(file);
            let text = run.read_input(path)?;
            let pf: PatchFile = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{file}: {e}")))?;
            let patches = pf
                .patches
                .iter()
                .map(|p| extract_subdomain(&mesh, &p.triangles).map_err(|e| CliError::usage(format!("patch {}: {e}", p.name))))
                .collect::<Result<Vec<_>, _>>()?;
            let names = pf.patches.into_iter().map(|p| p.name).collect();
            (patches, CoverInfo { source: file.into(), names, auto_seeds: None, uncoverable: None })
        }
    };
    let cert = certify_cover(&mesh, &patches, &opts)?;
    let summary = summarize(&cert, &mesh, &cover);
    print!("{summary}");
    run.write_json("certificate.json", &CertifyOutput { certificate: &cert, cover })?;
    run.write_text("summary.txt", &summary)?;
    Ok(if cert.holds { Verdict::Ok } else { Verdict::NotHeld })
}

/// Reads `vertex,value` rows into a vector of length `n` (missing entries are 0).
fn read_vertex_values(run: &mut Run, path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let text = run.read_input(path)?;
    let mut out = vec![0.0; n];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let bad = |msg: String| CliError::usage(format!("{}: {msg}", path.display()));
    for (line, rec) in rdr.deserialize::<(usize, f64)>().enumerate() {
        let (v, x) = rec.map_err(|e| bad(e.to_string()))?;
        if v >= n {
            return Err(bad(format!("row {}: vertex {v} out of range ({n} vertices)", line + 1)));
        }
        if !x.is_finite() {
            return Err(bad(format!("row {}: non-finite value", line + 1)));
        }
        out[v] = x;
    }
    Ok(out)
}

fn read_table(run: &mut Run, path: &Path) -> Result<TableReaction<f64>, CliError> {
    let text = run.read_input(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let points = rdr
        .deserialize::<(f64, f64)>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(TableReaction::new(points)?)
}

fn vertex_csv<'a>(mesh: &'a Mesh, values: &'a [f64]) -> impl Iterator<Item = Vec<String>> + 'a {
    let vs = mesh.vertices();
    values.iter().enumerate().map(move |(i, &u)| vec![i.to_string(), num(vs[i][0]), num(vs[i][1]), num(u)])
}

pub fn solve(args: &SolveArgs, run: &mut Run) -> Result<Verdict, CliError> {
    let mesh = load_mesh(run, &args.mesh)?;
    let n = mesh.num_vertices();
    let g = match &args.bc {
        Some(p) => read_vertex_values(run, p, n)?,
        None => vec![0.0; n],
    };
    let f_raw = match &args.f {
        Some(p) => read_vertex_values(run, p, n)?,
        None => vec![0.0; n],
    };
    let partition = classify_boundary(&mesh);
    if let Some(v) = partition.interior.iter().find(|&&v| g[v] != 0.0) {
        log::warn!("boundary data given at interior vertex {v} is ignored");
    }
    let mass = mass_matrix(&mesh)?;
    let f = dmp_core::assembly::load_vector(
        &mass,
        &match args.f_kind {
            LoadKind::Nodal => Load::Nodal(f_raw),
            LoadKind::Dual => Load::Dual(f_raw),
        },
    )?;
    let (solution, reaction) = match args.reaction {
        None => {
            let c = args.c_tilde.unwrap_or(0.0);
            if !nonnegative(c) {
                return Err(CliError::usage("--c-tilde must be nonnegative"));
            }
            (solve_linear(&System::new(&mesh, c)?, &f, &g)?, format!("constant c = {c}"))
        }
        Some(kind) => {
            let r: Box<dyn Reaction<f64>> = match kind {
                ReactionArg::Linear => Box::new(LinearReaction(args.reaction_param)),
                ReactionArg::Tanh => Box::new(TanhReaction(args.reaction_param)),
                ReactionArg::Table => Box::new(read_table(run, args.table.as_deref().expect("clap requires --table"))?),
            };
            let range = 1.0 + g.iter().chain(&f).fold(0.0f64, |m, x| m.max(x.abs()));
            validate_reaction(r.as_ref(), &mesh, range)?;
            let sys = System::new(&mesh, 0.0)?;
            let name = match kind {
                ReactionArg::Linear => format!("linear c(u) = {} u", args.reaction_param),
                ReactionArg::Tanh => format!("tanh c(u) = tanh({} u)", args.reaction_param),
                ReactionArg::Table => "table".to_string(),
            };
            (solve_semilinear(&mesh, &sys, r.as_ref(), &f, &g, &NewtonOptions::default())?, name)
        }
    };
    let u = &solution.values;
    let extent = |ids: &[usize]| ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(u[i]), hi.max(u[i])));
    let (min, max) = extent(&(0..n).collect::<Vec<_>>());
    let (min_boundary, max_boundary) = extent(&partition.boundary);
    #[derive(Serialize)]
    struct SolveSummary {
        reaction: String,
        residual: f64,
        iterations: usize,
        min: f64,
        max: f64,
        min_boundary: f64,
        max_boundary: f64,
    }
    run.write_csv("solution.csv", &["vertex", "x", "y", "u"], vertex_csv(&mesh, u))?;
    run.write_json(
        "solve.json",
        &SolveSummary { reaction, residual: solution.residual, iterations: solution.iterations, min, max, min_boundary, max_boundary },
    )?;
    println!("solved: residual {:.3e}, {} iteration(s), u in [{min:.6e}, {max:.6e}]", solution.residual, solution.iterations);
    Ok(Verdict::Ok)
}

pub fn green(args: &GreenArgs, run: &mut Run) -> Result<Verdict, CliError> {
    if !nonnegative(args.c_tilde) {
        return Err(CliError::usage("--c-tilde must be nonnegative"));
    }
    let mesh = load_mesh(run, &args.mesh)?;
    let sys = System::new(&mesh, args.c_tilde)?;
    if !sys.partition.interior.contains(&args.source) {
        return Err(CliError::usage(format!("source {} is not an interior vertex", args.source)));
    }
    let g = greens_column(&sys, args.source)?;
    let interior = &sys.partition.interior;
    let (argmin, min_interior) = interior.iter().map(|&i| (i, g[i])).fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let negative_interior: Vec<usize> = interior.iter().copied().filter(|&i| g[i] < 0.0).collect();
    #[derive(Serialize)]
    struct GreenSummary {
        source: usize,
        min_interior: f64,
        argmin: usize,
        negative_interior: Vec<usize>,
    }
    let vs = mesh.vertices();
    let rows = g.iter().enumerate().map(|(i, &x)| vec![i.to_string(), num(vs[i][0]), num(vs[i][1]), sys.partition.is_boundary[i].to_string(), num(x)]);
    run.write_csv("green.csv", &["vertex", "x", "y", "boundary", "g"], rows)?;
    println!("green: min over interior {min_interior:.6e} at vertex {argmin}, {} negative interior values", negative_interior.len());
    run.write_json("green.json", &GreenSummary { source: args.source, min_interior, argmin, negative_interior })?;
    Ok(Verdict::Ok)
}

pub fn dmp_test(args: &DmpTestArgs, run: &mut Run) -> Result<Verdict, CliError> {
    let mode = match args.mode {
        TrialModeArg::WdmpA => TrialMode::WdmpA,
        TrialModeArg::SdmpA => TrialMode::SdmpA,
        TrialModeArg::WdmpB => TrialMode::WdmpB,
        TrialModeArg::SdmpB => TrialMode::SdmpB,
    };
    let reaction_mode = matches!(mode, TrialMode::WdmpB | TrialMode::SdmpB);
    if !nonnegative(args.c_tilde) {
        return Err(CliError::usage("--c-tilde must be nonnegative"));
    }
    if !reaction_mode && (args.c_tilde > 0.0 || args.tanh.is_some()) {
        return Err(CliError::usage("wdmp-a and sdmp-a take no reaction; use wdmp-b or sdmp-b"));
    }
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be positive"));
    }
    let mesh = load_mesh(run, &args.mesh)?;
    run.seed = Some(args.seed);
    let opts = TrialOptions { trials: args.trials, seed: args.seed, adversarial: args.adversarial, ..TrialOptions::default() };
    let report: TrialReport = match args.tanh {
        Some(scale) => {
            let r = TanhReaction(scale);
            validate_reaction(&r, &mesh, 10.0)?;
            empirical_semilinear_test(&mesh, &System::new(&mesh, 0.0)?, &r, mode, &opts)?
        }
        None => empirical_dmp_test(&System::new(&mesh, args.c_tilde)?, mode, &opts)?,
    };
    run.write_json("trials.json", &report)?;
    let kind = |v: &dmp_core::solvers::Violation| serde_json::to_value(v.kind).ok().and_then(|k| k.as_str().map(String::from)).unwrap_or_default();
    let rows = report.violations.iter().map(|v| vec![v.trial.to_string(), kind(v), v.vertex.to_string(), num(v.value), num(v.bound)]);
    run.write_csv("violations.csv", &["trial", "kind", "vertex", "value", "bound"], rows)?;
    println!(
        "{} trials: {} violations, {} failed solves, min margin {:.3e}",
        report.trials,
        report.violations.len(),
        report.failed_solves.len(),
        report.min_margin
    );
    if !report.failed_solves.is_empty() && report.violations.is_empty() {
        return Err(CliError::Numerical(format!("{} trial solves failed", report.failed_solves.len())));
    }
    Ok(if report.passed() { Verdict::Ok } else { Verdict::NotHeld })
}
