use dmp_core::assembly::AssemblyError;
use dmp_core::certify::CertifyError;
use dmp_core::linalg::LinalgError;
use dmp_core::mesh::MeshError;
use dmp_core::solvers::SolverError;
use dmp_core::studies::StudyError;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs, out-of-range parameters (exit 2).
    Usage(String),
    /// Singular systems, degenerate geometry, solver breakdown, output I/O (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn is_usage_mesh(e: &MeshError) -> bool {
    !matches!(e, MeshError::DegenerateTriangle(_))
}

fn is_usage_assembly(e: &AssemblyError) -> bool {
    match e {
        AssemblyError::InvalidInput(_) => true,
        AssemblyError::Mesh(m) => is_usage_mesh(m),
        AssemblyError::DegenerateTriangle { .. } | AssemblyError::Linalg(_) => false,
    }
}

fn is_usage_solver(e: &SolverError) -> bool {
    match e {
        SolverError::InvalidInput(_) | SolverError::InvalidReaction(_) => true,
        SolverError::Assembly(a) => is_usage_assembly(a),
        SolverError::Linalg(_) | SolverError::NoConvergence { .. } => false,
    }
}

fn classify(usage: bool, msg: String) -> CliError {
    if usage {
        CliError::Usage(msg)
    } else {
        CliError::Numerical(msg)
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        classify(is_usage_mesh(&e), e.to_string())
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        classify(is_usage_assembly(&e), e.to_string())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        classify(is_usage_solver(&e), e.to_string())
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        let usage = match &e {
            CertifyError::InvalidParameter(_) | CertifyError::ForeignPatch(_) => true,
            CertifyError::Mesh(m) => is_usage_mesh(m),
            CertifyError::Assembly(a) => is_usage_assembly(a),
            CertifyError::Linalg(_) => false,
        };
        classify(usage, e.to_string())
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        let usage = match &e {
            StudyError::InvalidParameter(_) => true,
            StudyError::Mesh(m) => is_usage_mesh(m),
            StudyError::Assembly(a) => is_usage_assembly(a),
            StudyError::Solver(s) => is_usage_solver(s),
            StudyError::Linalg(_) => false,
        };
        classify(usage, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Numerical(format!("writing CSV: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(format!("writing JSON: {e}"))
    }
}
