use thiserror::Error;

pub type Result<T> = std::result::Result<T, FeecError>;

#[derive(Debug, Error)]
pub enum FeecError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("form degree {k} out of range for a complex of dimension {n}")]
    DegreeOutOfRange { k: usize, n: usize },

    #[error("degenerate cell {cell}: signed volume {volume:e}")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("degenerate metric on cell {cell}: {detail}")]
    DegenerateMetric { cell: usize, detail: String },

    #[error("rank-deficient Jacobian on cell {cell}")]
    SingularMap { cell: usize },

    #[error("no quadrature rule of degree {degree} on the {n}-simplex")]
    UnsupportedQuadrature { n: usize, degree: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular matrix: {context}")]
    SingularMatrix { context: String },

    #[error("operands live on different complexes or have incompatible sizes: {0}")]
    Mismatch(String),

    #[error("harmonic space mismatch: declared b1 = {declared}, {detail}")]
    BettiMismatch { declared: usize, detail: String },

    #[error("system is singular: b1 = {betti} > 0 requires the harmonic block (enable deflation)")]
    HarmonicBlockMissing { betti: usize },

    #[error("{method} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { method: &'static str, iterations: usize, residual: f64 },

    #[error("unknown {kind} `{name}`; valid: {valid}")]
    UnknownName { kind: &'static str, name: String, valid: String },

    #[error("canonical interpolant requires a smooth field, got continuity `{tag}`")]
    RefusedContinuity { tag: String },

    #[error("singular patch normal equations for edge {edge} (cells {cells:?})")]
    DegeneratePatch { edge: usize, cells: Vec<usize> },

    #[error("manufactured problem `{name}` failed its residual check: {residual:e}")]
    ManufacturedResidual { name: String, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FeecError {
    /// Short machine-readable tag used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidArgument(_) => "invalid_argument",
            Self::DegreeOutOfRange { .. } => "degree_out_of_range",
            Self::DegenerateCell { .. } => "degenerate_cell",
            Self::DegenerateMetric { .. } => "degenerate_metric",
            Self::SingularMap { .. } => "singular_map",
            Self::UnsupportedQuadrature { .. } => "unsupported_quadrature",
            Self::NotPositiveDefinite { .. } => "not_positive_definite",
            Self::SingularMatrix { .. } => "singular_matrix",
            Self::Mismatch(_) => "mismatch",
            Self::BettiMismatch { .. } => "betti_mismatch",
            Self::HarmonicBlockMissing { .. } => "harmonic_block_missing",
            Self::NonConvergence { .. } => "nonconvergence",
            Self::UnknownName { .. } => "unknown_name",
            Self::RefusedContinuity { .. } => "refused_continuity",
            Self::DegeneratePatch { .. } => "degenerate_patch",
            Self::ManufacturedResidual { .. } => "manufactured_residual",
            Self::Io(_) => "io",
        }
    }
}
