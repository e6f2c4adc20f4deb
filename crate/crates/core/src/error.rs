use thiserror::Error;

/// Errors raised by the thermodynamic kernels, the discretization and the
/// time steppers.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of a correlation or function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The repulsion term requires `b * n < 1`.
    #[error("covolume violation: b*n = {bn:.6} (must stay below 1 - 1e-12)")]
    Covolume { bn: f64 },

    /// Field or matrix shapes disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Configuration is inconsistent or violates a physical constraint.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A linear solve did not reach the requested residual.
    #[error("linear solve failed ({context}): {iterations} iterations, relative residual {residual:.3e}")]
    Solver {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// Block elimination of a bordered system hit a vanishing pivot.
    #[error("bordered solve: degenerate pivot {pivot:.3e} (scale {scale:.3e})")]
    Pivot { pivot: f64, scale: f64 },

    /// `F_b + sum C_T,i N_i` must stay positive for the auxiliary variable.
    #[error("energy shift insufficient: F_b + sum(C_T*N) = {radicand:.6e} J, increase C_T = {c_t:?}")]
    EnergyShift { radicand: f64, c_t: Vec<f64> },

    /// A non-finite value appeared in an assembled system or field.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
