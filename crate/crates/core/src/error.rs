use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CavityError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("angular frequency must have positive real part, got {0}")]
    NonPositiveFrequency(Complex64),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("root search for mode {k} did not converge after {iterations} iterations (last iterate {last}, |D1| = {residual:e})")]
    NonConvergence {
        k: i64,
        iterations: usize,
        last: Complex64,
        residual: f64,
    },

    #[error("mode {k} root {omega} does not decay (Im >= 0)")]
    NonDecaying { k: i64, omega: Complex64 },

    #[error("basis is not orthonormal on the quadrature grid (max deviation {0:e})")]
    NonOrthonormal(f64),

    #[error("coupling sum rule violated: eta^2 + sum |chi|^2 = {0}")]
    SumRule(f64),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CavityError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CavityError::InvalidInput(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CavityError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            CavityError::NonConvergence { .. }
                | CavityError::NonDecaying { .. }
                | CavityError::Singular(_)
                | CavityError::SumRule(_)
                | CavityError::NonOrthonormal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CavityError>;
