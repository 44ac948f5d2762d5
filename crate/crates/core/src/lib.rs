//! Minimal Lagrangian surfaces in the complex quadric Q₂ ≅ S²×S², built from
//! holomorphic loop-algebra potentials with the DPW method.
//!
//! Pipeline: [`potentials`] → [`holonomy`] (solve dΦ = Φξ) → [`iwasawa`]
//! (Φ = F·B) → [`frames`] (surface formulas) → [`verify`] (residuals).
//! [`closedform`] holds the exact oracles and closing criteria.

pub mod cli;
pub mod closedform;
pub mod frames;
pub mod holonomy;
pub mod iwasawa;
pub mod loops;
pub mod potentials;
pub mod verify;

pub use num_complex::Complex64;

/// Library version recorded in generated metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    Validation(String),
    #[error("pole at z = {z}")]
    Pole { z: Complex64 },
    #[error("bad path: {0}")]
    Path(String),
    #[error("integration failed near z = {z}: {msg}")]
    Integration { z: Complex64, msg: String },
    #[error("not positive definite at lambda = {lambda}")]
    NotPositiveDefinite { lambda: Complex64 },
    #[error("factorization error: {0}")]
    Factorization(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("degenerate immersion: {0}")]
    Degenerate(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics (integration, factorization,
    /// degeneracy) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::Factorization(_)
                | Error::Convergence(_)
                | Error::Degenerate(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
