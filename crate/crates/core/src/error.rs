use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{operation} is not supported for the {family} family")]
    UnsupportedFamily { operation: &'static str, family: String },

    /// A detection region with (numerically) zero or full probability.
    #[error("degenerate detection region: P(A) = {probability}")]
    DegenerateRegion { probability: f64 },

    #[error("infeasible design problem: {0}")]
    Infeasible(String),

    /// The solver hit its iteration cap. Carries the best iterate seen.
    #[error("solver did not reach tolerance {tol} (certificate {certificate})")]
    NonConvergence {
        tol: f64,
        certificate: f64,
        best: Box<crate::density_opt::DesignSolution>,
    },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("failed to parse {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate})")]
    Quadrature { a: f64, b: f64, estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Parse {
            what,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
