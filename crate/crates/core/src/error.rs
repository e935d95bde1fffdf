//! Crate-wide error type.

use crate::riviere::IterationStats;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh level {level} needs {vertices} vertices, over the {budget} budget")]
    MeshCapacity { level: u32, vertices: u64, budget: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("incompatible Neumann data: defect {defect:.3e} against scale {scale:.3e}")]
    Incompatible { defect: f64, scale: f64 },

    #[error("{solver} stalled after {iterations} iterations at relative residual {residual:.3e}")]
    SolverStall {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("fixed point did not settle within {iterations} iterations")]
    FixedPointStall {
        iterations: usize,
        trace: Vec<IterationStats>,
    },

    #[error("{0}")]
    Domain(String),

    #[error("oscillation window: {0}")]
    Window(String),

    #[error("{0}")]
    Config(String),

    #[error("{what}: expected {expected} entries, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
