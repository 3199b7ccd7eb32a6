use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("unsupported derivative order {order} (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("wrong bump profile: expected {expected}")]
    WrongProfile { expected: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("grid resolution: {0}")]
    Resolution(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("contraction violated: {0}")]
    ContractionViolation(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("quadrature did not converge: {nodes} nodes gave {estimate:e}, doubled gave {refined:e}")]
    Quadrature {
        nodes: usize,
        estimate: f64,
        refined: f64,
    },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    Stiffness { t: f64, step: f64 },

    #[error("trajectory left the {region} at t = {t}")]
    DomainExit {
        region: &'static str,
        t: f64,
        last_state: Vec<f64>,
        excursion: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}/{operation}: {source}")]
    Stage {
        stage: &'static str,
        operation: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn at(self, stage: &'static str, operation: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                operation,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
