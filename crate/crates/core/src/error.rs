use std::path::PathBuf;

use thiserror::Error;

use crate::model::NetworkDiagnostic;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid network: {}", format_diagnostics(.0))]
    InvalidNetwork(Vec<NetworkDiagnostic>),

    #[error("spectral density evaluated at negative frequency {0}")]
    NegativeFrequency(f64),

    #[error("integral not convergent: {0}")]
    Integrability(String),

    #[error("infrared divergence: {0}")]
    InfraredDivergence(String),

    #[error("singular displacement fraction at site {site}, omega = {omega} cm^-1")]
    SingularFraction { site: usize, omega: f64 },

    #[error("variational solve did not converge from any start (best residual {best_residual:e})")]
    NoConvergence {
        best_residual: f64,
        residual_trace: Vec<f64>,
    },

    #[error("quadrature failed at t = {t} ps: {message}")]
    Quadrature { t: f64, message: String },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("trace drift {drift:e} at t = {t} ps; reduce dt_ps")]
    TraceDrift { t: f64, drift: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_diagnostics(diags: &[NetworkDiagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
