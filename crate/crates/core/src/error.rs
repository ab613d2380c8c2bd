use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grid does not cover the pulse: {0}")]
    Window(String),

    #[error("grid is not uniform")]
    NonUniformGrid,

    #[error("integration diverged at z index {z_index}, tau index {tau_index} (tau = {tau})")]
    Divergence { z_index: usize, tau_index: usize, tau: f64 },

    #[error("field has zero energy")]
    ZeroEnergy,

    #[error("frequency grids do not match")]
    GridMismatch,

    #[error("fringes unresolvable: period spans {samples_per_fringe:.2} samples (need >= 4)")]
    UnresolvableFringes { samples_per_fringe: f64 },

    #[error("reconstruction support has {found} samples (need >= {needed})")]
    SupportTooSmall { found: usize, needed: usize },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("fit did not converge after {iterations} iterations (residual norm {residual_norm:.3e})")]
    NoConvergence {
        iterations: usize,
        residual_norm: f64,
        best: Vec<f64>,
    },

    #[error("control pulse does not match a protocol preset; its adiabaticity is undefined")]
    UndefinedAdiabaticity,

    #[error("not enough data: need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
