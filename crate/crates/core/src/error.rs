use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("deformation factor undefined at w = {w} (requires w < {w_max})")]
    DeformationDomain { w: f64, w_max: f64 },

    #[error("w0 = {w0} lies beyond the fold at {fold}")]
    BeyondFold { w0: f64, fold: f64 },

    #[error("state is off the critical set: {0}")]
    OffCriticalSet(String),

    #[error("no back layer: {0}")]
    NoBackLayer(String),

    #[error("rest state is not hyperbolic: {0}")]
    NonHyperbolic(String),

    #[error("shooting did not converge: {0}")]
    Shooting(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("integrability violated: {0}")]
    Integrability(String),

    #[error("ill-conditioned frame: {0}")]
    IllConditioned(String),

    #[error("contour resolution failed: {0}")]
    Contour(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("blow-up at t = {t}")]
    BlowUp { t: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
