use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-physical endpoint: {0}")]
    NonPhysicalEndpoint(String),
    #[error("s = {0} outside [0, 1]")]
    Domain(f64),
    #[error("non-physical trajectory: {0}")]
    NonPhysical(String),
    #[error("ions collided at t = {t:e} s")]
    IonCollision { t: f64 },
    #[error("solution cloud is degenerate: {0}")]
    DegenerateCloud(String),
    #[error("no smooth region: the sample at nu = 0 did not converge")]
    NoSmoothRegion,
    #[error("need at least {needed} converged samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
}
