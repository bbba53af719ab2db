use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("exponent p = {p} exceeds the critical exponent {p_c}; no lifespan upper bound applies")]
    Supercritical { p: f64, p_c: f64 },

    #[error("radius {r} outside tabulated range [0, {r_max}]")]
    OutOfRange { r: f64, r_max: f64 },

    #[error(
        "calibration failed after {doublings} doublings: worst {inequality} margin {margin:e} at t = {t}, r = {r}"
    )]
    CalibrationFailed {
        inequality: &'static str,
        doublings: usize,
        margin: f64,
        t: f64,
        r: f64,
    },

    #[error("time step {dt} violates CFL bound {bound} (cfl = {cfl}, dr = {dr})")]
    CflViolation { dt: f64, dr: f64, cfl: f64, bound: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("record does not cover the requested time interval: need t up to {needed}, have {available}")]
    InsufficientCoverage { needed: f64, available: f64 },

    #[error("corpus entry has a vanishing norm ({which})")]
    ZeroNorm { which: &'static str },

    #[error("fit requires {needed} points in window, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("fit requires strictly positive values, found {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },

    #[error("operation requires linear mode (nonlinearity disabled)")]
    RequiresLinearMode,

    #[error("initial mass functional {value:e} is not positive; blow-up hypothesis fails")]
    NonPositiveInitialMass { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
