use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("support truncated: grid ends at {t_max} but support reaches {support}")]
    SupportTruncated { t_max: f64, support: f64 },

    #[error("grid overflow: result needs t_max >= {required}, grid ends at {t_max}")]
    GridOverflow { required: f64, t_max: f64 },

    #[error("grid mismatch: step {left} vs {right}")]
    GridMismatch { left: f64, right: f64 },

    #[error("no vehicles")]
    NoVehicles,

    #[error("vehicle {0} is not on the ring")]
    UnknownVehicle(u64),

    #[error("KL undefined: headway {0} is zero")]
    KlUndefined(usize),

    #[error("integrator stalled at t={time} with step {step:e} ({vehicles} vehicles, headways {headways:?})")]
    IntegratorStalled {
        time: f64,
        step: f64,
        vehicles: usize,
        headways: Vec<f64>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unstable: no finite mean (load {load})")]
    Unstable { load: f64 },

    #[error("invalid bracket: P(bounded) is {p_lo} at {lambda_lo} and {p_hi} at {lambda_hi}")]
    InvalidBracket {
        lambda_lo: f64,
        p_lo: f64,
        lambda_hi: f64,
        p_hi: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
