use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum Error {
    #[error("spin state has zero norm")]
    ZeroState,
    #[error("amplitude is not finite")]
    NonFinite,
    #[error("beam width and hbar must be finite and positive")]
    InvalidBeam,
    #[error("displacement must be finite and non-negative")]
    InvalidDisplacement,
    #[error("orthogonal post-selection")]
    OrthogonalPostselection,
    #[error("zero post-selection probability")]
    ZeroPostselection,
    #[error("amplitude detuning {epsilon} outside [{min}, {max}]")]
    DetuningOutOfRange { epsilon: f64, min: f64, max: f64 },
    #[error("amplitude vanishes, phase undefined")]
    AmplitudeVanishes,
    #[error("quadrature exceeded maximum subdivision depth {0}")]
    MaxDepthExceeded(u32),
    #[error("rejection sampler stalled: no proposal accepted in {0} draws")]
    RejectionStall(u64),
    #[error("weak-value component too small to invert")]
    VanishingSensitivity,
    #[error("insufficient points: {got} usable, need at least {need}")]
    InsufficientPoints { got: usize, need: usize },
    #[error("fit model does not apply to this observable")]
    ModelObservableMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}
