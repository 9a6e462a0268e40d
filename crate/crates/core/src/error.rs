use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Newton polygon has no usable edge and no fold order was found")]
    DegenerateSupport,

    #[error("point ({x}, {y}) is not on the switching curve: |f| = {value:e}")]
    NotOnSigma { x: f64, y: f64, value: f64 },

    #[error("switching function has a critical point at ({x}, {y})")]
    SingularSwitch { x: f64, y: f64 },

    #[error("field vanishes at ({x}, {y}); fold order is undefined at a singular point")]
    SingularPoint { x: f64, y: f64 },

    #[error("no nonzero Lie derivative up to order {max_order}")]
    OrderExceeded { max_order: usize },

    #[error("point is not in a sliding or escaping arc (X+f * X-f = {product:e})")]
    NotSlidingRegion { product: f64 },

    #[error("field has no nonzero homogeneous part at the point")]
    ZeroLeadingPart,

    #[error("leading homogeneous part is radial: every direction is characteristic")]
    AllDirectionsCharacteristic,

    #[error("jet division by a jet with leading coefficient {leading:e}")]
    DivisionBySingularJet { leading: f64 },

    #[error("Hypothesis H fails at theta = {theta}: {reason}")]
    HypothesisViolation { theta: f64, reason: String },

    #[error("orbits do not turn consistently around the origin: {0}")]
    OrientationMismatch(String),

    #[error("step size control failed at t = {t} (h = {h:e})")]
    ToleranceNotMet { t: f64, h: f64 },

    #[error("transported leading coefficient u1 = {u1} is not positive")]
    NonPositiveLeading { u1: f64 },

    #[error("weights must be positive integers (got {0}, {1})")]
    WeightMismatch(u32, u32),

    #[error("return-map engine needs the switching curve y = 0")]
    SwitchNotAxis,

    #[error("orbit did not return to the section before t = {t_max}")]
    NoReturn { t_max: f64 },

    #[error("step size collapsed near a tangency at ({x}, {y})")]
    StallAtTangency { x: f64, y: f64 },

    #[error("simulation made no progress at t = {t}")]
    NoProgress { t: f64 },

    #[error("the {half} field does not point into its half-plane at x0 = {x0}")]
    NotInward { half: &'static str, x0: f64 },

    #[error("start abscissa {x0} is below the near-origin cutoff {cutoff:e}")]
    BelowCutoff { x0: f64, cutoff: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
