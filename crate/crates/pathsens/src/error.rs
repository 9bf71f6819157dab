use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by where they surface: model construction and file
/// ingestion, simulation, and estimation. The CLI maps these groups onto
/// process exit codes (1 = config/parse, 2 = model invariant, 3 = runtime).
#[derive(Debug, Error)]
pub enum Error {
    /// Model file could not be parsed against the JSON schema.
    #[error("model file: {0}")]
    ModelFile(String),

    /// Run configuration is inconsistent (bad flag values, unresolvable names).
    #[error("config: {0}")]
    InvalidConfig(String),

    /// A structural invariant of the model is violated.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Index out of range for the referenced collection.
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    /// Binomial coefficient exceeded 64-bit integer range.
    #[error("binomial({n}, {k}) overflows 64-bit integer arithmetic")]
    CountOverflow { n: u64, k: u64 },

    /// log-propensity gradient requested on a zero-propensity channel.
    #[error("reaction {reaction} has zero propensity; gradient undefined, skip the channel")]
    ZeroPropensityGradient { reaction: usize },

    /// One measure puts mass where the other does not.
    #[error("absolute continuity violation: {0}")]
    AbsoluteContinuityViolation(String),

    /// Perturbed parameter vector left the positive orthant.
    #[error("perturbation drives parameter '{name}' to {value} (must stay positive)")]
    NonPositivePerturbation { name: String, value: f64 },

    /// SSA jump count exceeded the runaway-network cap.
    #[error("trajectory exceeded {cap} jumps; network growth looks unbounded")]
    UnboundedGrowth { cap: u64 },

    /// A state coordinate became NaN or infinite during integration.
    #[error("non-finite state at step {step}; reduce the time step")]
    NonFiniteState { step: usize },

    /// A reaction firing would have driven a species count negative.
    #[error("reaction {reaction} would drive species {species} negative")]
    NegativeCount { reaction: usize, species: usize },

    /// Diffusion matrix not invertible at a visited state.
    #[error("singular diffusion matrix at a sampled state")]
    SingularDiffusion,

    /// Gradient atoms required but absent from the initial distribution.
    #[error("initial distribution carries no ∇ log ν atoms; cannot form its FIM")]
    MissingGradients,

    /// Query outside the valid domain (time window, lattice, step range).
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Quadratic form εᵀFε is not positive.
    #[error("quadratic form εᵀFε = {0} is not positive; ratio undefined")]
    DegenerateQuadraticForm(f64),

    /// Finite-difference step drove a parameter nonpositive.
    #[error("step h = {h} drives parameter '{name}' nonpositive; use a smaller h")]
    StepTooLarge { name: String, h: f64 },

    /// Oracle input exceeds the brute-force caps.
    #[error("oracle cap exceeded: {0}")]
    OracleCap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error per the documented contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ModelFile(_) | Error::InvalidConfig(_) => 1,
            Error::InvalidModel(_) | Error::IndexOutOfRange { .. } => 2,
            _ => 3,
        }
    }

    /// Short machine-parsable kind tag used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ModelFile(_) => "model-file",
            Error::InvalidConfig(_) => "config",
            Error::InvalidModel(_) | Error::IndexOutOfRange { .. } => "model-invariant",
            Error::Io(_) => "io",
            _ => "estimator",
        }
    }
}
