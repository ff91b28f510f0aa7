use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum PotError {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two inputs that must agree in dimension do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value lies outside the domain of the function evaluated on it.
    #[error("domain error: {0}")]
    Domain(String),

    /// A plan carries no mass although a positive mass was requested.
    #[error("degenerate plan: total mass is zero but s = {requested}")]
    DegeneratePlan { requested: f64 },

    /// A histogram has no mass and cannot be normalized.
    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    /// Feasible-set repair ran out of slack.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// The exact oracle found no pattern satisfying the KKT conditions.
    #[error("oracle failure: {0}")]
    Oracle(String),

    /// Labels could not be propagated through the plan.
    #[error("label propagation undefined: {0}")]
    Propagation(String),

    /// A numerical routine produced a non-finite value.
    #[error("internal numerical error: {0}")]
    Numerical(String),

    /// Malformed Netpbm or plan-dump input.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PotError> = std::result::Result<T, E>;
