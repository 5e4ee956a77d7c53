use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid gain specification: {0}")]
    InvalidSpec(String),
    #[error("quantile window [{a}, {b}] outside [0, {mass}]")]
    QuantileOutOfRange { a: f64, b: f64, mass: f64 },
    #[error("first moment {moment} outside attainable range [{lo}, {hi}] for mass {mass}")]
    MomentOutOfRange {
        mass: f64,
        moment: f64,
        lo: f64,
        hi: f64,
    },
    #[error("not a probability measure (total mass {mass})")]
    NotProbability { mass: f64 },
    #[error("cut at {cut} coincides with an atom")]
    CutOnAtom { cut: f64 },
    #[error("cuts must be strictly increasing and each level must refine the previous one")]
    NotNested,
    #[error("support outside the domain of gamma: {0}")]
    DomainViolation(String),
    #[error("phi is not invertible")]
    NotInvertible,
    #[error("marginals are not in convex order: {0}")]
    NotConvexOrder(String),
    #[error("shadow construction failed: {0}")]
    ShadowInfeasible(String),
    #[error("support of size {n} exceeds enumeration cap {cap}")]
    SupportTooLarge { n: usize, cap: usize },
    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),
    #[error("expected a two-point first marginal, got {0} atoms")]
    NotTwoPoint(usize),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("no root of the b* equation in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("canonical bound v* = {v_star} is not positive")]
    DegenerateBound { v_star: f64 },
    #[error("negative conditional gain {0} (martingale or Jensen violation)")]
    NegativeGain(f64),
}

impl Error {
    /// Coarse class used by front ends to pick exit codes.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SupportTooLarge { .. } => ErrorClass::Cap,
            Error::ShadowInfeasible(_)
            | Error::NoRoot { .. }
            | Error::Unbounded
            | Error::IterationLimit(_)
            | Error::NegativeGain(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Cap,
    Numerical,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
