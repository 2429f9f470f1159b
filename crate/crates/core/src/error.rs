use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {re}{im:+}i is a pole")]
    PoleArgument { re: f64, im: f64 },
    #[error("parameters not admissible: {0}")]
    NotAdmissible(String),
    #[error("imaginary residue {residue:e} exceeds tolerance")]
    ImaginaryResidue { residue: f64 },
    #[error("series needs more than {budget} terms")]
    BudgetExceeded { budget: usize },
    #[error("quadrature refinements disagree by {difference:e}")]
    NonConvergent { difference: f64 },
    #[error("eigenvalue {eigenvalue} outside [0, 1]")]
    SpectrumOutOfRange { eigenvalue: f64 },
    #[error("site {0} listed twice")]
    DuplicatePoint(String),
    #[error("subset violation: {0}")]
    SubsetViolation(String),
    #[error("window of {size} sites exceeds the enumeration limit {limit}")]
    WindowTooLarge { size: usize, limit: usize },
    #[error("weight {value} at site {site} is not positive")]
    NonPositiveWeight { site: String, value: f64 },
    #[error("resolvent condition number {condition:e} too large")]
    SingularResolvent { condition: f64 },
    #[error("density at p is {0}, cannot condition on presence")]
    ZeroDensityAtP(f64),
    #[error("density at p is {0}, cannot condition on absence")]
    FullDensityAtP(f64),
    #[error("function evaluated at the conditioning site")]
    EvaluatedAtP,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
