use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Blocks of a point have inconsistent lengths, or an argument has the wrong arity.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two points that must share a projection do not.
    #[error("incompatible points: {0}")]
    IncompatiblePoints(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A forward pass produced a non-finite value. `component` is the seeded input direction.
    #[error("non-finite value while differentiating along component {component}")]
    NonFinite { component: usize },

    /// The point lies outside the domain of definition of a model.
    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("inadmissible jet in cell ({i}, {j})")]
    InadmissibleCell { i: usize, j: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
}

impl Error {
    /// True for the errors that signal leaving a model's domain of definition.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Domain(_) | Error::InadmissibleCell { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
