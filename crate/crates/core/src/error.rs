//! Error type shared by every module in the crate.

use thiserror::Error;

/// Failure modes of the simulator. Construction errors (`InfeasibleGeometry`,
/// `InvalidConfig`) are caller mistakes; numerical errors (`RankDeficient`,
/// `NonConvergence`) can occur on valid inputs and are meant to be handled.
#[derive(Debug, Error)]
pub enum RisError {
    /// The requested distances admit no planar placement.
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Channel matrix lost full row rank (two users nearly coincident).
    #[error(
        "rank-deficient channel: singular-value ratio {ratio:.3e} below tolerance {tol:.1e}"
    )]
    RankDeficient { ratio: f64, tol: f64 },

    /// A Gram matrix solve failed.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// Exact per-element synthesis was asked for more draws than allowed.
    #[error(
        "draw budget exceeded: {required} fading draws requested, budget is {budget}; \
         use the CLT shortcut for panels this large"
    )]
    BudgetExceeded { required: u128, budget: u128 },

    /// Adaptive quadrature stalled before reaching its tolerance.
    #[error(
        "quadrature did not converge after {refinements} refinements \
         (last relative change {last_change:.3e})"
    )]
    NonConvergence { refinements: u32, last_change: f64 },

    /// A confidence interval needs at least two samples.
    #[error("degenerate interval: need at least 2 samples, got {0}")]
    DegenerateInterval(usize),

    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// More than the tolerated fraction of Monte Carlo trials was discarded.
    #[error("{discarded} of {trials} trials discarded; redraw budget is 1%")]
    ExcessiveDiscards { discarded: u64, trials: u64 },
}

pub type Result<T> = std::result::Result<T, RisError>;
