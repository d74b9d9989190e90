use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameters outside the regime of validity: {0}")]
    Regime(String),

    #[error("state space has {states} states, above the cap of {cap}")]
    SizeCap { states: usize, cap: usize },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("{count} coexisting equilibrium macrostates; a unique one is required")]
    MultiPhase { count: usize, witness: Vec<Vec<f64>> },

    #[error("chain is not reversible (detailed-balance residual {0:e})")]
    NotReversible(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
