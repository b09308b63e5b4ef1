use thiserror::Error;

/// Errors produced by the scheduling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("invalid decay function: {0}")]
    InvalidDecay(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("service draw {draw} for job {job} has zero probability")]
    InvalidDraw { job: usize, draw: u32 },

    #[error("hazard undefined for job {job} at age {age}: survival event has zero probability")]
    UndefinedHazard { job: usize, age: u32 },

    #[error("state budget of {budget} canonical states exceeded")]
    StateBudgetExceeded { budget: usize },

    #[error("product-support budget of {budget} joint outcomes exceeded; use Monte Carlo mode")]
    ProductBudgetExceeded { budget: u64 },

    #[error("valueless instance: every expected completion reward is zero")]
    ValuelessInstance,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
