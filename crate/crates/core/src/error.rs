use thiserror::Error;

use crate::numerics::SolveError;
use crate::special::DomainError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContractError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("no viable margin: r - k = {margin} does not exceed c = {capacity_cost}")]
    NoViableMargin { margin: f64, capacity_cost: f64 },
    #[error("this closed form requires an exponential demand tail")]
    RequiresExponentialTail,
    #[error("reservation profit {reservation} exceeds the first-best profit {first_best}")]
    ReservationTooHigh { reservation: f64, first_best: f64 },
    #[error("wholesale price {w} is below the participation floor c + k = {floor}")]
    ParticipationViolated { w: f64, floor: f64 },
    #[error("no root of the coordination residual in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

pub type Result<T> = std::result::Result<T, ContractError>;
