//! Analytics for supply contracts between a high-tech OEM and a single
//! capacity-constrained supplier.
//!
//! The crate covers the one-generation benchmark and wholesale game,
//! penalty-augmented coordinating contracts, multi-generation contracts with
//! contingent renewal, Monte-Carlo oracles for every expected-profit formula,
//! and the experiment harness that emits factorial tables and figure data.

pub mod error;
pub mod experiments;
pub mod model;
pub mod multi_gen;
pub mod numerics;
pub mod sim;
pub mod single_gen;
pub mod special;

pub use error::{ContractError, Result};
pub use model::{
    validate_params, AssumptionWarning, Assumptions, ContractTerms, DemandModel, MarketParams, OutcomeReport,
    RenewalMode, Tail, ValidationResult,
};
pub use multi_gen::{EndogenousComparison, RenewalAnalysis};
pub use numerics::{SolveConfig, SolveError};
pub use sim::{RelationshipEstimate, SimConfig, SimEstimate};
pub use single_gen::{FirstBest, PenaltyContractSolution};
pub use special::WBranch;
