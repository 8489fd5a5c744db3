//! Planners that use the prior: the exact finite-horizon optimum, the stopping
//! index for one known channel, and discounted Gittins indices.

mod dp;
mod gittins;
mod stopping;

pub use dp::{lattice_size, optimal_value, optimal_value_with_budget, OptimalDpStrategy, PlanResult, DEFAULT_STATE_BUDGET};
pub use gittins::{gittins_index, gittins_index_of, GittinsIndex, GittinsParams, GittinsStrategy, GittinsTable};
pub use stopping::{stopping_index, OneKnownChannel};
