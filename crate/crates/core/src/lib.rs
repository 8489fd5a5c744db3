//! Medium-access strategies for cognitive users sharing licensed channels.
//!
//! A cognitive user senses one of `N` channels per slot and may transmit when
//! the primary user leaves it free, which happens independently with
//! probability θ_i. The crate provides:
//!
//! * [`model`] and [`belief`]: the Bernoulli channel environment and Bayesian
//!   posteriors over θ.
//! * [`planning`]: the exact Bayesian optimum by dynamic programming, the
//!   stopping index for one unknown channel against a known one, and
//!   discounted Gittins indices.
//! * [`single_user`]: the UCB rule, random, myopic and stay-with-winner
//!   baselines, and loss accounting with the KL lower bound.
//! * [`multi_user`]: CSMA-CA contention among `K` users, the optimal symmetric
//!   mixed strategy, the proportional Nash strategy, and the online rules that
//!   learn θ while competing.
//! * [`harness`]: Monte Carlo experiments with common random numbers and
//!   CSV/JSON output.
//!
//! Channels are zero-based throughout the API; result files number channels
//! and slots from one.

pub mod belief;
pub mod error;
pub mod harness;
pub mod model;
pub mod multi_user;
pub mod planning;
pub mod rng;
pub mod single_user;
pub mod strategy;
pub mod verify;

pub use error::{Error, Result};
pub use model::{BlockConfig, ChannelRealization, ThetaVector};
pub use strategy::Strategy;
