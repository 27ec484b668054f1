//! Markov-regime-switching GARCH with multivariate normal tempered stable
//! innovations: estimation, scenario simulation, tail-risk measures and
//! risk-constrained portfolio allocation with a rolling backtest.

pub mod backtest;
pub mod data;
pub mod error;
pub mod garch;
pub mod joint;
pub mod optim;
pub mod optimizer;
pub mod risk;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod tempered_stable;

pub use error::{Error, Result};
