//! Distributed coordination-gain optimization over networks: Glauber
//! dynamics sampling, exact enumeration oracles, three stochastic
//! parameter-update schemes and the associated potential game.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdm;
pub mod coord;
pub mod error;
pub mod game;
pub mod graph;
pub mod harness;
pub mod objective;
pub mod oracle;

pub use error::{Error, Result};
