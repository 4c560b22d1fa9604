//! Circuit-level Glauber dynamics for the six-vertex model whose vertex
//! function has `f(0011) = 1`, `f(0110) = f(1001) = b` and zero elsewhere.
//!
//! The crate decomposes a slot-labelled 4-regular graph into circuits, samples
//! circuit assignments with single-site updates, checks the chain against
//! brute-force oracles on small instances, verifies the path-coupling drift
//! bound exactly, decides windability of 4-ary functions by exact linear
//! feasibility, and estimates the partition function by telescoping ratios.

pub mod chain;
pub mod cli;
pub mod configuration;
pub mod constraint;
pub mod counting;
pub mod coupling;
pub mod decomposition;
pub mod error;
pub mod exactness;
pub mod graph;
pub mod rational;
pub mod simplex;
pub mod windability;

pub use error::{Error, Result};
pub use rational::Rational;
