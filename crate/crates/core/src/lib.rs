//! Learning task automata and transition costs from scored demonstrations.
//!
//! A weighted finite automaton (WFA) is extracted from demonstration words by
//! spectral factorization of an empirical Hankel matrix. Planning happens on
//! the product of that automaton with a labeled gridworld MDP, and a
//! parametric transition cost is fitted by differentiating a Boltzmann policy
//! through the shortest-path values.
//!
//! Numeric layers are generic over [`Scalar`] (`f32` / `f64`); the `*64`
//! aliases below are what the command-line tools use.

pub mod cost;
pub mod demo;
pub mod eval;
pub mod expert;
pub mod gridworld;
pub mod hankel;
pub mod irl;
pub mod linalg;
pub mod optim;
pub mod planner;
pub mod scalar;
pub mod spectral;
pub mod sweep;
pub mod wfa;
pub mod word;

pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Wfa64 = wfa::Wfa<f64>;
pub type Wfa32 = wfa::Wfa<f32>;
pub type WfaState64 = wfa::WfaState<f64>;
pub type HankelBlocks64 = hankel::HankelBlocks<f64>;
pub type CostModel64 = cost::CostModel<f64>;
