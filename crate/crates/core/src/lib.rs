//! Local-measurement strategies for estimating a pure qubit state from `N`
//! identical copies.
//!
//! The crate evaluates adaptive (LOCC) measurement trees exactly, optimizes
//! them, simulates them by Monte Carlo and extracts the large-`N` behaviour
//! of the average fidelity for fixed-axis schemes.

pub mod asymptotics;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod moments;
pub mod montecarlo;
pub mod optimizer;
mod par;
pub mod quadrature;
pub mod simplex;
pub mod strategy;
pub mod sum;

pub use error::{Error, Result};
pub use estimator::{FidelityReport, GuessRule};
pub use geometry::{BlochVector, Geometry, Vec3};
pub use quadrature::{make_quadrature, QuadratureRule};
pub use strategy::{FixedStrategy, OutcomeHistory, StrategyTree, TwoStageStrategy};
