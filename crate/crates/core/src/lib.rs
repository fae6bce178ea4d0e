//! Discrete potential theory for mean-zero two-dimensional lattice random
//! walks, with Monte Carlo machinery for escape-probability experiments.
//!
//! The crate has three layers:
//!
//! * exact objects — walk models ([`model`]), stopping sets ([`region`]),
//!   the potential kernel by two independent evaluators ([`kernel`]), and
//!   Green's functions / hitting probabilities by linear solves ([`green`]);
//! * reproducible trajectory simulation with composite stopping rules
//!   ([`mc`]);
//! * the experiment suite tying both together: scaling laws for half-line,
//!   line, strip and dense-set escape events, with power-law fits and
//!   exact cross-checks ([`suite`]).

pub mod green;
pub mod kernel;
pub mod mc;
pub mod model;
pub mod region;
pub mod stats;
pub mod suite;

pub use model::{Coord, LatticeBasis, StepDistribution, WalkModel};
pub use region::{DenseSet, Policy, Region};
