//! Simulation laboratory for one-dimensional exclusion processes started
//! from a decreasing step, the regime that develops a rarefaction fan.
//!
//! The crate combines four views of the same stochastic system and checks
//! them against each other on shared randomness:
//!
//! * a two-type particle system with tagged second-class particles,
//! * basic couplings of one-type processes whose discrepancies track those
//!   tagged particles exactly,
//! * the totally asymmetric multi-type system with one label per site,
//! * the two-type corner growth model driven by last-passage times.
//!
//! [`estimators`] provides the Monte Carlo harness that turns replica runs
//! into estimates with standard errors and reference targets; `asep-cli`
//! exposes the experiments on the command line.

pub mod engine;
pub mod estimators;
pub mod growth;
pub mod hydro;
pub mod lattice;
pub mod multitype;
pub mod oracles;
pub mod stats;
pub mod trackers;

pub use engine::{
    apply_event, next_event, replica_rng, run_coupled, run_single, BondEvent, CoupledEnsemble,
    Direction, Effect, EngineParams,
};
pub use lattice::{parse_pattern, priority, Configuration, MultiTypeConfiguration, SiteState};
