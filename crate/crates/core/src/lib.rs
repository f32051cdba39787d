//! Coupled particle simulations of stochastic particle swarm optimisation
//! (PSO) and consensus-based optimisation (CBO), with and without local-best
//! memory, for measuring how the inertial dynamics approach the first-order
//! ones as the inertia weight `m` goes to zero.
//!
//! The modules build on each other bottom-up:
//!
//! * [`objectives`]: benchmark costs with bound metadata
//! * [`consensus`]: the softmax-weighted consensus point and Laplace functional
//! * [`noise`]: index-addressed Gaussian tapes and initial clouds
//! * [`dynamics`]: the four discrete schemes and the run loop
//! * [`metrics`]: W2, histogram KL, paired gaps, moments
//! * [`experiments`]: limit studies and the other protocol drivers
//! * [`config`] and [`cli`]: key=value configuration, CSV output, subcommands

// Negated float comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cloud;
pub mod config;
pub mod consensus;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod noise;
pub mod objectives;

pub use cloud::{Cloud, EmpiricalMeasure, SampleCloud};
pub use dynamics::{MemoryParams, Params, Scheme, SwarmState};
pub use error::{Error, Result};
pub use noise::{InitDistribution, NoiseLayout, NoiseSource, NoiseTape};
pub use objectives::Objective;
