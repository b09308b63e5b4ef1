//! Non-preemptive scheduling of jobs with deterministically decaying value.
//!
//! A discrete-time clearing system: `J` jobs with random service times and
//! non-increasing value curves are scheduled non-preemptively on `N`
//! identical processors; completing a job at slot `t` earns `v_j(t)`. The
//! crate provides
//!
//! - the system model and its stochastic transition mechanics ([`model`]),
//! - generators for the parametric service-time and decay families
//!   ([`generators`]),
//! - the greedy, rate-greedy, and earliest-deadline-first heuristics
//!   ([`policies`]),
//! - an exact finite-horizon solver and exact policy evaluation ([`dp`]),
//! - a Monte Carlo simulator with common random numbers ([`simulator`]),
//! - approximation-guarantee constants and their verification ([`bounds`]),
//! - and canned experiment suites ([`experiments`]).

pub mod bounds;
pub mod dp;
mod error;
pub mod experiments;
pub mod generators;
pub mod model;
pub mod policies;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use generators::{AMode, DecayMode, DecayShape, PmfKind, PmfMode, ScenarioSpec};
pub use model::{
    enumerate_actions, expected_completion_reward, hazard, is_terminal, transition, DecayFunction,
    DecayKind, Instance, Job, JobStatus, Pmf, ProcessorStatus, ScheduleAction, SystemState,
    TransitionOutcome,
};
pub use policies::{EarliestDeadlineFirst, Greedy, Policy, RateGreedy};
pub use simulator::{rollout, McStats, RolloutResult};
