//! Tabular weighted safe actor-critic (WSAC) for offline constrained MDPs.
//!
//! The crate is organized bottom-up:
//!
//! - [`cmdp`]: the constrained MDP model (finite states/actions, reward in
//!   [0,1], cost in [-1,1] with the budget already folded in so that "safe"
//!   means expected discounted cost at most zero) plus JSON serialization.
//! - [`policy`]: stationary stochastic policies and uniform mixtures of them.
//! - [`eval`]: exact evaluation — value/action-value solves, normalized
//!   returns, discounted occupancy measures, importance weights and the
//!   l2 concentrability coefficient.
//! - [`lp`] / [`opt`]: a small dense simplex and the occupancy-measure linear
//!   program that yields the exact optimal safe policy.
//! - [`data`]: offline transition datasets — sampling from a behavior
//!   policy's exact occupancy, behavior cloning, JSONL round-trips.
//! - [`critics`]: pessimistic reward and adversarial cost critics, fitted by
//!   minimizing a distribution-shift loss plus a weighted Bellman-error
//!   regularizer over a box of value tables.
//! - [`actor`]: per-state exponentiated-weights (no-regret) policy updates,
//!   the aggression-limited payoff, and a regret audit.
//! - [`driver`]: the full actor-critic loop, both on a dataset and in exact
//!   (population) mode, producing a mixture policy and a per-iteration trace.
//!
//! All randomness flows through the counter-based generator in [`rng`], so
//! every artifact is reproducible from integer seeds.

pub mod actor;
pub mod cmdp;
pub mod critics;
pub mod data;
pub mod driver;
pub mod error;
pub mod eval;
pub mod lp;
pub mod opt;
pub mod policy;
pub mod qtable;
pub mod rng;

#[cfg(test)]
pub(crate) mod test_util;

pub use cmdp::Cmdp;
pub use error::{Result, WsacError};
pub use policy::{MixturePolicy, Policy};
pub use qtable::{QTable, ValueKind};
