//! Shared helpers for unit tests: small random models and policies driven by
//! the crate's deterministic RNG.

use ndarray::{Array1, Array2, Array3};

use crate::cmdp::Cmdp;
use crate::policy::Policy;
use crate::rng::SplitMix64;

/// Random probability vector: Dirichlet(1) via normalized exponentials.
pub fn random_simplex(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.next_f64()).ln())
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Dense random model: Dirichlet(1) transition rows, uniform rewards in
/// [0,1], costs uniform in [-0.25, 0.75] (so random instances have both safe
/// and unsafe behavior), uniform initial distribution.
pub fn random_cmdp(rng: &mut SplitMix64, n_states: usize, n_actions: usize, gamma: f64) -> Cmdp {
    let mut transition = Array3::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            for (sn, p) in random_simplex(rng, n_states).into_iter().enumerate() {
                transition[[s, a, sn]] = p;
            }
        }
    }
    let reward = Array2::from_shape_fn((n_states, n_actions), |_| rng.next_f64());
    let cost = Array2::from_shape_fn((n_states, n_actions), |_| rng.uniform(-0.25, 0.75));
    let rho = Array1::from_elem(n_states, 1.0 / n_states as f64);
    Cmdp::new(gamma, rho, transition, reward, cost).unwrap()
}

pub fn random_policy(rng: &mut SplitMix64, n_states: usize, n_actions: usize) -> Policy {
    let mut probs = Array2::zeros((n_states, n_actions));
    for s in 0..n_states {
        for (a, p) in random_simplex(rng, n_actions).into_iter().enumerate() {
            probs[[s, a]] = p;
        }
    }
    Policy::from_probs(probs).unwrap()
}

/// Deterministic two-state chain: state 0 moves to state 1 under either
/// action, state 1 is absorbing with reward 1; costs are zero.
pub fn two_state_chain(gamma: f64) -> Cmdp {
    let transition = Array3::from_shape_fn((2, 2, 2), |(_s, _a, sn)| if sn == 1 { 1.0 } else { 0.0 });
    let reward = ndarray::array![[0.0, 0.0], [1.0, 1.0]];
    let cost = ndarray::array![[0.0, 0.0], [0.0, 0.0]];
    Cmdp::new(gamma, ndarray::array![1.0, 0.0], transition, reward, cost).unwrap()
}
