//! Shared helpers for the integration suites: small random instances and
//! policies driven by the crate's deterministic stream.
#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3};
use wsac::eval::Occupancy;
use wsac::opt::solve_optimal_safe;
use wsac::rng::SplitMix64;
use wsac::{Cmdp, Policy};

pub fn random_simplex(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.next_f64() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Random instance with uniform start distribution, rewards in [0, 1], and
/// budget-folded costs in [−0.25, 0.75].
pub fn random_cmdp(rng: &mut SplitMix64, s: usize, a: usize, gamma: f64) -> Cmdp {
    let mut transition = Array3::zeros((s, a, s));
    for si in 0..s {
        for ai in 0..a {
            for (ti, v) in random_simplex(rng, s).into_iter().enumerate() {
                transition[[si, ai, ti]] = v;
            }
        }
    }
    let reward = Array2::from_shape_fn((s, a), |_| rng.next_f64());
    let cost = Array2::from_shape_fn((s, a), |_| rng.uniform(-0.25, 0.75));
    let rho = Array1::from_elem(s, 1.0 / s as f64);
    Cmdp::new(gamma, rho, transition, reward, cost).expect("valid random construction")
}

/// Keep drawing until the instance admits a safe policy.
pub fn feasible_random_cmdp(rng: &mut SplitMix64, s: usize, a: usize, gamma: f64) -> Cmdp {
    for _ in 0..200 {
        let model = random_cmdp(rng, s, a, gamma);
        if solve_optimal_safe(&model).is_ok() {
            return model;
        }
    }
    panic!("no feasible {s}x{a} instance in 200 draws");
}

pub fn random_policy(rng: &mut SplitMix64, s: usize, a: usize) -> Policy {
    let probs = Array2::from_shape_vec(
        (s, a),
        (0..s).flat_map(|_| random_simplex(rng, a)).collect(),
    )
    .expect("shape matches");
    Policy::from_probs(probs).expect("rows are simplexes")
}

/// A formally valid occupancy that weights every state equally and actions by
/// the given policy; used where an audit needs some fixed state weighting.
pub fn synthetic_occupancy(policy: &Policy) -> Occupancy {
    let s = policy.n_states() as f64;
    Occupancy::new(policy.probs().mapv(|p| p / s)).expect("rows scaled from a policy")
}

/// Two-state instance where the uniform policy is clearly suboptimal: action
/// 1 moves from state 0 to the rewarding state 1, action 0 stays put, and
/// state 1's action 0 keeps collecting reward 1. Costs never bind.
pub fn two_state_switch(gamma: f64) -> Cmdp {
    let mut transition = Array3::zeros((2, 2, 2));
    transition[[0, 0, 0]] = 1.0;
    transition[[0, 1, 1]] = 1.0;
    transition[[1, 0, 1]] = 1.0;
    transition[[1, 1, 0]] = 1.0;
    let reward = Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 1.0, 0.0]).unwrap();
    let cost = Array2::from_elem((2, 2), -1.0);
    let rho = Array1::from_elem(2, 0.5);
    Cmdp::new(gamma, rho, transition, reward, cost).expect("valid by construction")
}
