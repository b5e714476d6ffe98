//! Randomized property suite: simplex preservation, occupancy consistency,
//! fixed points, determinism, and concentrability identities, each over a
//! thousand generated cases.

mod common;

use approx::assert_abs_diff_eq;
use common::{random_cmdp, random_policy};
use ndarray::Array2;
use proptest::prelude::*;
use wsac::actor::{OracleState, PayoffTable};
use wsac::data::sample_dataset;
use wsac::eval::{concentrability_l2, importance_weights, occupancy, policy_eval, bellman_apply};
use wsac::rng::SplitMix64;
use wsac::{QTable, ValueKind};

fn gamma_from(rng: &mut SplitMix64) -> f64 {
    rng.uniform(0.3, 0.95)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Oracle updates and policy blending keep every row a distribution, and
    /// adding a per-state constant to the payoff changes nothing.
    #[test]
    fn oracle_and_blend_preserve_simplex_rows(seed in any::<u64>(), s in 2usize..6, a in 2usize..5) {
        let mut rng = SplitMix64::new(seed);
        let payoff = PayoffTable::new(Array2::from_shape_fn((s, a), |_| rng.uniform(-5.0, 5.0)))
            .unwrap();
        let shifts: Vec<f64> = (0..s).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let shifted = PayoffTable::new(Array2::from_shape_fn((s, a), |(si, ai)| {
            payoff.values()[[si, ai]] + shifts[si]
        }))
        .unwrap();
        let eta = rng.uniform(0.01, 1.0);

        let mut oracle = OracleState::new(s, a, eta, 8).unwrap();
        let mut oracle_shifted = OracleState::new(s, a, eta, 8).unwrap();
        for _ in 0..3 {
            oracle.advance(&payoff).unwrap();
            oracle_shifted.advance(&shifted).unwrap();
        }
        for si in 0..s {
            let mut row_sum = 0.0;
            for ai in 0..a {
                let p = oracle.policy().probs()[[si, ai]];
                prop_assert!(p >= 0.0);
                row_sum += p;
                let q = oracle_shifted.policy().probs()[[si, ai]];
                prop_assert!((p - q).abs() <= 1e-12, "shift changed row {si}: {p} vs {q}");
            }
            prop_assert!((row_sum - 1.0).abs() <= 1e-12, "row {si} sums to {row_sum}");
        }

        let other = random_policy(&mut rng, s, a);
        let blended = oracle.policy().blend(&other, rng.next_f64()).unwrap();
        for si in 0..s {
            let row_sum: f64 = (0..a).map(|ai| blended.probs()[[si, ai]]).sum();
            prop_assert!((row_sum - 1.0).abs() <= 1e-12);
        }
    }

    /// Occupancies are distributions whose marginals satisfy the flow
    /// equation and whose reward pairing equals the evaluated return.
    #[test]
    fn occupancy_is_a_distribution_with_consistent_flow(seed in any::<u64>(), s in 2usize..6, a in 2usize..4) {
        let mut rng = SplitMix64::new(seed);
        let gamma = gamma_from(&mut rng);
        let model = random_cmdp(&mut rng, s, a, gamma);
        let policy = random_policy(&mut rng, s, a);

        let occ = occupancy(&model, &policy).unwrap();
        let total: f64 = occ.table().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9, "occupancy mass {total}");

        let marginal = occ.state_marginal();
        for t in 0..s {
            let mut inflow = (1.0 - gamma) * model.rho()[t];
            for si in 0..s {
                for ai in 0..a {
                    inflow += gamma * occ.table()[[si, ai]] * model.transition()[[si, ai, t]];
                }
            }
            prop_assert!(
                (marginal[t] - inflow).abs() <= 1e-8,
                "flow violated at state {t}: {} vs {inflow}",
                marginal[t]
            );
        }

        let paired: f64 = (occ.table() * model.reward()).sum();
        let bundle = policy_eval(&model, &policy).unwrap();
        prop_assert!((paired - bundle.j_r).abs() <= 1e-8);
    }

    /// Evaluated value tables are fixed points of the Bellman operator, and
    /// state values are the policy-averaged action values.
    #[test]
    fn policy_values_satisfy_the_fixed_point(seed in any::<u64>(), s in 2usize..6, a in 2usize..4) {
        let mut rng = SplitMix64::new(seed);
        let gamma = gamma_from(&mut rng);
        let model = random_cmdp(&mut rng, s, a, gamma);
        let policy = random_policy(&mut rng, s, a);
        let bundle = policy_eval(&model, &policy).unwrap();

        let v_max = model.v_max();
        for (kind, q, lo) in [
            (ValueKind::Reward, &bundle.q_r, 0.0),
            (ValueKind::Cost, &bundle.q_c, -v_max),
        ] {
            let table = QTable::new(q.clone(), lo, v_max).unwrap();
            let applied = bellman_apply(&model, &policy, &table, kind).unwrap();
            for si in 0..s {
                for ai in 0..a {
                    prop_assert!(
                        (applied.values()[[si, ai]] - q[[si, ai]]).abs() <= 1e-7,
                        "not a fixed point at ({si},{ai})"
                    );
                }
            }
        }
        for si in 0..s {
            let avg = policy.row_value(&bundle.q_r, si);
            prop_assert!((avg - bundle.v_r[si]).abs() <= 1e-9);
        }
    }

    /// Identical seeds give identical datasets and identical stream draws.
    #[test]
    fn dataset_sampling_is_deterministic(seed in any::<u64>(), s in 2usize..5, a in 2usize..4) {
        let mut rng = SplitMix64::new(seed);
        let gamma = gamma_from(&mut rng);
        let model = random_cmdp(&mut rng, s, a, gamma);
        let policy = random_policy(&mut rng, s, a);

        let data_seed = rng.next_u64();
        let first = sample_dataset(&model, &policy, 50, data_seed).unwrap();
        let second = sample_dataset(&model, &policy, 50, data_seed).unwrap();
        prop_assert_eq!(first.to_jsonl().unwrap(), second.to_jsonl().unwrap());

        let mut sub_a = SplitMix64::substream(seed, 9);
        let mut sub_b = SplitMix64::substream(seed, 9);
        for _ in 0..5 {
            prop_assert_eq!(sub_a.next_u64(), sub_b.next_u64());
        }
    }

    /// Concentrability is 1 against itself, at least 1 in general, and the
    /// importance weights it is built from reweight expectations exactly.
    #[test]
    fn concentrability_identities_hold(seed in any::<u64>(), s in 2usize..6, a in 2usize..4) {
        let mut rng = SplitMix64::new(seed);
        let gamma = gamma_from(&mut rng);
        let model = random_cmdp(&mut rng, s, a, gamma);
        let behavior = random_policy(&mut rng, s, a);
        let target = random_policy(&mut rng, s, a);

        let mu = occupancy(&model, &behavior).unwrap();
        let d_t = occupancy(&model, &target).unwrap();

        let self_c = concentrability_l2(&mu, &mu).unwrap();
        assert_abs_diff_eq!(self_c, 1.0, epsilon = 1e-9);
        let cross_c = concentrability_l2(&d_t, &mu).unwrap();
        prop_assert!(cross_c >= 1.0 - 1e-9, "concentrability {cross_c} below 1");

        let w = importance_weights(&d_t, &mu).unwrap();
        let reweighted: f64 = (0..s)
            .flat_map(|si| (0..a).map(move |ai| (si, ai)))
            .map(|(si, ai)| mu.table()[[si, ai]] * w[[si, ai]] * model.reward()[[si, ai]])
            .sum();
        let direct: f64 = (d_t.table() * model.reward()).sum();
        prop_assert!((reweighted - direct).abs() <= 1e-8);
    }
}
