//! Random instance generation.
//!
//! Transition rows are symmetric Dirichlet draws (realized as normalized Gamma
//! samples), rewards are uniform on [0, 1], and raw costs are sparse uniform
//! draws shifted by the budget so that "safe" means long-run cost at most zero.

use anyhow::{bail, Result};
use ndarray::{Array1, Array2, Array3};
use rand::RngCore;
use rand_distr::{Distribution, Gamma};
use wsac::cmdp::CmdpMetadata;
use wsac::opt::solve_optimal_safe;
use wsac::rng::SplitMix64;
use wsac::{Cmdp, WsacError};

use crate::spec::GeneratorSpec;

/// Seed offset between regeneration attempts for infeasible instances; a
/// large prime so retries never collide with neighboring sweep seeds.
const RETRY_STRIDE: u64 = 1_000_003;

/// Attempts before giving up on finding a feasible instance.
const MAX_ATTEMPTS: u64 = 100;

/// Adapter exposing the deterministic project stream as a `rand` RNG so the
/// Gamma sampler can consume it.
struct SeedStream(SplitMix64);

impl RngCore for SeedStream {
    fn next_u32(&mut self) -> u32 {
        (self.0.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.0.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Draw one CMDP from the generator distribution. Deterministic per seed.
pub fn generate_cmdp(spec: &GeneratorSpec, seed: u64) -> Result<Cmdp> {
    spec.validate()?;
    let (s, a) = (spec.n_states, spec.n_actions);
    let gamma_dist = Gamma::new(spec.transition_concentration, 1.0)
        .expect("validated concentration is positive and finite");

    let mut transition = vec![0.0; s * a * s];
    let mut stream = SeedStream(SplitMix64::substream(seed, 0));
    for row in transition.chunks_mut(s) {
        let mut total = 0.0;
        for p in row.iter_mut() {
            *p = gamma_dist.sample(&mut stream);
            total += *p;
        }
        if total > 1e-300 {
            for p in row.iter_mut() {
                *p /= total;
            }
        } else {
            // All draws underflowed to zero (tiny concentration); fall back
            // to a uniform row rather than emit an invalid distribution.
            row.fill(1.0 / s as f64);
        }
    }

    let mut reward_rng = SplitMix64::substream(seed, 1);
    let reward: Vec<f64> = (0..s * a).map(|_| reward_rng.next_f64()).collect();

    let mut cost_rng = SplitMix64::substream(seed, 2);
    let cost: Vec<f64> = (0..s * a)
        .map(|_| {
            let raw = if cost_rng.next_f64() < spec.cost_density {
                cost_rng.next_f64()
            } else {
                0.0
            };
            raw - spec.cost_threshold
        })
        .collect();

    let transition =
        Array3::from_shape_vec((s, a, s), transition).expect("shape matches construction");
    let reward = Array2::from_shape_vec((s, a), reward).expect("shape matches construction");
    let cost = Array2::from_shape_vec((s, a), cost).expect("shape matches construction");
    let rho = Array1::from_elem(s, 1.0 / s as f64);
    let model = Cmdp::new(spec.gamma, rho, transition, reward, cost)?.with_metadata(CmdpMetadata {
        seed,
        generator: format!(
            "dirichlet(concentration={}, cost_density={}, kappa={})",
            spec.transition_concentration, spec.cost_density, spec.cost_threshold
        ),
    });
    Ok(model)
}

/// Draw a CMDP that admits at least one safe policy, regenerating with a
/// seed offset when the draw is infeasible. Returns the instance together
/// with the seed that actually produced it.
pub fn generate_feasible_cmdp(spec: &GeneratorSpec, seed: u64) -> Result<(Cmdp, u64)> {
    for attempt in 0..MAX_ATTEMPTS {
        let trial_seed = seed.wrapping_add(attempt.wrapping_mul(RETRY_STRIDE));
        let model = generate_cmdp(spec, trial_seed)?;
        match solve_optimal_safe(&model) {
            Ok(_) => {
                if attempt > 0 {
                    log::info!(
                        "seed {seed} was infeasible; regenerated with seed {trial_seed} \
                         (attempt {attempt})"
                    );
                }
                return Ok((model, trial_seed));
            }
            Err(WsacError::Infeasible { min_cost }) => {
                log::info!(
                    "seed {trial_seed}: no safe policy (minimum long-run cost {min_cost:.4}); \
                     regenerating"
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    bail!("no feasible instance found after {MAX_ATTEMPTS} attempts starting from seed {seed}");
}
