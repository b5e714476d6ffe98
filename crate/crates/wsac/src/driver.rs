//! The full offline safe actor-critic loop.
//!
//! Each of `K` iterations fits a pessimistic reward critic and an optimistic
//! (cost-inflating) cost critic against the current actor policy, combines
//! them into a payoff table, and advances the actor one no-regret step. The
//! returned policy is the uniform mixture of all `K` actor iterates: an
//! episode is played by drawing one member policy at the start and following
//! it throughout, so mixture returns are plain averages of member returns.
//!
//! The loop itself is deterministic — all randomness lives in dataset
//! sampling — so a run is reproducible from its inputs alone. The `seed`
//! recorded in config and trace is provenance for experiment bookkeeping,
//! not a source of randomness here.

use serde::{Deserialize, Serialize};

use crate::actor::{self, OracleState, PayoffTable};
use crate::cmdp::Cmdp;
use crate::critics::{self, CriticProblem, CriticSolverCfg, WeightClass};
use crate::data::Dataset;
use crate::error::{Result, WsacError};
use crate::policy::{MixturePolicy, Policy};
use crate::qtable::QTable;

/// States with data mass at or below this are considered uncovered.
const COVERAGE_EPS: f64 = 1e-12;

/// Penalty-weight schedule across iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// The same weight every iteration.
    Fixed(f64),
    /// Linear ramp from `lo` at iteration 1 to `hi` at iteration `K`
    /// (a single-iteration run uses `lo`).
    Ramp { lo: f64, hi: f64 },
}

impl LambdaSchedule {
    pub fn value_at(&self, k: usize, k_total: usize) -> f64 {
        match *self {
            LambdaSchedule::Fixed(v) => v,
            LambdaSchedule::Ramp { lo, hi } => {
                if k_total <= 1 {
                    lo
                } else {
                    lo + (hi - lo) * (k - 1) as f64 / (k_total - 1) as f64
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LambdaSchedule::Fixed(v) => {
                if !v.is_finite() || v < 0.0 {
                    return Err(WsacError::config(format!(
                        "penalty weight must be finite and non-negative, got {v}"
                    )));
                }
            }
            LambdaSchedule::Ramp { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || hi < lo {
                    return Err(WsacError::config(format!(
                        "penalty ramp needs 0 ≤ lo ≤ hi, got lo={lo}, hi={hi}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which update rule the actor uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmVariant {
    /// Hinge payoff against the reference policy, exponentiated-weights
    /// actor updates.
    #[default]
    Full,
    /// Hinge payoff, but the next policy plays the per-state argmax of the
    /// payoff (ties toward the lowest action index) instead of a smoothed
    /// update.
    GreedyUpdate,
    /// Straight penalty `f_r − λ·f_c` with no hinge or reference,
    /// exponentiated-weights updates.
    LinearPenalty,
}

/// Settings for one optimizer run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WsacConfig {
    /// Pessimism weight on the Bellman penalty inside both critics.
    pub beta: f64,
    /// Penalty-weight schedule for the cost side.
    pub lambda: LambdaSchedule,
    /// Number of actor iterations (and mixture members).
    pub k: usize,
    /// Actor learning rate; `None` picks the tuned default for `k` rounds.
    pub eta: Option<f64>,
    pub weight_class: WeightClass,
    pub critic: CriticSolverCfg,
    /// Provenance tag copied into the trace.
    pub seed: u64,
}

impl WsacConfig {
    /// Reasonable defaults for an environment with the given value range.
    pub fn defaults_for(v_max: f64) -> Self {
        WsacConfig {
            beta: 1.0,
            lambda: LambdaSchedule::Fixed(2.0),
            k: 100,
            eta: None,
            weight_class: WeightClass::Box { bound: 2.0 },
            critic: CriticSolverCfg::defaults_for(v_max),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(WsacError::config(format!(
                "pessimism weight must be finite and non-negative, got {}",
                self.beta
            )));
        }
        if self.k == 0 {
            return Err(WsacError::config("iteration count must be at least 1"));
        }
        if let Some(eta) = self.eta {
            if !eta.is_finite() || eta <= 0.0 {
                return Err(WsacError::config(format!(
                    "learning rate must be finite and positive, got {eta}"
                )));
            }
        }
        self.lambda.validate()?;
        self.weight_class.validate()?;
        self.critic.validate()
    }
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub k: usize,
    /// Reward critic objective at its returned table.
    pub crit_obj_r: f64,
    /// Cost critic objective at its returned table.
    pub crit_obj_c: f64,
    /// Advantage loss of the reward critic (unscaled).
    pub l_r: f64,
    /// Advantage loss of the cost critic (unscaled).
    pub l_c: f64,
    /// Bellman penalty of the reward critic (unscaled).
    pub e_r: f64,
    /// Bellman penalty of the cost critic (unscaled).
    pub e_c: f64,
    pub payoff_min: f64,
    pub payoff_max: f64,
}

/// Diagnostics for a whole run.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    /// True when some state carries (essentially) zero data mass, so the
    /// critics had no anchor there. Reported, not fatal.
    pub coverage_violation: bool,
    /// Provenance tag from the config.
    pub seed: u64,
}

impl RunTrace {
    /// Stable CSV rendering; columns are part of the output contract.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("k,crit_obj_r,crit_obj_c,L_r,L_c,E_r,E_c,payoff_min,payoff_max\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.k,
                r.crit_obj_r,
                r.crit_obj_c,
                r.l_r,
                r.l_c,
                r.e_r,
                r.e_c,
                r.payoff_min,
                r.payoff_max
            ));
        }
        out
    }
}

/// Everything the loop produced, for audits and ablations.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    /// Payoff table of each iteration, in order.
    pub payoffs: Vec<PayoffTable>,
    /// Reward critic table of each iteration.
    pub reward_critics: Vec<QTable>,
    /// Cost critic table of each iteration.
    pub cost_critics: Vec<QTable>,
}

/// Where the critic statistics come from.
#[derive(Clone, Copy)]
pub enum RunSource<'a> {
    /// Empirical statistics from logged transitions.
    Dataset(&'a Dataset),
    /// Population statistics under the exact behavior occupancy — the
    /// infinite-data limit of the same computation.
    Exact { cmdp: &'a Cmdp, behavior: &'a Policy },
}

/// Offline run from a dataset with the full algorithm.
pub fn run_wsac(
    data: &Dataset,
    reference: &Policy,
    config: &WsacConfig,
) -> Result<(MixturePolicy, RunTrace)> {
    let (mixture, trace, _) = run_wsac_detailed(
        RunSource::Dataset(data),
        reference,
        config,
        AlgorithmVariant::Full,
    )?;
    Ok((mixture, trace))
}

/// Population-limit run (no sampling error) with the full algorithm.
pub fn run_wsac_exact(
    cmdp: &Cmdp,
    behavior: &Policy,
    reference: &Policy,
    config: &WsacConfig,
) -> Result<(MixturePolicy, RunTrace)> {
    let (mixture, trace, _) = run_wsac_detailed(
        RunSource::Exact { cmdp, behavior },
        reference,
        config,
        AlgorithmVariant::Full,
    )?;
    Ok((mixture, trace))
}

/// Per-state argmax of the payoff, ties toward the lowest action index.
fn greedy_policy(payoff: &PayoffTable) -> Result<Policy> {
    let (s_n, a_n) = (payoff.n_states(), payoff.n_actions());
    let mut actions = Vec::with_capacity(s_n);
    for s in 0..s_n {
        let mut arg = 0;
        for a in 1..a_n {
            if payoff.values()[[s, a]] > payoff.values()[[s, arg]] {
                arg = a;
            }
        }
        actions.push(arg);
    }
    Policy::deterministic(a_n, &actions)
}

/// Full control over source and variant; returns the mixture policy, the
/// trace, and all per-iteration artifacts.
pub fn run_wsac_detailed(
    source: RunSource<'_>,
    reference: &Policy,
    config: &WsacConfig,
    variant: AlgorithmVariant,
) -> Result<(MixturePolicy, RunTrace, RunArtifacts)> {
    config.validate()?;
    let problem = match source {
        RunSource::Dataset(data) => CriticProblem::from_dataset(data)?,
        RunSource::Exact { cmdp, behavior } => CriticProblem::from_population(cmdp, behavior)?,
    };
    let (s_n, a_n) = (problem.n_states(), problem.n_actions());
    if reference.n_states() != s_n || reference.n_actions() != a_n {
        return Err(WsacError::dim(format!(
            "reference policy is {}x{} but the data is over {}x{}",
            reference.n_states(),
            reference.n_actions(),
            s_n,
            a_n
        )));
    }

    let coverage_violation = problem.state_mass().iter().any(|&m| m <= COVERAGE_EPS);
    if coverage_violation {
        log::warn!(
            "some states carry no data mass; critic values there are \
             unanchored and the run's guarantees weaken"
        );
    }

    let v_max = problem.v_max();
    let eta = config
        .eta
        .unwrap_or_else(|| actor::default_eta(a_n, v_max, config.k));
    let mut oracle = OracleState::new(s_n, a_n, eta, config.k)?;
    let mut current = oracle.policy().clone();

    let mut members = Vec::with_capacity(config.k);
    let mut records = Vec::with_capacity(config.k);
    let mut artifacts = RunArtifacts {
        payoffs: Vec::with_capacity(config.k),
        reward_critics: Vec::with_capacity(config.k),
        cost_critics: Vec::with_capacity(config.k),
    };
    let mut warm_r: Option<QTable> = None;
    let mut warm_c: Option<QTable> = None;

    for k in 1..=config.k {
        let lambda = config.lambda.value_at(k, config.k);
        members.push(current.clone());

        let sol_r = critics::solve_reward_critic_warm(
            &problem,
            &current,
            &config.weight_class,
            config.beta,
            &config.critic,
            warm_r.as_ref(),
        )?;
        let sol_c = critics::solve_cost_critic_warm(
            &problem,
            &current,
            &config.weight_class,
            config.beta,
            lambda,
            &config.critic,
            warm_c.as_ref(),
        )?;

        let payoff = match variant {
            AlgorithmVariant::Full | AlgorithmVariant::GreedyUpdate => {
                actor::aggression_limited_payoff(&sol_r.table, &sol_c.table, reference, lambda)?
            }
            AlgorithmVariant::LinearPenalty => {
                actor::linear_penalty_payoff(&sol_r.table, &sol_c.table, lambda)?
            }
        };
        let (payoff_min, payoff_max) = payoff.range();
        records.push(IterationRecord {
            k,
            crit_obj_r: sol_r.objective,
            crit_obj_c: sol_c.objective,
            l_r: sol_r.loss_term,
            l_c: sol_c.loss_term,
            e_r: sol_r.error_term,
            e_c: sol_c.error_term,
            payoff_min,
            payoff_max,
        });

        if k < config.k {
            current = match variant {
                AlgorithmVariant::GreedyUpdate => greedy_policy(&payoff)?,
                _ => {
                    oracle.advance(&payoff)?;
                    oracle.policy().clone()
                }
            };
        }
        warm_r = Some(sol_r.table.clone());
        warm_c = Some(sol_c.table.clone());
        artifacts.payoffs.push(payoff);
        artifacts.reward_critics.push(sol_r.table);
        artifacts.cost_critics.push(sol_c.table);
    }

    let mixture = MixturePolicy::new(members)?;
    let trace = RunTrace {
        records,
        coverage_violation,
        seed: config.seed,
    };
    Ok((mixture, trace, artifacts))
}
