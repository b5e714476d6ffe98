//! No-regret actor updates.
//!
//! The actor maintains a stochastic policy and improves it against a stream
//! of per-pair payoff tables with exponentiated (multiplicative-weights)
//! updates, run independently at every state. Against an arbitrary payoff
//! stream with values in a range of width `V_max`, the average regret after
//! `K` rounds at the tuned learning rate is at most
//! `V_max · sqrt(2 ln|A| / K)` — see [`regret_bound`] — and
//! [`regret_audit`] measures the realized regret of a recorded run so the
//! guarantee can be checked empirically.
//!
//! The payoff used by the safe actor-critic combines both critics:
//! reward value minus a hinge on the cost critic's excess over a reference
//! policy, scaled by the penalty weight ([`aggression_limited_payoff`]).

use ndarray::{Array1, Array2};

use crate::cmdp::{check_distribution, tol};
use crate::error::{Result, WsacError};
use crate::eval::Occupancy;
use crate::policy::Policy;
use crate::qtable::QTable;

/// One round's payoff for every state-action pair. Values must be finite but
/// are otherwise unrestricted.
#[derive(Clone, Debug)]
pub struct PayoffTable {
    values: Array2<f64>,
}

impl PayoffTable {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WsacError::NonFinite {
                context: "payoff table".into(),
            });
        }
        Ok(PayoffTable { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_states(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.values.ncols()
    }

    /// Smallest and largest payoff entries.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in self.values.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Learning rate tuned for `k` rounds of payoffs spanning at most `v_max`:
/// `sqrt(ln|A| / (2 v_max² k))`.
pub fn default_eta(n_actions: usize, v_max: f64, k: usize) -> f64 {
    eta_from_log_count((n_actions as f64).ln(), v_max, k)
}

fn eta_from_log_count(log_actions: f64, v_max: f64, k: usize) -> f64 {
    (log_actions / (2.0 * v_max * v_max * k.max(1) as f64)).sqrt()
}

/// Classical average-regret guarantee for the tuned learning rate:
/// `v_max · sqrt(2 ln|A| / k)`.
pub fn regret_bound(n_actions: usize, v_max: f64, k: usize) -> f64 {
    v_max * (2.0 * (n_actions as f64).ln() / k.max(1) as f64).sqrt()
}

/// Exponentiated-weights learner over a fixed horizon.
///
/// Starts uniform; [`OracleState::advance`] folds in one payoff table to
/// produce the next policy. After `horizon` policies have been produced the
/// state refuses further updates, which catches off-by-one loops in callers.
#[derive(Clone, Debug)]
pub struct OracleState {
    policy: Policy,
    eta: f64,
    step: usize,
    horizon: usize,
}

impl OracleState {
    pub fn new(n_states: usize, n_actions: usize, eta: f64, horizon: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(WsacError::config("state and action counts must be positive"));
        }
        if !eta.is_finite() || eta <= 0.0 {
            return Err(WsacError::config(format!(
                "learning rate must be finite and positive, got {eta}"
            )));
        }
        if horizon == 0 {
            return Err(WsacError::config("oracle horizon must be at least 1"));
        }
        Ok(OracleState {
            policy: Policy::uniform(n_states, n_actions),
            eta,
            step: 1,
            horizon,
        })
    }

    /// The current policy (the `step`-th of the run).
    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// 1-based index of the current policy.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Multiplicative update: `π'(a|s) ∝ π(a|s) · exp(η · u(s,a))`, computed
    /// with the per-state maximum subtracted so the exponentials never
    /// overflow. Exponentiated weights keep every action's probability
    /// strictly positive.
    pub fn advance(&mut self, payoff: &PayoffTable) -> Result<()> {
        if self.step >= self.horizon {
            return Err(WsacError::config(format!(
                "oracle horizon of {} policies is exhausted",
                self.horizon
            )));
        }
        let (s_n, a_n) = (self.policy.n_states(), self.policy.n_actions());
        if payoff.n_states() != s_n || payoff.n_actions() != a_n {
            return Err(WsacError::dim(format!(
                "payoff table is {}x{} but the policy is {}x{}",
                payoff.n_states(),
                payoff.n_actions(),
                s_n,
                a_n
            )));
        }
        let mut probs = Array2::<f64>::zeros((s_n, a_n));
        for s in 0..s_n {
            let row_max = (0..a_n)
                .map(|a| payoff.values[[s, a]])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for a in 0..a_n {
                let w = self.policy.probs()[[s, a]]
                    * (self.eta * (payoff.values[[s, a]] - row_max)).exp();
                probs[[s, a]] = w;
                sum += w;
            }
            for a in 0..a_n {
                probs[[s, a]] /= sum;
            }
        }
        self.policy = Policy::from_probs(probs)?;
        self.step += 1;
        Ok(())
    }
}

/// Payoff `u(s,a) = f_r(s,a) − λ · max(0, f_c(s,a) − f_c(s, π_ref))`.
///
/// The hinge only penalizes actions whose cost estimate exceeds the
/// reference policy's at the same state, so the actor is free to improve
/// reward anywhere it does not look more aggressive than the reference.
pub fn aggression_limited_payoff(
    f_r: &QTable,
    f_c: &QTable,
    reference: &Policy,
    lambda: f64,
) -> Result<PayoffTable> {
    check_payoff_inputs(f_r, f_c, lambda)?;
    let (s_n, a_n) = (f_r.n_states(), f_r.n_actions());
    if reference.n_states() != s_n || reference.n_actions() != a_n {
        return Err(WsacError::dim(format!(
            "reference policy is {}x{} but critics are {}x{}",
            reference.n_states(),
            reference.n_actions(),
            s_n,
            a_n
        )));
    }
    let mut u = Array2::<f64>::zeros((s_n, a_n));
    for s in 0..s_n {
        let ref_cost = reference.row_value(f_c.values(), s);
        for a in 0..a_n {
            let excess = (f_c.values()[[s, a]] - ref_cost).max(0.0);
            u[[s, a]] = f_r.values()[[s, a]] - lambda * excess;
        }
    }
    PayoffTable::new(u)
}

/// Payoff `u(s,a) = f_r(s,a) − λ · f_c(s,a)` (no hinge, no reference).
pub fn linear_penalty_payoff(f_r: &QTable, f_c: &QTable, lambda: f64) -> Result<PayoffTable> {
    check_payoff_inputs(f_r, f_c, lambda)?;
    let u = Array2::from_shape_fn((f_r.n_states(), f_r.n_actions()), |idx| {
        f_r.values()[idx] - lambda * f_c.values()[idx]
    });
    PayoffTable::new(u)
}

fn check_payoff_inputs(f_r: &QTable, f_c: &QTable, lambda: f64) -> Result<()> {
    if f_r.n_states() != f_c.n_states() || f_r.n_actions() != f_c.n_actions() {
        return Err(WsacError::dim(format!(
            "reward critic is {}x{} but cost critic is {}x{}",
            f_r.n_states(),
            f_r.n_actions(),
            f_c.n_states(),
            f_c.n_actions()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(WsacError::config(format!(
            "penalty weight must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

fn check_history(
    payoffs: &[PayoffTable],
    iterates: &[Policy],
    comparator: &Policy,
) -> Result<(usize, usize)> {
    if payoffs.is_empty() || payoffs.len() != iterates.len() {
        return Err(WsacError::dim(format!(
            "need matching non-empty histories, got {} payoffs and {} policies",
            payoffs.len(),
            iterates.len()
        )));
    }
    let (s_n, a_n) = (comparator.n_states(), comparator.n_actions());
    for (k, (u, p)) in payoffs.iter().zip(iterates.iter()).enumerate() {
        if u.n_states() != s_n
            || u.n_actions() != a_n
            || p.n_states() != s_n
            || p.n_actions() != a_n
        {
            return Err(WsacError::dim(format!(
                "round {k} has inconsistent shapes in the recorded history"
            )));
        }
    }
    Ok((s_n, a_n))
}

/// State marginal of an occupancy, checked against the table shape.
fn comparator_marginal(occ: &Occupancy, s_n: usize, a_n: usize) -> Result<Array1<f64>> {
    if occ.n_states() != s_n || occ.n_actions() != a_n {
        return Err(WsacError::dim(format!(
            "comparator occupancy is {}x{} but the history is {}x{}",
            occ.n_states(),
            occ.n_actions(),
            s_n,
            a_n
        )));
    }
    let marginal = occ.state_marginal();
    check_distribution(
        marginal.as_slice().expect("marginal is contiguous"),
        "comparator state marginal",
        tol::FIXED_POINT,
    )?;
    Ok(marginal)
}

/// Realized average regret of a recorded run against a fixed comparator:
/// `(1/K) Σ_k E_{s ~ d^π}[⟨u_k(s,·), π(·|s)⟩ − ⟨u_k(s,·), π_k(·|s)⟩]`,
/// where `π` is the comparator and `d^π` its (exact) occupancy.
///
/// This is the quantity a no-regret oracle drives to zero; against the best
/// fixed comparator (see [`best_fixed_comparator`]) the tuned
/// exponentiated-weights update keeps it below [`regret_bound`] for payoff
/// streams in `[0, v_max]`. It can be negative for weak comparators.
pub fn regret_audit(
    payoffs: &[PayoffTable],
    iterates: &[Policy],
    comparator: &Policy,
    comparator_occ: &Occupancy,
) -> Result<f64> {
    let (s_n, a_n) = check_history(payoffs, iterates, comparator)?;
    let marginal = comparator_marginal(comparator_occ, s_n, a_n)?;

    let k_total = payoffs.len() as f64;
    let mut audit = 0.0;
    for s in 0..s_n {
        if marginal[s] == 0.0 {
            continue;
        }
        let mut gap = 0.0;
        for (u, p) in payoffs.iter().zip(iterates.iter()) {
            for a in 0..a_n {
                gap += (comparator.probs()[[s, a]] - p.probs()[[s, a]]) * u.values[[s, a]];
            }
        }
        audit += marginal[s] * gap / k_total;
    }
    Ok(audit)
}

/// Strongest deterministic comparator in hindsight: per state, the action
/// with the largest cumulative payoff (ties toward the lowest index).
pub fn best_fixed_comparator(payoffs: &[PayoffTable]) -> Result<Policy> {
    if payoffs.is_empty() {
        return Err(WsacError::dim("need at least one payoff table"));
    }
    let (s_n, a_n) = (payoffs[0].n_states(), payoffs[0].n_actions());
    let mut actions = Vec::with_capacity(s_n);
    for s in 0..s_n {
        let mut arg = 0;
        let mut best = f64::NEG_INFINITY;
        for a in 0..a_n {
            let total: f64 = payoffs.iter().map(|u| u.values[[s, a]]).sum();
            if total > best {
                best = total;
                arg = a;
            }
        }
        actions.push(arg);
    }
    Policy::deterministic(a_n, &actions)
}

/// Average hinge excess of the iterates and of the comparator under the
/// comparator's state occupancy:
/// `H_iter = (1/K) Σ_k E_{d^π}[Σ_a π_k(a|s) · h_k(s,a)]` and likewise for
/// the comparator, where `h_k(s,a) = max(0, f_c^k(s,a) − f_c^k(s, π_ref))`.
///
/// Together with [`regret_audit`] this checks the cost side of the
/// no-regret argument: writing `A` for the reward-critic regret and
/// `ε` for the full-payoff audit, the identity `ε = A − λ(H_cmp − H_iter)`
/// plus `A ≥ −V_max` forces `H_iter ≤ H_cmp + (ε + V_max)/λ`.
pub fn hinge_audit(
    cost_critics: &[QTable],
    iterates: &[Policy],
    reference: &Policy,
    comparator: &Policy,
    comparator_occ: &Occupancy,
) -> Result<(f64, f64)> {
    if cost_critics.is_empty() || cost_critics.len() != iterates.len() {
        return Err(WsacError::dim(format!(
            "need matching non-empty histories, got {} critics and {} policies",
            cost_critics.len(),
            iterates.len()
        )));
    }
    let (s_n, a_n) = (comparator.n_states(), comparator.n_actions());
    for f in cost_critics {
        if f.n_states() != s_n || f.n_actions() != a_n {
            return Err(WsacError::dim(
                "cost critic shape differs from the comparator's".to_string(),
            ));
        }
    }
    if reference.n_states() != s_n || reference.n_actions() != a_n {
        return Err(WsacError::dim(
            "reference policy shape differs from the comparator's".to_string(),
        ));
    }
    let marginal = comparator_marginal(comparator_occ, s_n, a_n)?;

    let k_total = cost_critics.len() as f64;
    let mut iter_hinge = 0.0;
    let mut cmp_hinge = 0.0;
    for s in 0..s_n {
        if marginal[s] == 0.0 {
            continue;
        }
        for (f_c, pi_k) in cost_critics.iter().zip(iterates.iter()) {
            let ref_cost = reference.row_value(f_c.values(), s);
            for a in 0..a_n {
                let h = (f_c.values()[[s, a]] - ref_cost).max(0.0);
                iter_hinge += marginal[s] * pi_k.probs()[[s, a]] * h / k_total;
                cmp_hinge += marginal[s] * comparator.probs()[[s, a]] * h / k_total;
            }
        }
    }
    Ok((iter_hinge, cmp_hinge))
}
