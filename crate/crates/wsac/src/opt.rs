//! Exact planners for small constrained MDPs.
//!
//! [`solve_optimal_safe`] finds the reward-optimal policy among all policies
//! with non-positive normalized expected cost, by solving a linear program
//! over discounted occupancy measures: maximize `Σ d·R` subject to the
//! Bellman flow constraints, `Σ d·C ≤ 0`, and `d ≥ 0`. The optimal policy is
//! recovered as the conditional `π(a|s) = d(s,a) / Σ_a d(s,a)`; constrained
//! optima are genuinely stochastic in general, which is why enumeration of
//! deterministic policies is not enough.
//!
//! [`extreme_return`] computes the unconstrained best (or worst) normalized
//! return for either signal via value iteration — useful as the reference in
//! convergence studies and as a quick feasibility probe.

use ndarray::Array2;

use crate::cmdp::{tol, Cmdp};
use crate::error::{Result, WsacError};
use crate::eval::{self, Occupancy};
use crate::lp::{self, LpError};
use crate::policy::Policy;
use crate::qtable::ValueKind;

/// States with occupancy below this are treated as unvisited when recovering
/// a policy from an occupancy measure (their action choice is irrelevant).
const MASS_EPS: f64 = 1e-12;
/// A minimal achievable cost above this means no safe policy exists.
const FEASIBILITY_TOL: f64 = tol::FIXED_POINT;
/// Value-iteration sweep cap; at `γ ≤ 0.99` convergence to 1e-13 takes a few
/// thousand sweeps, so this is only a guard against pathological inputs.
const MAX_SWEEPS: usize = 50_000;

/// Exact solution of the constrained planning problem.
#[derive(Clone, Debug)]
pub struct SafeSolution {
    /// Reward-optimal policy among all safe policies.
    pub policy: Policy,
    /// Its discounted occupancy measure.
    pub occupancy: Occupancy,
    /// Normalized expected reward return.
    pub j_r: f64,
    /// Normalized expected cost return (≤ 0 up to solver tolerance).
    pub j_c: f64,
}

fn from_lp_error(e: LpError, min_cost: f64) -> WsacError {
    match e {
        LpError::Infeasible { .. } => WsacError::Infeasible { min_cost },
        LpError::Unbounded => WsacError::Unbounded,
    }
}

/// Index of `d(s,a)` in the flattened LP variable vector.
#[inline]
fn col(s: usize, a: usize, n_actions: usize) -> usize {
    s * n_actions + a
}

/// Builds the Bellman flow rows `Σ_a d(t,a) − γ Σ_{s,a} P(s→t|a) d(s,a) =
/// (1−γ) ρ(t)`, one per state, over `n_cols` variables (extra columns beyond
/// the occupancy block are left at zero).
fn flow_rows(cmdp: &Cmdp, n_cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let gamma = cmdp.gamma();
    let p = cmdp.transition();
    let mut rows = Vec::with_capacity(s_n);
    let mut rhs = Vec::with_capacity(s_n);
    for t in 0..s_n {
        let mut row = vec![0.0; n_cols];
        for s in 0..s_n {
            for a in 0..a_n {
                let mut coef = -gamma * p[[s, a, t]];
                if s == t {
                    coef += 1.0;
                }
                row[col(s, a, a_n)] = coef;
            }
        }
        rows.push(row);
        rhs.push((1.0 - gamma) * cmdp.rho()[t]);
    }
    (rows, rhs)
}

/// Smallest normalized expected cost achievable by any policy.
///
/// Safe policies exist if and only if this is ≤ 0 (up to tolerance).
pub fn minimal_cost_return(cmdp: &Cmdp) -> Result<f64> {
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let n_cols = s_n * a_n;
    let (rows, rhs) = flow_rows(cmdp, n_cols);
    let mut c = vec![0.0; n_cols];
    for s in 0..s_n {
        for a in 0..a_n {
            c[col(s, a, a_n)] = cmdp.cost()[[s, a]];
        }
    }
    // The flow polytope is non-empty (every policy induces a point) and
    // bounded, so failures here indicate numerical trouble, not infeasibility.
    let sol = lp::solve(&c, &rows, &rhs).map_err(|e| WsacError::SingularSystem {
        context: format!("occupancy flow system could not be solved: {e}"),
    })?;
    Ok(sol.objective)
}

/// Recovers `π(a|s) = d(s,a)/Σ_a d(s,a)`, uniform at unvisited states.
fn policy_from_occupancy(d: &Array2<f64>) -> Result<Policy> {
    let (s_n, a_n) = d.dim();
    let mut probs = Array2::<f64>::zeros((s_n, a_n));
    for s in 0..s_n {
        let mass: f64 = (0..a_n).map(|a| d[[s, a]].max(0.0)).sum();
        if mass > MASS_EPS {
            for a in 0..a_n {
                probs[[s, a]] = d[[s, a]].max(0.0) / mass;
            }
        } else {
            for a in 0..a_n {
                probs[[s, a]] = 1.0 / a_n as f64;
            }
        }
    }
    Policy::from_probs(probs)
}

/// Reward-optimal safe policy, or [`WsacError::Infeasible`] with the minimal
/// achievable cost when no policy satisfies the budget.
pub fn solve_optimal_safe(cmdp: &Cmdp) -> Result<SafeSolution> {
    let min_cost = minimal_cost_return(cmdp)?;
    if min_cost > FEASIBILITY_TOL {
        return Err(WsacError::Infeasible { min_cost });
    }

    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let n_cols = s_n * a_n + 1; // occupancy block plus one cost slack
    let (mut rows, mut rhs) = flow_rows(cmdp, n_cols);
    let mut cost_row = vec![0.0; n_cols];
    for s in 0..s_n {
        for a in 0..a_n {
            cost_row[col(s, a, a_n)] = cmdp.cost()[[s, a]];
        }
    }
    cost_row[n_cols - 1] = 1.0; // slack turns Σ d·C ≤ 0 into an equality
    rows.push(cost_row);
    rhs.push(0.0);

    let mut c = vec![0.0; n_cols];
    for s in 0..s_n {
        for a in 0..a_n {
            c[col(s, a, a_n)] = -cmdp.reward()[[s, a]];
        }
    }
    let sol = lp::solve(&c, &rows, &rhs).map_err(|e| from_lp_error(e, min_cost))?;

    let mut d = Array2::<f64>::zeros((s_n, a_n));
    for s in 0..s_n {
        for a in 0..a_n {
            d[[s, a]] = sol.x[col(s, a, a_n)];
        }
    }
    let policy = policy_from_occupancy(&d)?;
    // Re-evaluate the recovered policy exactly so the reported returns and
    // occupancy are self-consistent (free of LP round-off).
    let bundle = eval::policy_eval(cmdp, &policy)?;
    let occupancy = eval::occupancy(cmdp, &policy)?;
    Ok(SafeSolution {
        policy,
        occupancy,
        j_r: bundle.j_r,
        j_c: bundle.j_c,
    })
}

/// Unconstrained extreme normalized return for one signal.
///
/// Runs value iteration to convergence, extracts the greedy deterministic
/// policy (ties broken toward the lowest action index), and returns its
/// exactly evaluated return together with the policy. `maximize` selects the
/// best-case return; `false` gives the worst case (for instance the smallest
/// achievable cost).
pub fn extreme_return(cmdp: &Cmdp, kind: ValueKind, maximize: bool) -> Result<(f64, Policy)> {
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let g = match kind {
        ValueKind::Reward => cmdp.reward(),
        ValueKind::Cost => cmdp.cost(),
    };
    let p = cmdp.transition();
    let gamma = cmdp.gamma();
    let stop = 1e-13 * cmdp.v_max().max(1.0);

    let q_value = |s: usize, a: usize, v: &[f64]| -> f64 {
        let future: f64 = (0..s_n).map(|t| p[[s, a, t]] * v[t]).sum();
        g[[s, a]] + gamma * future
    };
    let best_action = |s: usize, v: &[f64]| -> (usize, f64) {
        let mut arg = 0;
        let mut val = q_value(s, 0, v);
        for a in 1..a_n {
            let q = q_value(s, a, v);
            if (maximize && q > val) || (!maximize && q < val) {
                arg = a;
                val = q;
            }
        }
        (arg, val)
    };

    let mut v = vec![0.0; s_n];
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut delta = 0.0f64;
        let next: Vec<f64> = (0..s_n).map(|s| best_action(s, &v).1).collect();
        for s in 0..s_n {
            delta = delta.max((next[s] - v[s]).abs());
        }
        v = next;
        if delta < stop {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("value iteration hit the sweep cap before reaching tolerance");
    }

    let actions: Vec<usize> = (0..s_n).map(|s| best_action(s, &v).0).collect();
    let policy = Policy::deterministic(a_n, &actions)?;
    let bundle = eval::policy_eval(cmdp, &policy)?;
    let j = match kind {
        ValueKind::Reward => bundle.j_r,
        ValueKind::Cost => bundle.j_c,
    };
    Ok((j, policy))
}
