//! Exact policy evaluation on a known model: value solves, normalized
//! returns, discounted occupancy measures, importance weights and the l2
//! concentrability coefficient.
//!
//! Returns are *normalized*: J(π) = (1-γ)·E_{s~ρ}[V^π(s)], so J_r ∈ [0,1]
//! and J_c ∈ [-1,1]. Occupancies are the normalized discounted visitation
//! measures d^π(s,a) = (1-γ)·Σ_t γ^t Pr(s_t=s, a_t=a), which sum to one.
//!
//! Linear systems are solved by dense LU (the model is tabular and small);
//! the state occupancy uses the S×S flow system
//! `(I - γ P_πᵀ) d = (1-γ) ρ` and the factorization d^π(s,a) = π(a|s)·d^π(s).

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::cmdp::{tol, Cmdp};
use crate::error::{Result, WsacError};
use crate::policy::{MixturePolicy, Policy};
use crate::qtable::{QTable, ValueKind};

/// Everything exact evaluation yields for one policy (or mixture).
#[derive(Clone, Debug)]
pub struct ValueBundle {
    /// State values of the reward signal.
    pub v_r: Array1<f64>,
    /// State values of the cost signal.
    pub v_c: Array1<f64>,
    /// Action values of the reward signal.
    pub q_r: Array2<f64>,
    /// Action values of the cost signal.
    pub q_c: Array2<f64>,
    /// Normalized expected discounted reward, in [0, 1].
    pub j_r: f64,
    /// Normalized expected discounted cost, in [-1, 1]; safe means ≤ 0.
    pub j_c: f64,
}

/// Normalized discounted state-action visitation measure; entries sum to 1.
#[derive(Clone, Debug)]
pub struct Occupancy {
    d: Array2<f64>,
}

impl Occupancy {
    /// Validates non-negativity (within the fixed-point tolerance) and unit
    /// total mass, then clamps float dust to exact zero.
    pub fn new(mut d: Array2<f64>) -> Result<Self> {
        let mut sum = 0.0;
        for ((s, a), v) in d.indexed_iter_mut() {
            if !v.is_finite() {
                return Err(WsacError::NonFinite {
                    context: format!("occupancy[{s}][{a}]"),
                });
            }
            if *v < -tol::FIXED_POINT {
                return Err(WsacError::dist(format!(
                    "occupancy[{s}][{a}] = {v} is negative"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
            sum += *v;
        }
        if (sum - 1.0).abs() > tol::FIXED_POINT {
            return Err(WsacError::dist(format!(
                "occupancy sums to {sum}, expected 1"
            )));
        }
        Ok(Occupancy { d })
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn n_states(&self) -> usize {
        self.d.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.d.ncols()
    }

    /// State marginal d(s) = Σ_a d(s,a).
    pub fn state_marginal(&self) -> Array1<f64> {
        Array1::from_iter(self.d.rows().into_iter().map(|r| r.sum()))
    }
}

fn check_shape(cmdp: &Cmdp, policy: &Policy) -> Result<()> {
    if policy.n_states() != cmdp.n_states() || policy.n_actions() != cmdp.n_actions() {
        return Err(WsacError::dim(format!(
            "policy is {}x{}, model is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            cmdp.n_states(),
            cmdp.n_actions()
        )));
    }
    Ok(())
}

/// `P_π[s, s'] = Σ_a π(a|s) P(s'|s,a)`.
fn policy_transition(cmdp: &Cmdp, policy: &Policy) -> Array2<f64> {
    let n = cmdp.n_states();
    let mut out = Array2::zeros((n, n));
    let p = cmdp.transition();
    for s in 0..n {
        for a in 0..cmdp.n_actions() {
            let w = policy.probs()[[s, a]];
            if w == 0.0 {
                continue;
            }
            for sn in 0..n {
                out[[s, sn]] += w * p[[s, a, sn]];
            }
        }
    }
    out
}

/// Solves `(I - γ M) x = b` by LU with partial pivoting.
fn solve_discounted(m: &Array2<f64>, gamma: f64, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = b.len();
    let mut sys = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            sys[(i, j)] -= gamma * m[[i, j]];
        }
    }
    let rhs = DVector::from_iterator(n, b.iter().copied());
    let lu = sys.lu();
    let x = lu.solve(&rhs).ok_or_else(|| WsacError::SingularSystem {
        context: "discounted policy system (I - gamma*M)".into(),
    })?;
    Ok(Array1::from_iter(x.iter().copied()))
}

fn signal_table<'a>(cmdp: &'a Cmdp, kind: ValueKind) -> &'a Array2<f64> {
    match kind {
        ValueKind::Reward => cmdp.reward(),
        ValueKind::Cost => cmdp.cost(),
    }
}

fn eval_signal(
    cmdp: &Cmdp,
    policy: &Policy,
    p_pi: &Array2<f64>,
    kind: ValueKind,
) -> Result<(Array1<f64>, Array2<f64>, f64)> {
    let table = signal_table(cmdp, kind);
    let n = cmdp.n_states();
    let sig_pi = Array1::from_iter((0..n).map(|s| policy.row_value(table, s)));
    let v = solve_discounted(p_pi, cmdp.gamma(), &sig_pi)?;
    let mut q = Array2::zeros((n, cmdp.n_actions()));
    let p = cmdp.transition();
    for s in 0..n {
        for a in 0..cmdp.n_actions() {
            let mut next = 0.0;
            for sn in 0..n {
                next += p[[s, a, sn]] * v[sn];
            }
            q[[s, a]] = table[[s, a]] + cmdp.gamma() * next;
        }
    }
    let j = (1.0 - cmdp.gamma()) * cmdp.rho().dot(&v);
    Ok((v, q, j))
}

/// Exact evaluation of a stationary policy: reward and cost state/action
/// values plus normalized returns.
pub fn policy_eval(cmdp: &Cmdp, policy: &Policy) -> Result<ValueBundle> {
    check_shape(cmdp, policy)?;
    let p_pi = policy_transition(cmdp, policy);
    let (v_r, q_r, j_r) = eval_signal(cmdp, policy, &p_pi, ValueKind::Reward)?;
    let (v_c, q_c, j_c) = eval_signal(cmdp, policy, &p_pi, ValueKind::Cost)?;
    Ok(ValueBundle {
        v_r,
        v_c,
        q_r,
        q_c,
        j_r,
        j_c,
    })
}

/// Exact normalized discounted occupancy d^π.
pub fn occupancy(cmdp: &Cmdp, policy: &Policy) -> Result<Occupancy> {
    check_shape(cmdp, policy)?;
    let p_pi = policy_transition(cmdp, policy);
    // Flow system on states: d = (1-γ)ρ + γ P_πᵀ d.
    let p_pi_t = p_pi.t().to_owned();
    let b = cmdp.rho() * (1.0 - cmdp.gamma());
    let d_state = solve_discounted(&p_pi_t, cmdp.gamma(), &b)?;
    let mut d = Array2::zeros((cmdp.n_states(), cmdp.n_actions()));
    for s in 0..cmdp.n_states() {
        for a in 0..cmdp.n_actions() {
            d[[s, a]] = d_state[s] * policy.probs()[[s, a]];
        }
    }
    Occupancy::new(d)
}

/// Exact evaluation of a uniform mixture under per-episode semantics: all
/// fields are plain means over the members' bundles.
pub fn mixture_eval(cmdp: &Cmdp, mixture: &MixturePolicy) -> Result<ValueBundle> {
    let k = mixture.len() as f64;
    let mut acc: Option<ValueBundle> = None;
    for member in mixture.members() {
        let b = policy_eval(cmdp, member)?;
        acc = Some(match acc {
            None => b,
            Some(mut t) => {
                t.v_r += &b.v_r;
                t.v_c += &b.v_c;
                t.q_r += &b.q_r;
                t.q_c += &b.q_c;
                t.j_r += b.j_r;
                t.j_c += b.j_c;
                t
            }
        });
    }
    let mut out = acc.expect("mixture has at least one member");
    out.v_r /= k;
    out.v_c /= k;
    out.q_r /= k;
    out.q_c /= k;
    out.j_r /= k;
    out.j_c /= k;
    Ok(out)
}

/// One application of the policy Bellman operator for the given signal:
/// `(T f)(s,a) = sig(s,a) + γ · E_{s'~P(·|s,a)}[ Σ_a' π(a'|s') f(s',a') ]`.
///
/// Input entries must lie in the signal's natural box ([0, V_max] for reward,
/// [-V_max, V_max] for cost); the operator maps that box into itself, so the
/// output is returned un-clipped with the same natural bounds.
pub fn bellman_apply(cmdp: &Cmdp, policy: &Policy, f: &QTable, kind: ValueKind) -> Result<QTable> {
    check_shape(cmdp, policy)?;
    if f.n_states() != cmdp.n_states() || f.n_actions() != cmdp.n_actions() {
        return Err(WsacError::dim("value table shape does not match model"));
    }
    let (lower, upper) = match kind {
        ValueKind::Reward => QTable::reward_bounds(cmdp.v_max()),
        ValueKind::Cost => QTable::cost_bounds(cmdp.v_max()),
    };
    for ((s, a), &v) in f.values().indexed_iter() {
        if v < lower - tol::FIXED_POINT || v > upper + tol::FIXED_POINT {
            return Err(WsacError::config(format!(
                "input table[{s}][{a}] = {v} outside the natural box [{lower}, {upper}]"
            )));
        }
    }
    let table = signal_table(cmdp, kind);
    let n = cmdp.n_states();
    // f(s', π) for every next state.
    let f_pi = Array1::from_iter((0..n).map(|sn| policy.row_value(f.values(), sn)));
    let p = cmdp.transition();
    let mut out = Array2::zeros((n, cmdp.n_actions()));
    for s in 0..n {
        for a in 0..cmdp.n_actions() {
            let mut next = 0.0;
            for sn in 0..n {
                next += p[[s, a, sn]] * f_pi[sn];
            }
            out[[s, a]] = table[[s, a]] + cmdp.gamma() * next;
        }
    }
    QTable::new(out, lower, upper)
}

/// Threshold below which a target occupancy entry is treated as "no mass"
/// when the behavior has none (protects against solver dust).
const COVERAGE_TOL: f64 = 1e-12;

/// Pointwise importance weights w(s,a) = d_target(s,a) / d_behavior(s,a).
///
/// Entries where both measures vanish are 0 by convention. If the target puts
/// real mass where the behavior has none, the weight is undefined and a
/// coverage violation naming the offending pair is returned.
pub fn importance_weights(target: &Occupancy, behavior: &Occupancy) -> Result<Array2<f64>> {
    if target.table().dim() != behavior.table().dim() {
        return Err(WsacError::dim("occupancy shapes differ"));
    }
    let mut w = Array2::zeros(target.table().dim());
    for ((s, a), &dt) in target.table().indexed_iter() {
        let db = behavior.table()[[s, a]];
        if db > 0.0 {
            w[[s, a]] = dt / db;
        } else if dt > COVERAGE_TOL {
            return Err(WsacError::CoverageViolation {
                state: s,
                action: a,
                target: dt,
            });
        }
        // both (effectively) zero: weight stays 0
    }
    Ok(w)
}

/// l2 concentrability of `target` with respect to `behavior`:
/// `C = sqrt( Σ_{s,a} d_b(s,a) · w(s,a)² )` with w the importance weights.
/// Always ≥ 1 (Cauchy–Schwarz), and C² never exceeds the sup-norm of w.
pub fn concentrability_l2(target: &Occupancy, behavior: &Occupancy) -> Result<f64> {
    let w = importance_weights(target, behavior)?;
    let mut acc = 0.0;
    for ((s, a), &wi) in w.indexed_iter() {
        acc += behavior.table()[[s, a]] * wi * wi;
    }
    Ok(acc.sqrt())
}
