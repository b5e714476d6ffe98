//! Pessimistic critics fit from offline data.
//!
//! Everything here runs off a [`CriticProblem`]: sufficient statistics of a
//! dataset (or of an exact behavior occupancy — same code path, so the
//! population limit of every quantity is obtained by swapping constructors).
//! For a candidate value table `f` and actor policy `π` two functionals
//! matter:
//!
//! * the advantage loss `L(π, f) = E[f(s, π) − f(s, a)]`, linear in `f`, which
//!   measures how much better the actor looks than the logged actions;
//! * a weighted Bellman residual `E(f)` over a weight class, which anchors
//!   `f` to the data. The box class takes a supremum of the weighted mean
//!   residual over per-pair weights in `[0, bound]` and has a closed form;
//!   the two-point class scores the mean squared residual.
//!
//! The reward critic minimizes `L + β·E` over `[0, V_max]^{S×A}` (pessimism
//! pushes the actor's reward advantage down); the cost critic minimizes
//! `−λ·L + β·E` over `[−V_max, V_max]^{S×A}` (pessimism pushes the actor's
//! cost advantage up, scaled by the penalty weight `λ`). Both are solved by
//! projected subgradient descent with iterate averaging; each iteration costs
//! `O(S²A)` regardless of the dataset size.

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::cmdp::Cmdp;
use crate::data::Dataset;
use crate::error::{Result, WsacError};
use crate::eval;
use crate::policy::Policy;
use crate::qtable::{QTable, ValueKind};

/// Stop after this many iterations without a improvement beyond `tol`.
const STALL_ROUNDS: usize = 50;

/// Weight classes for the Bellman-residual penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightClass {
    /// Per-pair weights `w(s,a) ∈ [0, bound]`; the penalty is
    /// `max_w |E[w · residual]|`, with closed form
    /// `bound · max(Σ positive residual mass, −Σ negative residual mass)`.
    Box { bound: f64 },
    /// Squared-residual penalty `c_inf · E[residual²]`.
    TwoPoint { c_inf: f64 },
}

impl WeightClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightClass::Box { bound } => {
                if !bound.is_finite() || bound < 1.0 {
                    return Err(WsacError::config(format!(
                        "box weight bound must be a finite value ≥ 1, got {bound}"
                    )));
                }
            }
            WeightClass::TwoPoint { c_inf } => {
                if !c_inf.is_finite() || c_inf <= 0.0 {
                    return Err(WsacError::config(format!(
                        "two-point coefficient must be finite and positive, got {c_inf}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Starting point for the critic solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticInit {
    /// All zeros (projected into the box if needed).
    #[default]
    Zero,
    /// Center of the admissible box.
    Midpoint,
}

/// Projected-subgradient solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticSolverCfg {
    pub max_iters: usize,
    /// Base step; iteration `t` uses `step_size / √t`.
    pub step_size: f64,
    /// Objective improvements below this do not reset the stall counter.
    pub tol: f64,
    pub init: CriticInit,
}

impl CriticSolverCfg {
    /// Defaults scaled to the value range of the environment.
    pub fn defaults_for(v_max: f64) -> Self {
        CriticSolverCfg {
            max_iters: 2000,
            step_size: v_max,
            tol: 1e-4 * v_max,
            init: CriticInit::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(WsacError::config("critic solver needs at least one iteration"));
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(WsacError::config(format!(
                "critic step size must be finite and positive, got {}",
                self.step_size
            )));
        }
        if !self.tol.is_finite() || self.tol < 0.0 {
            return Err(WsacError::config(format!(
                "critic tolerance must be finite and non-negative, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Sufficient statistics of an offline dataset (or its population limit).
///
/// All tensors are mass-weighted so that expectations over the data reduce to
/// contractions with these tables. With empirical data, `mass(s,a)` is
/// `count(s,a)/N`; in the population limit it is the behavior occupancy
/// `d^μ(s,a)`. `kernel_mass(s,a,t)` carries the transition structure
/// (`Σ_t kernel_mass = mass`), `reward_mass`/`cost_mass` the first moments,
/// `reward_kernel`/`cost_kernel` the signal–successor cross moments, and
/// `reward_sq`/`cost_sq` the second moments — exactly what the squared
/// residual expands into.
#[derive(Clone, Debug)]
pub struct CriticProblem {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    mass: Array2<f64>,
    state_mass: Array1<f64>,
    kernel_mass: Array3<f64>,
    reward_mass: Array2<f64>,
    cost_mass: Array2<f64>,
    reward_kernel: Array3<f64>,
    cost_kernel: Array3<f64>,
    reward_sq: Array2<f64>,
    cost_sq: Array2<f64>,
}

impl CriticProblem {
    /// Empirical statistics: every expectation is a sample mean.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let (s_n, a_n) = (data.n_states(), data.n_actions());
        let n = data.len() as f64;
        let w = 1.0 / n;
        let mut p = CriticProblem::zeros(s_n, a_n, data.gamma());
        for t in data.transitions() {
            p.mass[[t.s, t.a]] += w;
            p.kernel_mass[[t.s, t.a, t.sn]] += w;
            p.reward_mass[[t.s, t.a]] += w * t.r;
            p.cost_mass[[t.s, t.a]] += w * t.c;
            p.reward_kernel[[t.s, t.a, t.sn]] += w * t.r;
            p.cost_kernel[[t.s, t.a, t.sn]] += w * t.c;
            p.reward_sq[[t.s, t.a]] += w * t.r * t.r;
            p.cost_sq[[t.s, t.a]] += w * t.c * t.c;
        }
        for s in 0..s_n {
            p.state_mass[s] = (0..a_n).map(|a| p.mass[[s, a]]).sum();
        }
        Ok(p)
    }

    /// Population statistics under the behavior policy's exact occupancy:
    /// the infinite-data limit of [`CriticProblem::from_dataset`].
    pub fn from_population(cmdp: &Cmdp, behavior: &Policy) -> Result<Self> {
        if behavior.n_states() != cmdp.n_states() || behavior.n_actions() != cmdp.n_actions() {
            return Err(WsacError::dim(format!(
                "behavior policy is {}x{} but environment is {}x{}",
                behavior.n_states(),
                behavior.n_actions(),
                cmdp.n_states(),
                cmdp.n_actions()
            )));
        }
        let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
        let d = eval::occupancy(cmdp, behavior)?;
        let mut p = CriticProblem::zeros(s_n, a_n, cmdp.gamma());
        for s in 0..s_n {
            for a in 0..a_n {
                let m = d.table()[[s, a]];
                let r = cmdp.reward()[[s, a]];
                let c = cmdp.cost()[[s, a]];
                p.mass[[s, a]] = m;
                p.reward_mass[[s, a]] = m * r;
                p.cost_mass[[s, a]] = m * c;
                p.reward_sq[[s, a]] = m * r * r;
                p.cost_sq[[s, a]] = m * c * c;
                for t in 0..s_n {
                    let pk = m * cmdp.transition()[[s, a, t]];
                    p.kernel_mass[[s, a, t]] = pk;
                    p.reward_kernel[[s, a, t]] = pk * r;
                    p.cost_kernel[[s, a, t]] = pk * c;
                }
            }
        }
        for s in 0..s_n {
            p.state_mass[s] = (0..a_n).map(|a| p.mass[[s, a]]).sum();
        }
        Ok(p)
    }

    fn zeros(n_states: usize, n_actions: usize, gamma: f64) -> Self {
        CriticProblem {
            n_states,
            n_actions,
            gamma,
            mass: Array2::zeros((n_states, n_actions)),
            state_mass: Array1::zeros(n_states),
            kernel_mass: Array3::zeros((n_states, n_actions, n_states)),
            reward_mass: Array2::zeros((n_states, n_actions)),
            cost_mass: Array2::zeros((n_states, n_actions)),
            reward_kernel: Array3::zeros((n_states, n_actions, n_states)),
            cost_kernel: Array3::zeros((n_states, n_actions, n_states)),
            reward_sq: Array2::zeros((n_states, n_actions)),
            cost_sq: Array2::zeros((n_states, n_actions)),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn v_max(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Data mass per pair (sums to 1).
    pub fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    /// Data mass per state (sums to 1).
    pub fn state_mass(&self) -> &Array1<f64> {
        &self.state_mass
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.n_states() != self.n_states || policy.n_actions() != self.n_actions {
            return Err(WsacError::dim(format!(
                "policy is {}x{} but statistics are over {}x{}",
                policy.n_states(),
                policy.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    fn check_table(&self, f: &QTable) -> Result<()> {
        if f.n_states() != self.n_states || f.n_actions() != self.n_actions {
            return Err(WsacError::dim(format!(
                "value table is {}x{} but statistics are over {}x{}",
                f.n_states(),
                f.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    fn signal(&self, kind: ValueKind) -> SignalRefs<'_> {
        match kind {
            ValueKind::Reward => SignalRefs {
                first: &self.reward_mass,
                kernel: &self.reward_kernel,
                second: &self.reward_sq,
            },
            ValueKind::Cost => SignalRefs {
                first: &self.cost_mass,
                kernel: &self.cost_kernel,
                second: &self.cost_sq,
            },
        }
    }

    /// `g(s) = Σ_a π(a|s) f(s,a)`.
    fn policy_values(&self, policy: &Policy, f: &Array2<f64>) -> Array1<f64> {
        Array1::from_shape_fn(self.n_states, |s| policy.row_value(f, s))
    }

    /// Advantage loss and its (constant) gradient share these coefficients:
    /// `∂L/∂f(s,a) = state_mass(s)·π(a|s) − mass(s,a)`.
    fn loss_grad(&self, policy: &Policy) -> Array2<f64> {
        Array2::from_shape_fn((self.n_states, self.n_actions), |(s, a)| {
            self.state_mass[s] * policy.probs()[[s, a]] - self.mass[[s, a]]
        })
    }

    fn loss_value(&self, policy: &Policy, f: &Array2<f64>) -> f64 {
        let g = self.policy_values(policy, f);
        let mut total = 0.0;
        for s in 0..self.n_states {
            total += self.state_mass[s] * g[s];
            for a in 0..self.n_actions {
                total -= self.mass[[s, a]] * f[[s, a]];
            }
        }
        total
    }

    /// Mean residual mass per pair:
    /// `m(s,a) = mass·f(s,a) − signal_mass(s,a) − γ Σ_t kernel_mass(s,a,t)·g(t)`.
    fn residual_mass(
        &self,
        kind: ValueKind,
        f: &Array2<f64>,
        g: &Array1<f64>,
    ) -> Array2<f64> {
        let sig = self.signal(kind);
        Array2::from_shape_fn((self.n_states, self.n_actions), |(s, a)| {
            let future: f64 = (0..self.n_states)
                .map(|t| self.kernel_mass[[s, a, t]] * g[t])
                .sum();
            self.mass[[s, a]] * f[[s, a]] - sig.first[[s, a]] - self.gamma * future
        })
    }

    /// Bellman penalty value for a given table.
    fn error_value(
        &self,
        kind: ValueKind,
        class: &WeightClass,
        policy: &Policy,
        f: &Array2<f64>,
    ) -> f64 {
        let g = self.policy_values(policy, f);
        match *class {
            WeightClass::Box { bound } => {
                let m = self.residual_mass(kind, f, &g);
                let mut pos = 0.0;
                let mut neg = 0.0;
                for &v in m.iter() {
                    if v > 0.0 {
                        pos += v;
                    } else {
                        neg += v;
                    }
                }
                bound * pos.max(-neg)
            }
            WeightClass::TwoPoint { c_inf } => c_inf * self.mean_squared_residual(kind, f, &g),
        }
    }

    /// `E[residual²]` expanded into the stored moments.
    fn mean_squared_residual(&self, kind: ValueKind, f: &Array2<f64>, g: &Array1<f64>) -> f64 {
        let sig = self.signal(kind);
        let gamma = self.gamma;
        let mut total = 0.0;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let fv = f[[s, a]];
                let mut future = 0.0; // Σ_t kernel·g
                let mut cross = 0.0; // Σ_t signal_kernel·g
                let mut future_sq = 0.0; // Σ_t kernel·g²
                for t in 0..self.n_states {
                    let k = self.kernel_mass[[s, a, t]];
                    future += k * g[t];
                    cross += sig.kernel[[s, a, t]] * g[t];
                    future_sq += k * g[t] * g[t];
                }
                total += self.mass[[s, a]] * fv * fv
                    - 2.0 * fv * (sig.first[[s, a]] + gamma * future)
                    + sig.second[[s, a]]
                    + 2.0 * gamma * cross
                    + gamma * gamma * future_sq;
            }
        }
        total
    }

    /// Subgradient of the Bellman penalty at `f`, written into `grad` with
    /// coefficient `scale` (accumulates, does not overwrite).
    fn error_subgradient(
        &self,
        kind: ValueKind,
        class: &WeightClass,
        policy: &Policy,
        f: &Array2<f64>,
        scale: f64,
        grad: &mut Array2<f64>,
    ) {
        let g = self.policy_values(policy, f);
        let gamma = self.gamma;
        match *class {
            WeightClass::Box { bound } => {
                let m = self.residual_mass(kind, f, &g);
                let mut pos = 0.0;
                let mut neg = 0.0;
                for &v in m.iter() {
                    if v > 0.0 {
                        pos += v;
                    } else {
                        neg += v;
                    }
                }
                // Active weight vector: `bound` on positive residuals when the
                // positive branch attains the max, `−bound` on negative
                // residuals otherwise (ties resolve to the positive branch).
                let positive_branch = pos >= -neg;
                let kappa = Array2::from_shape_fn((self.n_states, self.n_actions), |(s, a)| {
                    let v = m[[s, a]];
                    if positive_branch && v > 0.0 {
                        bound
                    } else if !positive_branch && v < 0.0 {
                        -bound
                    } else {
                        0.0
                    }
                });
                // d m(s',a') / d f(s,a) = mass·1[(s,a)] − γ·kernel(s',a',s)·π(a|s)
                let mut h = vec![0.0; self.n_states];
                for s in 0..self.n_states {
                    for a in 0..self.n_actions {
                        let k = kappa[[s, a]];
                        if k != 0.0 {
                            grad[[s, a]] += scale * k * self.mass[[s, a]];
                            for t in 0..self.n_states {
                                h[t] += k * self.kernel_mass[[s, a, t]];
                            }
                        }
                    }
                }
                for s in 0..self.n_states {
                    if h[s] != 0.0 {
                        for a in 0..self.n_actions {
                            grad[[s, a]] -= scale * gamma * policy.probs()[[s, a]] * h[s];
                        }
                    }
                }
            }
            WeightClass::TwoPoint { c_inf } => {
                let sig = self.signal(kind);
                // Direct term plus the chain through g(t) = Σ_a π(a|t) f(t,a).
                let mut dg = vec![0.0; self.n_states];
                for s in 0..self.n_states {
                    for a in 0..self.n_actions {
                        let fv = f[[s, a]];
                        let mut future = 0.0;
                        for t in 0..self.n_states {
                            let k = self.kernel_mass[[s, a, t]];
                            future += k * g[t];
                            dg[t] += -2.0 * gamma * fv * k
                                + 2.0 * gamma * sig.kernel[[s, a, t]]
                                + 2.0 * gamma * gamma * k * g[t];
                        }
                        grad[[s, a]] += scale
                            * c_inf
                            * (2.0 * fv * self.mass[[s, a]]
                                - 2.0 * (sig.first[[s, a]] + gamma * future));
                    }
                }
                for s in 0..self.n_states {
                    for a in 0..self.n_actions {
                        grad[[s, a]] += scale * c_inf * policy.probs()[[s, a]] * dg[s];
                    }
                }
            }
        }
    }
}

struct SignalRefs<'a> {
    first: &'a Array2<f64>,
    kernel: &'a Array3<f64>,
    second: &'a Array2<f64>,
}

/// Output of a critic solve.
#[derive(Clone, Debug)]
pub struct CriticSolution {
    /// The fitted value table (bounds depend on the signal).
    pub table: QTable,
    /// Objective at the returned table.
    pub objective: f64,
    /// Advantage-loss part of the objective (unscaled).
    pub loss_term: f64,
    /// Bellman-penalty part of the objective (unscaled).
    pub error_term: f64,
    /// Iterations actually run.
    pub iterations: usize,
    /// Best objective seen after each iteration (non-increasing).
    pub trace: Vec<f64>,
}

/// `E[f(s, π) − f(s, a)]` under the data distribution.
pub fn policy_advantage_loss(problem: &CriticProblem, policy: &Policy, f: &QTable) -> Result<f64> {
    problem.check_policy(policy)?;
    problem.check_table(f)?;
    Ok(problem.loss_value(policy, f.values()))
}

/// Weighted Bellman residual penalty of `f` for one signal.
pub fn weighted_bellman_error(
    problem: &CriticProblem,
    policy: &Policy,
    f: &QTable,
    kind: ValueKind,
    class: &WeightClass,
) -> Result<f64> {
    problem.check_policy(policy)?;
    problem.check_table(f)?;
    class.validate()?;
    Ok(problem.error_value(kind, class, policy, f.values()))
}

/// Reward critic: `argmin_f L(π, f) + β·E(f)` over `[0, V_max]^{S×A}`.
pub fn solve_reward_critic(
    problem: &CriticProblem,
    policy: &Policy,
    class: &WeightClass,
    beta: f64,
    cfg: &CriticSolverCfg,
) -> Result<CriticSolution> {
    solve_reward_critic_warm(problem, policy, class, beta, cfg, None)
}

/// Cost critic: `argmin_f −λ·L(π, f) + β·E(f)` over `[−V_max, V_max]^{S×A}`.
pub fn solve_cost_critic(
    problem: &CriticProblem,
    policy: &Policy,
    class: &WeightClass,
    beta: f64,
    lambda: f64,
    cfg: &CriticSolverCfg,
) -> Result<CriticSolution> {
    solve_cost_critic_warm(problem, policy, class, beta, lambda, cfg, None)
}

pub(crate) fn solve_reward_critic_warm(
    problem: &CriticProblem,
    policy: &Policy,
    class: &WeightClass,
    beta: f64,
    cfg: &CriticSolverCfg,
    warm: Option<&QTable>,
) -> Result<CriticSolution> {
    let (lo, hi) = QTable::reward_bounds(problem.v_max());
    solve_inner(
        problem,
        policy,
        ValueKind::Reward,
        class,
        beta,
        1.0,
        lo,
        hi,
        cfg,
        warm,
    )
}

pub(crate) fn solve_cost_critic_warm(
    problem: &CriticProblem,
    policy: &Policy,
    class: &WeightClass,
    beta: f64,
    lambda: f64,
    cfg: &CriticSolverCfg,
    warm: Option<&QTable>,
) -> Result<CriticSolution> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(WsacError::config(format!(
            "penalty weight must be finite and non-negative, got {lambda}"
        )));
    }
    let (lo, hi) = QTable::cost_bounds(problem.v_max());
    solve_inner(
        problem,
        policy,
        ValueKind::Cost,
        class,
        beta,
        -lambda,
        lo,
        hi,
        cfg,
        warm,
    )
}

#[allow(clippy::too_many_arguments)]
fn solve_inner(
    problem: &CriticProblem,
    policy: &Policy,
    kind: ValueKind,
    class: &WeightClass,
    beta: f64,
    loss_coeff: f64,
    lo: f64,
    hi: f64,
    cfg: &CriticSolverCfg,
    warm: Option<&QTable>,
) -> Result<CriticSolution> {
    problem.check_policy(policy)?;
    class.validate()?;
    cfg.validate()?;
    if !beta.is_finite() || beta < 0.0 {
        return Err(WsacError::config(format!(
            "pessimism weight must be finite and non-negative, got {beta}"
        )));
    }
    if let Some(w) = warm {
        problem.check_table(w)?;
    }

    let shape = (problem.n_states, problem.n_actions);
    let clip = |x: &mut Array2<f64>| {
        for v in x.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    };
    let mut x = match warm {
        Some(w) => w.values().clone(),
        None => match cfg.init {
            CriticInit::Zero => Array2::from_elem(shape, 0.0),
            CriticInit::Midpoint => Array2::from_elem(shape, 0.5 * (lo + hi)),
        },
    };
    clip(&mut x);

    // The loss gradient does not depend on f; precompute it once.
    let loss_grad = problem.loss_grad(policy);
    let evaluate = |f: &Array2<f64>| -> (f64, f64, f64) {
        let l = problem.loss_value(policy, f);
        let e = problem.error_value(kind, class, policy, f);
        (loss_coeff * l + beta * e, l, e)
    };

    let (mut best_obj, mut best_l, mut best_e) = evaluate(&x);
    let mut best_x = x.clone();
    let mut avg = x.clone();
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut anchor = best_obj;
    let mut stalled = 0usize;

    for t in 1..=cfg.max_iters {
        let mut grad = Array2::from_shape_fn(shape, |idx| loss_coeff * loss_grad[idx]);
        problem.error_subgradient(kind, class, policy, &x, beta, &mut grad);
        let step = cfg.step_size / (t as f64).sqrt();
        for (xv, gv) in x.iter_mut().zip(grad.iter()) {
            *xv -= step * gv;
        }
        clip(&mut x);
        // Running mean over all iterates seen so far (subgradient methods
        // converge along averages even when raw iterates oscillate).
        let tf = t as f64;
        for (av, xv) in avg.iter_mut().zip(x.iter()) {
            *av = (*av * tf + xv) / (tf + 1.0);
        }

        for candidate in [&x, &avg] {
            let (obj, l, e) = evaluate(candidate);
            if obj < best_obj {
                best_obj = obj;
                best_l = l;
                best_e = e;
                best_x.assign(candidate);
            }
        }
        trace.push(best_obj);

        if best_obj < anchor - cfg.tol {
            anchor = best_obj;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_ROUNDS {
                break;
            }
        }
    }

    let iterations = trace.len();
    Ok(CriticSolution {
        table: QTable::new(best_x, lo, hi)?,
        objective: best_obj,
        loss_term: best_l,
        error_term: best_e,
        iterations,
        trace,
    })
}
