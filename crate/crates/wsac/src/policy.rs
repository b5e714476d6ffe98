//! Stationary stochastic policies and uniform mixtures of policies.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WsacError};

/// Row-stochastic table `probs[s, a] = π(a|s)`. Rows are validated at
/// construction (non-negative, sum to 1 within 1e-12 per entry).
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    probs: Array2<f64>,
}

impl Policy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64),
        }
    }

    pub fn from_probs(probs: Array2<f64>) -> Result<Self> {
        let n_actions = probs.ncols();
        if probs.nrows() == 0 || n_actions == 0 {
            return Err(WsacError::dim("policy needs at least one state and action"));
        }
        for (s, row) in probs.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for (a, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    return Err(WsacError::NonFinite {
                        context: format!("policy[{s}][{a}]"),
                    });
                }
                if p < -crate::cmdp::tol::CONSTRUCTION {
                    return Err(WsacError::dist(format!(
                        "policy[{s}][{a}] = {p} is negative"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > crate::cmdp::tol::CONSTRUCTION * n_actions as f64 {
                return Err(WsacError::dist(format!(
                    "policy row {s} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Policy { probs })
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = Array2::zeros((actions.len(), n_actions));
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(WsacError::dim(format!(
                    "action {a} out of range for state {s} (n_actions = {n_actions})"
                )));
            }
            probs[[s, a]] = 1.0;
        }
        Policy::from_probs(probs)
    }

    /// Pointwise blend `w·self + (1-w)·other`, the action-probability mixing
    /// used to build partially-optimal behavior policies.
    pub fn blend(&self, other: &Policy, w: f64) -> Result<Policy> {
        if self.probs.dim() != other.probs.dim() {
            return Err(WsacError::dim("blending policies of different shapes"));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(WsacError::config(format!("blend weight {w} outside [0,1]")));
        }
        Policy::from_probs(&self.probs * w + &other.probs * (1.0 - w))
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    /// `Σ_a π(a|s) · table[s, a]` — the policy-averaged row of a value table.
    #[inline]
    pub fn row_value(&self, table: &Array2<f64>, s: usize) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.n_actions() {
            acc += self.probs[[s, a]] * table[[s, a]];
        }
        acc
    }
}

/// Uniform mixture over member policies with *per-episode* semantics: a run
/// samples one member at episode start and follows it throughout. Returns and
/// value tables of the mixture are therefore plain means over members.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePolicy {
    members: Vec<Policy>,
}

impl MixturePolicy {
    pub fn new(members: Vec<Policy>) -> Result<Self> {
        if members.is_empty() {
            return Err(WsacError::config("mixture needs at least one member"));
        }
        let dim = (members[0].n_states(), members[0].n_actions());
        if members
            .iter()
            .any(|p| (p.n_states(), p.n_actions()) != dim)
        {
            return Err(WsacError::dim("mixture members have differing shapes"));
        }
        Ok(MixturePolicy { members })
    }

    pub fn members(&self) -> &[Policy] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.members[0].n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.members[0].n_actions()
    }

    /// Serializes to the on-disk policy schema.
    pub fn to_json(&self) -> Result<String> {
        let file = MixtureFile {
            n_states: self.n_states(),
            n_actions: self.n_actions(),
            members: self
                .members
                .iter()
                .map(|p| p.probs().rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MixtureFile = serde_json::from_str(text)?;
        let mut members = Vec::with_capacity(file.members.len());
        for rows in &file.members {
            if rows.len() != file.n_states || rows.iter().any(|r| r.len() != file.n_actions) {
                return Err(WsacError::MalformedFile {
                    context: "policy member shape does not match header".into(),
                });
            }
            let mut probs = Array2::zeros((file.n_states, file.n_actions));
            for (s, row) in rows.iter().enumerate() {
                for (a, &p) in row.iter().enumerate() {
                    probs[[s, a]] = p;
                }
            }
            members.push(Policy::from_probs(probs)?);
        }
        MixturePolicy::new(members)
    }
}

#[derive(Serialize, Deserialize)]
struct MixtureFile {
    n_states: usize,
    n_actions: usize,
    members: Vec<Vec<Vec<f64>>>,
}
