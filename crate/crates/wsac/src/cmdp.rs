//! Constrained MDP model and its JSON serialization.
//!
//! A [`Cmdp`] is the tuple (S, A, P, R, C, γ, ρ) with finite S and A.
//! Rewards live in [0,1]; costs live in [-1,1] with the cost budget already
//! folded in at construction (store `raw_cost - budget`), so a policy is
//! *safe* exactly when its normalized expected discounted cost is ≤ 0.
//!
//! Construction validates every distribution, so downstream code can assume
//! well-formed probabilities. Validation tolerances default to the module
//! constants in [`tol`] and can be overridden where noted.

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, WsacError};

/// Numerical tolerances used by validators and exact solvers.
pub mod tol {
    /// Slack allowed when validating stored probability data and bounded
    /// reward/cost tables at construction time.
    pub const CONSTRUCTION: f64 = 1e-12;
    /// Slack allowed when checking fixed-point / flow identities produced by
    /// exact linear solves (occupancy sums, Bellman residuals, LP recovery).
    pub const FIXED_POINT: f64 = 1e-9;
}

/// Provenance attached to generated instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmdpMetadata {
    pub seed: u64,
    pub generator: String,
}

/// Finite constrained MDP. Immutable after construction; accessors only.
#[derive(Clone, Debug)]
pub struct Cmdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rho: Array1<f64>,
    transition: Array3<f64>,
    reward: Array2<f64>,
    cost: Array2<f64>,
    metadata: Option<CmdpMetadata>,
}

pub(crate) fn check_distribution(v: &[f64], what: &str, tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for (i, &p) in v.iter().enumerate() {
        if !p.is_finite() {
            return Err(WsacError::NonFinite {
                context: format!("{what}[{i}]"),
            });
        }
        if p < -tol {
            return Err(WsacError::dist(format!("{what}[{i}] = {p} is negative")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol * v.len().max(1) as f64 {
        return Err(WsacError::dist(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

impl Cmdp {
    /// Builds and validates a model. `transition` is indexed `[s, a, s']`,
    /// `reward`/`cost` are `[s, a]`. Uses the default construction tolerance.
    pub fn new(
        gamma: f64,
        rho: Array1<f64>,
        transition: Array3<f64>,
        reward: Array2<f64>,
        cost: Array2<f64>,
    ) -> Result<Self> {
        Self::with_tolerance(gamma, rho, transition, reward, cost, tol::CONSTRUCTION)
    }

    /// As [`Cmdp::new`] with an explicit validation tolerance.
    pub fn with_tolerance(
        gamma: f64,
        rho: Array1<f64>,
        transition: Array3<f64>,
        reward: Array2<f64>,
        cost: Array2<f64>,
        tol: f64,
    ) -> Result<Self> {
        let n_states = rho.len();
        let n_actions = reward.ncols();
        if n_states == 0 || n_actions == 0 {
            return Err(WsacError::dim("model needs at least one state and action"));
        }
        if transition.shape() != [n_states, n_actions, n_states] {
            return Err(WsacError::dim(format!(
                "transition shape {:?}, expected [{n_states}, {n_actions}, {n_states}]",
                transition.shape()
            )));
        }
        if reward.shape() != [n_states, n_actions] || cost.shape() != [n_states, n_actions] {
            return Err(WsacError::dim(format!(
                "reward shape {:?} / cost shape {:?}, expected [{n_states}, {n_actions}]",
                reward.shape(),
                cost.shape()
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(WsacError::config(format!(
                "discount gamma = {gamma}, expected 0 <= gamma < 1"
            )));
        }
        check_distribution(rho.as_slice().unwrap(), "rho", tol)?;
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = transition.slice(ndarray::s![s, a, ..]);
                check_distribution(
                    row.as_slice().unwrap(),
                    &format!("P[{s}][{a}]"),
                    tol,
                )?;
                let r = reward[[s, a]];
                if !r.is_finite() || !(-tol..=1.0 + tol).contains(&r) {
                    return Err(WsacError::config(format!(
                        "reward[{s}][{a}] = {r}, expected [0, 1]"
                    )));
                }
                let c = cost[[s, a]];
                if !c.is_finite() || !(-1.0 - tol..=1.0 + tol).contains(&c) {
                    return Err(WsacError::config(format!(
                        "cost[{s}][{a}] = {c}, expected [-1, 1]"
                    )));
                }
            }
        }
        Ok(Cmdp {
            n_states,
            n_actions,
            gamma,
            rho,
            transition,
            reward,
            cost,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, metadata: CmdpMetadata) -> Self {
        self.metadata = Some(metadata);
        self
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

    /// Value-scale bound 1/(1-γ): every discounted return of a [0,1] signal
    /// lies in [0, V_max], every [-1,1] signal in [-V_max, V_max].
    pub fn v_max(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    pub fn rho(&self) -> &Array1<f64> {
        &self.rho
    }

    pub fn transition(&self) -> &Array3<f64> {
        &self.transition
    }

    pub fn reward(&self) -> &Array2<f64> {
        &self.reward
    }

    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn metadata(&self) -> Option<&CmdpMetadata> {
        self.metadata.as_ref()
    }

    /// Serializes to the on-disk JSON schema. Floats are written in shortest
    /// round-trip form, so save/load reproduces every f64 bit-for-bit.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CmdpFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CmdpFile = serde_json::from_str(text)?;
        file.into_cmdp()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk schema. `P[s][a][s']`, `R[s][a]`, `C[s][a]`.
#[derive(Serialize, Deserialize)]
struct CmdpFile {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rho: Vec<f64>,
    #[serde(rename = "P")]
    p: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metadata: Option<CmdpMetadata>,
}

impl From<&Cmdp> for CmdpFile {
    fn from(m: &Cmdp) -> Self {
        let (s_n, a_n) = (m.n_states, m.n_actions);
        CmdpFile {
            n_states: s_n,
            n_actions: a_n,
            gamma: m.gamma,
            rho: m.rho.to_vec(),
            p: (0..s_n)
                .map(|s| {
                    (0..a_n)
                        .map(|a| m.transition.slice(ndarray::s![s, a, ..]).to_vec())
                        .collect()
                })
                .collect(),
            r: (0..s_n).map(|s| m.reward.row(s).to_vec()).collect(),
            c: (0..s_n).map(|s| m.cost.row(s).to_vec()).collect(),
            metadata: m.metadata.clone(),
        }
    }
}

impl CmdpFile {
    fn into_cmdp(self) -> Result<Cmdp> {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        let bad = |context: &str| WsacError::MalformedFile {
            context: context.to_string(),
        };
        if self.rho.len() != s_n {
            return Err(bad("rho length does not match n_states"));
        }
        let mut transition = Array3::zeros((s_n, a_n, s_n));
        if self.p.len() != s_n {
            return Err(bad("P outer length does not match n_states"));
        }
        for (s, per_action) in self.p.iter().enumerate() {
            if per_action.len() != a_n {
                return Err(bad("P middle length does not match n_actions"));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != s_n {
                    return Err(bad("P inner length does not match n_states"));
                }
                for (sn, &v) in row.iter().enumerate() {
                    transition[[s, a, sn]] = v;
                }
            }
        }
        let read_table = |rows: &[Vec<f64>], name: &str| -> Result<Array2<f64>> {
            if rows.len() != s_n {
                return Err(bad(&format!("{name} outer length != n_states")));
            }
            let mut out = Array2::zeros((s_n, a_n));
            for (s, row) in rows.iter().enumerate() {
                if row.len() != a_n {
                    return Err(bad(&format!("{name} inner length != n_actions")));
                }
                for (a, &v) in row.iter().enumerate() {
                    out[[s, a]] = v;
                }
            }
            Ok(out)
        };
        let reward = read_table(&self.r, "R")?;
        let cost = read_table(&self.c, "C")?;
        let mut model = Cmdp::new(self.gamma, Array1::from(self.rho), transition, reward, cost)?;
        if let Some(md) = self.metadata {
            model = model.with_metadata(md);
        }
        Ok(model)
    }
}
