//! Bounded action-value tables.

use ndarray::Array2;

use crate::error::{Result, WsacError};

/// Which signal a table or operator refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Reward,
    Cost,
}

/// An action-value table `values[s, a]` together with the box `[lower, upper]`
/// its entries are required to live in. Reward critics use `[0, V_max]`, cost
/// critics `[-V_max, V_max]`. Construction validates bounds with a small slack
/// for float dust from exact solves.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: Array2<f64>,
    lower: f64,
    upper: f64,
}

const BOUND_SLACK: f64 = 1e-9;

impl QTable {
    pub fn new(values: Array2<f64>, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(WsacError::config(format!(
                "bad value box [{lower}, {upper}]"
            )));
        }
        for ((s, a), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(WsacError::NonFinite {
                    context: format!("value table[{s}][{a}]"),
                });
            }
            if v < lower - BOUND_SLACK || v > upper + BOUND_SLACK {
                return Err(WsacError::config(format!(
                    "value table[{s}][{a}] = {v} outside [{lower}, {upper}]"
                )));
            }
        }
        Ok(QTable {
            values,
            lower,
            upper,
        })
    }

    pub fn constant(n_states: usize, n_actions: usize, v: f64, lower: f64, upper: f64) -> Result<Self> {
        QTable::new(Array2::from_elem((n_states, n_actions), v), lower, upper)
    }

    /// The bounds of the reward-critic box for value scale `v_max`.
    pub fn reward_bounds(v_max: f64) -> (f64, f64) {
        (0.0, v_max)
    }

    /// The bounds of the cost-critic box for value scale `v_max`.
    pub fn cost_bounds(v_max: f64) -> (f64, f64) {
        (-v_max, v_max)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn n_states(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.values.ncols()
    }
}
