//! Offline datasets: sampling from a behavior policy, JSONL persistence, and
//! policy estimation from logged transitions.
//!
//! A dataset is an i.i.d. sample from the behavior policy's discounted
//! occupancy measure: each record draws a pair `(s, a) ~ d^μ` and then a
//! successor `s' ~ P(·|s,a)`, with the reward and cost read from the tables.
//! Sampling consumes exactly two uniform draws per record (one for the pair,
//! one for the successor), which pins the byte stream for a given seed and
//! makes every dataset reproducible.

use std::io::{BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cmdp::Cmdp;
use crate::error::{Result, WsacError};
use crate::eval;
use crate::opt;
use crate::policy::Policy;
use crate::rng::SplitMix64;

/// One logged interaction: pair, reward, cost, successor state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub c: f64,
    pub sn: usize,
}

/// First line of the JSONL file; `n` is the number of transition rows.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    seed: u64,
    n: usize,
}

/// An offline dataset together with the environment dimensions it was logged
/// from. Datasets are never empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    seed: u64,
    transitions: Vec<Transition>,
}

impl Dataset {
    /// Validates index ranges and value finiteness on construction.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        seed: u64,
        transitions: Vec<Transition>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(WsacError::config("state and action counts must be positive"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(WsacError::config(format!(
                "discount factor must lie in [0, 1), got {gamma}"
            )));
        }
        if transitions.is_empty() {
            return Err(WsacError::EmptyDataset);
        }
        for (i, t) in transitions.iter().enumerate() {
            if t.s >= n_states || t.sn >= n_states || t.a >= n_actions {
                return Err(WsacError::dim(format!(
                    "transition {i} has out-of-range indices \
                     (s={}, a={}, sn={}) for {n_states} states, {n_actions} actions",
                    t.s, t.a, t.sn
                )));
            }
            if !t.r.is_finite() || !t.c.is_finite() {
                return Err(WsacError::NonFinite {
                    context: format!("transition {i} reward/cost"),
                });
            }
        }
        Ok(Dataset {
            n_states,
            n_actions,
            gamma,
            seed,
            transitions,
        })
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

    /// Seed the dataset was sampled with (0 for hand-built data).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Visit counts `n(s, a)`.
    pub fn visit_counts(&self) -> Array2<f64> {
        let mut counts = Array2::<f64>::zeros((self.n_states, self.n_actions));
        for t in &self.transitions {
            counts[[t.s, t.a]] += 1.0;
        }
        counts
    }

    /// Serializes as JSON lines: a header object followed by one object per
    /// transition.
    pub fn to_jsonl(&self) -> Result<String> {
        let header = Header {
            n_states: self.n_states,
            n_actions: self.n_actions,
            gamma: self.gamma,
            seed: self.seed,
            n: self.transitions.len(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for t in &self.transitions {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, first)) = lines.next() else {
            return Err(WsacError::MalformedFile {
                context: "dataset file is empty".into(),
            });
        };
        let header: Header = serde_json::from_str(first).map_err(|e| WsacError::MalformedFile {
            context: format!("bad header line: {e}"),
        })?;
        let mut transitions = Vec::with_capacity(header.n);
        for (idx, line) in lines {
            let t: Transition = serde_json::from_str(line).map_err(|e| WsacError::MalformedFile {
                context: format!("bad transition on line {}: {e}", idx + 1),
            })?;
            transitions.push(t);
        }
        if transitions.len() != header.n {
            return Err(WsacError::MalformedFile {
                context: format!(
                    "header promises {} transitions but file has {}",
                    header.n,
                    transitions.len()
                ),
            });
        }
        Dataset::new(
            header.n_states,
            header.n_actions,
            header.gamma,
            header.seed,
            transitions,
        )
        .map_err(|e| WsacError::MalformedFile {
            context: format!("invalid dataset contents: {e}"),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        let mut reader = BufReader::new(std::fs::File::open(path)?);
        std::io::Read::read_to_string(&mut reader, &mut text)?;
        Dataset::from_jsonl(&text)
    }
}

/// Draws `n` transitions with `(s, a) ~ d^μ` (the behavior policy's exact
/// discounted occupancy) and `s' ~ P(·|s, a)`; rewards and costs come from
/// the environment tables. Two uniform draws per record, in that order.
pub fn sample_dataset(cmdp: &Cmdp, behavior: &Policy, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(WsacError::config("sample count must be positive"));
    }
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    if behavior.n_states() != s_n || behavior.n_actions() != a_n {
        return Err(WsacError::dim(format!(
            "behavior policy is {}x{} but environment is {}x{}",
            behavior.n_states(),
            behavior.n_actions(),
            s_n,
            a_n
        )));
    }
    let occupancy = eval::occupancy(cmdp, behavior)?;
    let d = occupancy.table();
    let flat: Vec<f64> = (0..s_n)
        .flat_map(|s| (0..a_n).map(move |a| d[[s, a]]))
        .collect();
    let rows: Vec<Vec<f64>> = (0..s_n)
        .flat_map(|s| {
            (0..a_n).map(move |a| (0..s_n).map(|t| cmdp.transition()[[s, a, t]]).collect())
        })
        .collect();

    let mut rng = SplitMix64::new(seed);
    let mut transitions = Vec::with_capacity(n);
    for _ in 0..n {
        let pair = rng.categorical(&flat);
        let (s, a) = (pair / a_n, pair % a_n);
        let sn = rng.categorical(&rows[pair]);
        transitions.push(Transition {
            s,
            a,
            r: cmdp.reward()[[s, a]],
            c: cmdp.cost()[[s, a]],
            sn,
        });
    }
    Dataset::new(s_n, a_n, cmdp.gamma(), seed, transitions)
}

/// Maximum-likelihood tabular policy estimate `π(a|s) = n(s,a) / n(s)`,
/// uniform at states the dataset never visits.
pub fn behavior_clone(data: &Dataset) -> Result<Policy> {
    let counts = data.visit_counts();
    let (s_n, a_n) = counts.dim();
    let mut probs = Array2::<f64>::zeros((s_n, a_n));
    for s in 0..s_n {
        let total: f64 = (0..a_n).map(|a| counts[[s, a]]).sum();
        if total > 0.0 {
            for a in 0..a_n {
                probs[[s, a]] = counts[[s, a]] / total;
            }
        } else {
            for a in 0..a_n {
                probs[[s, a]] = 1.0 / a_n as f64;
            }
        }
    }
    Policy::from_probs(probs)
}

/// Behavior policy interpolating between uniform exploration (`p = 0`) and
/// the optimal safe policy (`p = 1`).
pub fn mixture_behavior(cmdp: &Cmdp, p: f64) -> Result<Policy> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(WsacError::config(format!(
            "mixture weight must lie in [0, 1], got {p}"
        )));
    }
    let safe = opt::solve_optimal_safe(cmdp)?;
    let uniform = Policy::uniform(cmdp.n_states(), cmdp.n_actions());
    safe.policy.blend(&uniform, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_cmdp, two_state_chain};

    fn tiny_dataset() -> Dataset {
        let t = |s, a, r, c, sn| Transition { s, a, r, c, sn };
        Dataset::new(
            2,
            2,
            0.9,
            0,
            vec![
                t(0, 0, 1.0, 0.0, 1),
                t(0, 0, 1.0, 0.0, 0),
                t(0, 1, 0.5, -0.2, 1),
                t(1, 0, 0.0, 0.1, 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_transitions() {
        let t = Transition {
            s: 5,
            a: 0,
            r: 0.0,
            c: 0.0,
            sn: 0,
        };
        assert!(matches!(
            Dataset::new(2, 2, 0.9, 0, vec![t]),
            Err(WsacError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Dataset::new(2, 2, 0.9, 0, vec![]),
            Err(WsacError::EmptyDataset)
        ));
        let t = Transition {
            s: 0,
            a: 0,
            r: f64::NAN,
            c: 0.0,
            sn: 0,
        };
        assert!(matches!(
            Dataset::new(2, 2, 0.9, 0, vec![t]),
            Err(WsacError::NonFinite { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let mut rng = SplitMix64::new(21);
        let cmdp = random_cmdp(&mut rng, 4, 3, 0.9);
        let behavior = Policy::uniform(4, 3);
        let a = sample_dataset(&cmdp, &behavior, 500, 7).unwrap();
        let b = sample_dataset(&cmdp, &behavior, 500, 7).unwrap();
        let c = sample_dataset(&cmdp, &behavior, 500, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn pair_frequencies_track_the_occupancy() {
        let mut rng = SplitMix64::new(22);
        let cmdp = random_cmdp(&mut rng, 3, 2, 0.9);
        let behavior = Policy::uniform(3, 2);
        let n = 20_000usize;
        let data = sample_dataset(&cmdp, &behavior, n, 99).unwrap();
        let d = eval::occupancy(&cmdp, &behavior).unwrap();
        let counts = data.visit_counts();
        for s in 0..3 {
            for a in 0..2 {
                let p = d.table()[[s, a]];
                let freq = counts[[s, a]] / n as f64;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (freq - p).abs() <= 4.0 * sigma + 1e-12,
                    "pair ({s},{a}): freq {freq} vs occupancy {p}"
                );
            }
        }
    }

    #[test]
    fn successor_frequencies_track_the_kernel() {
        let mut rng = SplitMix64::new(23);
        let cmdp = random_cmdp(&mut rng, 3, 2, 0.9);
        let behavior = Policy::uniform(3, 2);
        let data = sample_dataset(&cmdp, &behavior, 30_000, 5).unwrap();
        // Most visited pair.
        let counts = data.visit_counts();
        let (mut bs, mut ba) = (0, 0);
        for s in 0..3 {
            for a in 0..2 {
                if counts[[s, a]] > counts[[bs, ba]] {
                    (bs, ba) = (s, a);
                }
            }
        }
        let total = counts[[bs, ba]];
        for t in 0..3 {
            let observed = data
                .transitions()
                .iter()
                .filter(|tr| tr.s == bs && tr.a == ba && tr.sn == t)
                .count() as f64;
            let p = cmdp.transition()[[bs, ba, t]];
            let sigma = (p * (1.0 - p) / total).sqrt();
            assert!(
                (observed / total - p).abs() <= 5.0 * sigma + 1e-9,
                "successor {t}: freq {} vs kernel {p}",
                observed / total
            );
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let data = tiny_dataset();
        let text = data.to_jsonl().unwrap();
        let back = Dataset::from_jsonl(&text).unwrap();
        assert_eq!(data, back);
        // Header first, then one line per transition.
        assert_eq!(text.lines().count(), 1 + data.len());
        assert!(text.lines().next().unwrap().contains("\"n_states\""));
    }

    #[test]
    fn rejects_malformed_files() {
        let data = tiny_dataset();
        let text = data.to_jsonl().unwrap();
        // Drop the last row: header count no longer matches.
        let truncated: Vec<&str> = text.lines().take(1 + data.len() - 1).collect();
        assert!(matches!(
            Dataset::from_jsonl(&truncated.join("\n")),
            Err(WsacError::MalformedFile { .. })
        ));
        assert!(matches!(
            Dataset::from_jsonl(""),
            Err(WsacError::MalformedFile { .. })
        ));
        assert!(matches!(
            Dataset::from_jsonl("{\"not\":\"a header\"}"),
            Err(WsacError::MalformedFile { .. })
        ));
        // Out-of-range state index inside an otherwise well-formed file.
        let bad = "{\"n_states\":2,\"n_actions\":2,\"gamma\":0.9,\"seed\":0,\"n\":1}\n\
                   {\"s\":9,\"a\":0,\"r\":0.0,\"c\":0.0,\"sn\":0}\n";
        assert!(matches!(
            Dataset::from_jsonl(bad),
            Err(WsacError::MalformedFile { .. })
        ));
    }

    #[test]
    fn behavior_clone_recovers_count_ratios() {
        let data = tiny_dataset();
        let pi = behavior_clone(&data).unwrap();
        assert!((pi.probs()[[0, 0]] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pi.probs()[[0, 1]] - 1.0 / 3.0).abs() < 1e-12);
        assert!((pi.probs()[[1, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn behavior_clone_is_uniform_at_unvisited_states() {
        let t = Transition {
            s: 0,
            a: 1,
            r: 0.0,
            c: 0.0,
            sn: 0,
        };
        let data = Dataset::new(3, 2, 0.9, 0, vec![t]).unwrap();
        let pi = behavior_clone(&data).unwrap();
        assert!((pi.probs()[[1, 0]] - 0.5).abs() < 1e-12);
        assert!((pi.probs()[[2, 1]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mixture_behavior_interpolates() {
        let cmdp = two_state_chain(0.9); // zero costs: trivially feasible
        let uniform = mixture_behavior(&cmdp, 0.0).unwrap();
        for row in uniform.probs().rows() {
            for &v in row {
                assert!((v - 0.5).abs() < 1e-12);
            }
        }
        let optimal = mixture_behavior(&cmdp, 1.0).unwrap();
        let safe = opt::solve_optimal_safe(&cmdp).unwrap();
        let diff = (optimal.probs() - safe.policy.probs())
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-12);
        assert!(mixture_behavior(&cmdp, 1.5).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join("wsac-data-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.jsonl");
        let data = tiny_dataset();
        data.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(data, back);
        std::fs::remove_file(&path).ok();
    }
}
