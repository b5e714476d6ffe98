//! Study drivers: concrete sweeps over generated instances, producing CSV
//! tables and SVG charts.
//!
//! Every sweep cell is independent and runs on a worker pool; results are
//! collected in deterministic order, so output files are identical for any
//! worker count. Wall-clock timings are the only nondeterministic output and
//! live in a separate `timings.csv` so the canonical tables stay
//! byte-for-byte reproducible per seed.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use wsac::actor::{best_fixed_comparator, regret_audit};
use wsac::data::{behavior_clone, mixture_behavior, sample_dataset};
use wsac::driver::{
    run_wsac_detailed, AlgorithmVariant, LambdaSchedule, RunSource, RunTrace, WsacConfig,
};
use wsac::eval::{concentrability_l2, mixture_eval, occupancy, policy_eval};
use wsac::opt::{extreme_return, solve_optimal_safe};
use wsac::{Cmdp, MixturePolicy, Policy, ValueKind, WsacError};

use crate::gen::generate_feasible_cmdp;
use crate::report::{fmt_f64, line_chart, mean_std, write_csv, write_text, Series};
use crate::spec::ExperimentSpec;

/// Column order for the per-run table. Wall time is reported separately so
/// this file is reproducible bit-for-bit.
pub const RUNS_HEADER: &str = "run_id,seed,n,beta,lambda_lo,lambda_hi,mix_p,\
j_r_behavior,j_c_behavior,j_r_wsac,j_c_wsac,c_l2_ref,regret_audit";

pub const TIMINGS_HEADER: &str = "run_id,wall_ms";

/// Behavior mixing weight for the ablation study.
const ABLATION_MIX_P: f64 = 0.5;

/// Instances averaged over in the ablation study.
const ABLATION_INSTANCES: u64 = 10;

/// Behavior mixing weight for the convergence-rate study.
const RATE_MIX_P: f64 = 0.75;

/// Suboptimality floor for the rate study: keeps the log-log regression
/// finite when a run reaches the optimum exactly.
const SUBOPT_FLOOR: f64 = 1e-4;

/// A behavior policy counts as safe when its exact long-run cost is below
/// this slack (solver output can sit a hair above zero).
const SAFE_BEHAVIOR_TOL: f64 = 1e-6;

/// Extra slack on the sensitivity safety flag.
const FLAG_TOL: f64 = 0.05;

/// One result line: what was run and how it scored under exact evaluation.
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub run_id: String,
    pub seed: u64,
    pub n: usize,
    pub beta: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub mix_p: f64,
    pub j_r_behavior: f64,
    pub j_c_behavior: f64,
    pub j_r_wsac: f64,
    pub j_c_wsac: f64,
    /// ℓ2 concentrability of the cloned reference against the behavior
    /// occupancy; −1 when the dataset missed a state the reference visits.
    pub c_l2_ref: f64,
    pub regret_audit: f64,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn validate(&self) -> Result<()> {
        let nums = [
            self.beta,
            self.lambda_lo,
            self.lambda_hi,
            self.mix_p,
            self.j_r_behavior,
            self.j_c_behavior,
            self.j_r_wsac,
            self.j_c_wsac,
            self.c_l2_ref,
            self.regret_audit,
            self.wall_ms,
        ];
        if nums.iter().any(|x| !x.is_finite()) {
            bail!("non-finite numeric field in result row {}", self.run_id);
        }
        Ok(())
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.seed,
            self.n,
            fmt_f64(self.beta),
            fmt_f64(self.lambda_lo),
            fmt_f64(self.lambda_hi),
            fmt_f64(self.mix_p),
            fmt_f64(self.j_r_behavior),
            fmt_f64(self.j_c_behavior),
            fmt_f64(self.j_r_wsac),
            fmt_f64(self.j_c_wsac),
            fmt_f64(self.c_l2_ref),
            fmt_f64(self.regret_audit),
        )
    }

    pub fn timing_line(&self) -> String {
        format!("{},{:.3}", self.run_id, self.wall_ms)
    }
}

/// Inclusive [lo, hi] range of a penalty schedule over a whole run.
pub fn lambda_bounds(schedule: &LambdaSchedule) -> (f64, f64) {
    match *schedule {
        LambdaSchedule::Fixed(x) => (x, x),
        LambdaSchedule::Ramp { lo, hi } => (lo, hi),
    }
}

/// Display normalization: reward rescaled between the instance's worst and
/// best attainable returns, cost rescaled by the budget.
pub struct Normalizer {
    pub r_min: f64,
    pub r_max: f64,
    pub kappa: f64,
}

impl Normalizer {
    pub fn for_model(model: &Cmdp, kappa: f64) -> Result<Self> {
        let (r_min, _) = extreme_return(model, ValueKind::Reward, false)?;
        let (r_max, _) = extreme_return(model, ValueKind::Reward, true)?;
        Ok(Normalizer {
            r_min: (1.0 - model.gamma()) * r_min,
            r_max: (1.0 - model.gamma()) * r_max,
            kappa,
        })
    }

    pub fn reward(&self, j_r: f64) -> f64 {
        let span = self.r_max - self.r_min;
        if span < 1e-9 {
            0.5
        } else {
            (j_r - self.r_min) / span
        }
    }

    /// Rescale so 0 means zero raw cost and 1 means exactly the budget.
    pub fn cost(&self, j_c: f64) -> f64 {
        if self.kappa <= 0.0 {
            j_c
        } else {
            (j_c + self.kappa) / self.kappa
        }
    }
}

/// One sweep cell: a dataset drawn from a mixture behavior and a solver run.
pub struct CellSpec<'a> {
    pub run_id: String,
    pub model: &'a Cmdp,
    pub mix_p: f64,
    pub n: usize,
    pub data_seed: u64,
    pub config: WsacConfig,
    pub variant: AlgorithmVariant,
    /// Reference policy for the run's hinge; behavior-cloned from the
    /// dataset when absent.
    pub reference: Option<&'a Policy>,
}

pub struct CellOutcome {
    pub row: ResultRow,
    pub trace: RunTrace,
    pub mixture: MixturePolicy,
}

/// Sample data, run the solver, and score everything with exact evaluation.
pub fn run_cell(cell: &CellSpec<'_>) -> Result<CellOutcome> {
    let t0 = Instant::now();
    let behavior = mixture_behavior(cell.model, cell.mix_p)?;
    let data = sample_dataset(cell.model, &behavior, cell.n, cell.data_seed)?;
    let reference = match cell.reference {
        Some(policy) => policy.clone(),
        None => behavior_clone(&data)?,
    };
    let (mixture, trace, artifacts) = run_wsac_detailed(
        RunSource::Dataset(&data),
        &reference,
        &cell.config,
        cell.variant,
    )?;

    let behavior_eval = policy_eval(cell.model, &behavior)?;
    let learned_eval = mixture_eval(cell.model, &mixture)?;

    let behavior_occ = occupancy(cell.model, &behavior)?;
    let reference_occ = occupancy(cell.model, &reference)?;
    let c_l2_ref = match concentrability_l2(&reference_occ, &behavior_occ) {
        Ok(c) => c,
        Err(WsacError::CoverageViolation { .. }) => -1.0,
        Err(e) => return Err(e.into()),
    };

    let comparator = best_fixed_comparator(&artifacts.payoffs)?;
    let comparator_occ = occupancy(cell.model, &comparator)?;
    let audit = regret_audit(
        &artifacts.payoffs,
        mixture.members(),
        &comparator,
        &comparator_occ,
    )?;

    let (lambda_lo, lambda_hi) = lambda_bounds(&cell.config.lambda);
    let row = ResultRow {
        run_id: cell.run_id.clone(),
        seed: cell.data_seed,
        n: cell.n,
        beta: cell.config.beta,
        lambda_lo,
        lambda_hi,
        mix_p: cell.mix_p,
        j_r_behavior: behavior_eval.j_r,
        j_c_behavior: behavior_eval.j_c,
        j_r_wsac: learned_eval.j_r,
        j_c_wsac: learned_eval.j_c,
        c_l2_ref,
        regret_audit: audit,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    };
    row.validate()?;
    Ok(CellOutcome {
        row,
        trace,
        mixture,
    })
}

fn with_pool<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> Result<T> + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    let pool = builder.build().context("building worker pool")?;
    pool.install(f)
}

fn write_run_outputs(out: &Path, rows: &[&ResultRow]) -> Result<()> {
    write_csv(
        &out.join("runs.csv"),
        RUNS_HEADER,
        rows.iter().map(|r| r.csv_line()),
    )?;
    write_csv(
        &out.join("timings.csv"),
        TIMINGS_HEADER,
        rows.iter().map(|r| r.timing_line()),
    )
}

pub struct Figure1Outcome {
    pub rows: Vec<ResultRow>,
    pub instance_seed: u64,
}

/// Behavior-quality sweep on one instance: for each mixing weight p, sample
/// data from `p·(optimal safe) + (1−p)·uniform`, run the solver, and compare
/// learned vs behavior returns under exact evaluation.
pub fn run_figure1(spec: &ExperimentSpec, out: &Path, workers: usize) -> Result<Figure1Outcome> {
    spec.validate()?;
    let (model, instance_seed) = generate_feasible_cmdp(&spec.generator, spec.generator.seed)?;
    let v_max = 1.0 / (1.0 - model.gamma());
    let norm = Normalizer::for_model(&model, spec.generator.cost_threshold)?;

    let mut cells = Vec::new();
    for &p in &spec.sweep.mixture_p {
        for &n in &spec.data.n_samples {
            for &seed in &spec.data.seeds {
                cells.push(CellSpec {
                    run_id: format!("fig1-p{p}-n{n}-s{seed}"),
                    model: &model,
                    mix_p: p,
                    n,
                    data_seed: seed,
                    config: spec.wsac.apply(v_max),
                    variant: AlgorithmVariant::Full,
                    reference: None,
                });
            }
        }
    }

    let outcomes: Vec<CellOutcome> =
        with_pool(workers, || cells.par_iter().map(run_cell).collect())?;

    let rows: Vec<&ResultRow> = outcomes.iter().map(|o| &o.row).collect();
    write_run_outputs(out, &rows)?;
    for o in &outcomes {
        write_text(
            &out.join("traces").join(format!("{}.csv", o.row.run_id)),
            &o.trace.to_csv(),
        )?;
    }

    // Aggregate per mixing weight for the chart.
    let mut series = [
        ("learned reward", Vec::new()),
        ("behavior reward", Vec::new()),
        ("learned cost", Vec::new()),
        ("behavior cost", Vec::new()),
    ];
    for &p in &spec.sweep.mixture_p {
        let at_p: Vec<&ResultRow> = outcomes
            .iter()
            .map(|o| &o.row)
            .filter(|r| r.mix_p == p)
            .collect();
        let mean = |f: &dyn Fn(&ResultRow) -> f64| {
            at_p.iter().map(|r| f(r)).sum::<f64>() / at_p.len() as f64
        };
        series[0].1.push((p, mean(&|r| norm.reward(r.j_r_wsac))));
        series[1].1.push((p, mean(&|r| norm.reward(r.j_r_behavior))));
        series[2].1.push((p, mean(&|r| norm.cost(r.j_c_wsac))));
        series[3].1.push((p, mean(&|r| norm.cost(r.j_c_behavior))));
    }
    let chart = line_chart(
        "Learned vs behavior by mixture weight",
        "mixture weight p (1 = optimal safe behavior)",
        "normalized return",
        &series
            .into_iter()
            .map(|(label, points)| Series {
                label: label.to_string(),
                points,
            })
            .collect::<Vec<_>>(),
    );
    write_text(&out.join("figure1.svg"), &chart)?;

    Ok(Figure1Outcome {
        rows: outcomes.into_iter().map(|o| o.row).collect(),
        instance_seed,
    })
}

pub struct AblationRun {
    pub config: String,
    pub instance: u64,
    pub norm_reward: f64,
    pub norm_cost: f64,
    pub row: ResultRow,
}

pub struct AblationSummary {
    pub config: String,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_reward: f64,
    pub std_reward: f64,
}

pub struct AblationOutcome {
    pub runs: Vec<AblationRun>,
    pub summary: Vec<AblationSummary>,
}

/// Component knockout study: full algorithm, greedy update instead of the
/// no-regret oracle, linear penalty instead of the hinge, and β=0 (no
/// Bellman-error regularizer), each on the same datasets across instances.
pub fn run_ablation(spec: &ExperimentSpec, out: &Path, workers: usize) -> Result<AblationOutcome> {
    spec.validate()?;
    let base_seed = spec.generator.seed;
    let models: Vec<(u64, Cmdp, Normalizer)> = (0..ABLATION_INSTANCES)
        .map(|i| {
            let (model, _) =
                generate_feasible_cmdp(&spec.generator, base_seed.wrapping_add(i))?;
            let norm = Normalizer::for_model(&model, spec.generator.cost_threshold)?;
            Ok((i, model, norm))
        })
        .collect::<Result<_>>()?;

    let v_max = 1.0 / (1.0 - spec.generator.gamma);
    let base_cfg = spec.wsac.apply(v_max);
    let mut beta_zero = base_cfg;
    beta_zero.beta = 0.0;
    let configs: [(&str, AlgorithmVariant, WsacConfig); 4] = [
        ("full", AlgorithmVariant::Full, base_cfg),
        ("greedy_update", AlgorithmVariant::GreedyUpdate, base_cfg),
        ("linear_penalty", AlgorithmVariant::LinearPenalty, base_cfg),
        ("beta_zero", AlgorithmVariant::Full, beta_zero),
    ];

    let n = spec.data.n_samples[0];
    let data_seed0 = spec.data.seeds[0];
    let mut cells = Vec::new();
    for (name, variant, cfg) in &configs {
        for (i, model, norm) in &models {
            cells.push((
                *name,
                *i,
                norm,
                CellSpec {
                    run_id: format!("abl-{name}-i{i}"),
                    model,
                    mix_p: ABLATION_MIX_P,
                    n,
                    data_seed: data_seed0.wrapping_add(*i),
                    config: *cfg,
                    variant: *variant,
                    reference: None,
                },
            ));
        }
    }

    let runs: Vec<AblationRun> = with_pool(workers, || {
        cells
            .par_iter()
            .map(|(name, i, norm, cell)| {
                let outcome = run_cell(cell)?;
                Ok(AblationRun {
                    config: name.to_string(),
                    instance: *i,
                    norm_reward: norm.reward(outcome.row.j_r_wsac),
                    norm_cost: norm.cost(outcome.row.j_c_wsac),
                    row: outcome.row,
                })
            })
            .collect()
    })?;

    let summary: Vec<AblationSummary> = configs
        .iter()
        .map(|(name, _, _)| {
            let rewards: Vec<f64> = runs
                .iter()
                .filter(|r| r.config == *name)
                .map(|r| r.norm_reward)
                .collect();
            let costs: Vec<f64> = runs
                .iter()
                .filter(|r| r.config == *name)
                .map(|r| r.norm_cost)
                .collect();
            let (mean_reward, std_reward) = mean_std(&rewards);
            let (mean_cost, std_cost) = mean_std(&costs);
            AblationSummary {
                config: name.to_string(),
                mean_cost,
                std_cost,
                mean_reward,
                std_reward,
            }
        })
        .collect();

    let row_refs: Vec<&ResultRow> = runs.iter().map(|r| &r.row).collect();
    write_run_outputs(out, &row_refs)?;
    write_csv(
        &out.join("ablation.csv"),
        "config,instances,mean_norm_cost,std_norm_cost,mean_norm_reward,std_norm_reward",
        summary.iter().map(|s| {
            format!(
                "{},{},{},{},{},{}",
                s.config,
                ABLATION_INSTANCES,
                fmt_f64(s.mean_cost),
                fmt_f64(s.std_cost),
                fmt_f64(s.mean_reward),
                fmt_f64(s.std_reward)
            )
        }),
    )?;

    Ok(AblationOutcome { runs, summary })
}

pub struct SensitivityRow {
    pub beta: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub norm_reward: f64,
    pub norm_cost: f64,
    pub flagged: bool,
    pub row: ResultRow,
}

pub struct SensitivityOutcome {
    pub rows: Vec<SensitivityRow>,
    pub behavior_p: f64,
    pub flagged: usize,
}

/// Hyperparameter robustness study over the β × λ-range grid on one instance
/// with a safe behavior policy. A setting is flagged when its learned cost
/// exceeds the behavior's by more than the penalty theory allows.
pub fn run_sensitivity(
    spec: &ExperimentSpec,
    out: &Path,
    workers: usize,
) -> Result<SensitivityOutcome> {
    spec.validate()?;
    let (model, _) = generate_feasible_cmdp(&spec.generator, spec.generator.seed)?;
    let v_max = 1.0 / (1.0 - model.gamma());
    let norm = Normalizer::for_model(&model, spec.generator.cost_threshold)?;

    // Prefer a mostly-optimal but exploratory behavior, falling back toward
    // the optimal safe policy until the behavior itself is safe.
    let mut behavior_p = 1.0;
    for p in [0.9, 0.95, 1.0] {
        let candidate = mixture_behavior(&model, p)?;
        if policy_eval(&model, &candidate)?.j_c <= SAFE_BEHAVIOR_TOL {
            behavior_p = p;
            break;
        }
    }

    let mut cells = Vec::new();
    for &beta in &spec.sweep.beta {
        for &[lo, hi] in &spec.sweep.lambda_ranges {
            let mut cfg = spec.wsac.apply(v_max);
            cfg.beta = beta;
            cfg.lambda = if lo == hi {
                LambdaSchedule::Fixed(lo)
            } else {
                LambdaSchedule::Ramp { lo, hi }
            };
            cells.push(CellSpec {
                run_id: format!("sens-b{beta}-l{lo}-{hi}"),
                model: &model,
                mix_p: behavior_p,
                n: spec.data.n_samples[0],
                data_seed: spec.data.seeds[0],
                config: cfg,
                variant: AlgorithmVariant::Full,
                reference: None,
            });
        }
    }

    let outcomes: Vec<CellOutcome> =
        with_pool(workers, || cells.par_iter().map(run_cell).collect())?;

    let rows: Vec<SensitivityRow> = outcomes
        .into_iter()
        .map(|o| {
            let r = o.row;
            let allowance = if r.lambda_hi > 0.0 {
                v_max / r.lambda_hi
            } else {
                f64::INFINITY
            };
            let flagged = r.j_c_wsac.max(0.0) > r.j_c_behavior.max(0.0) + allowance + FLAG_TOL;
            SensitivityRow {
                beta: r.beta,
                lambda_lo: r.lambda_lo,
                lambda_hi: r.lambda_hi,
                norm_reward: norm.reward(r.j_r_wsac),
                norm_cost: norm.cost(r.j_c_wsac),
                flagged,
                row: r,
            }
        })
        .collect();

    let row_refs: Vec<&ResultRow> = rows.iter().map(|r| &r.row).collect();
    write_run_outputs(out, &row_refs)?;
    write_csv(
        &out.join("sensitivity.csv"),
        "beta,lambda_lo,lambda_hi,j_r,j_c,norm_reward,norm_cost,flagged",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                fmt_f64(r.beta),
                fmt_f64(r.lambda_lo),
                fmt_f64(r.lambda_hi),
                fmt_f64(r.row.j_r_wsac),
                fmt_f64(r.row.j_c_wsac),
                fmt_f64(r.norm_reward),
                fmt_f64(r.norm_cost),
                r.flagged
            )
        }),
    )?;

    let reward_series = Series {
        label: "normalized reward".to_string(),
        points: rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i as f64 + 1.0, r.norm_reward))
            .collect(),
    };
    let cost_series = Series {
        label: "normalized cost".to_string(),
        points: rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i as f64 + 1.0, r.norm_cost))
            .collect(),
    };
    write_text(
        &out.join("sensitivity.svg"),
        &line_chart(
            "Hyperparameter sensitivity",
            "setting index (see sensitivity.csv)",
            "normalized return",
            &[reward_series, cost_series],
        ),
    )?;

    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(SensitivityOutcome {
        rows,
        behavior_p,
        flagged,
    })
}

#[derive(Debug)]
pub struct RatePoint {
    pub n: usize,
    pub mean_subopt: f64,
    pub std_subopt: f64,
}

#[derive(Debug)]
pub struct RateOutcome {
    pub per_n: Vec<RatePoint>,
    pub slope: f64,
    pub intercept: f64,
    pub rows: Vec<ResultRow>,
}

/// Convergence-rate study: mean suboptimality against the exact safe optimum
/// as the sample size grows, summarized by a log-log regression slope.
pub fn run_rate(spec: &ExperimentSpec, out: &Path, workers: usize) -> Result<RateOutcome> {
    spec.validate()?;
    let grid = &spec.data.n_samples;
    let (lo, hi) = (
        *grid.iter().min().expect("validated nonempty"),
        *grid.iter().max().expect("validated nonempty"),
    );
    if grid.len() < 3 || hi < 16 * lo {
        bail!(
            "rate study needs >= 3 sample sizes spanning at least 16x, got {:?}",
            grid
        );
    }

    let (model, _) = generate_feasible_cmdp(&spec.generator, spec.generator.seed)?;
    let v_max = 1.0 / (1.0 - model.gamma());
    let optimum = solve_optimal_safe(&model)?;

    let mut cells = Vec::new();
    for &n in grid {
        for &seed in &spec.data.seeds {
            cells.push(CellSpec {
                run_id: format!("rate-n{n}-s{seed}"),
                model: &model,
                mix_p: RATE_MIX_P,
                n,
                data_seed: seed,
                config: spec.wsac.apply(v_max),
                variant: AlgorithmVariant::Full,
                // The run competes against the exact safe optimum, which is
                // also the suboptimality comparator below.
                reference: Some(&optimum.policy),
            });
        }
    }

    let outcomes: Vec<CellOutcome> =
        with_pool(workers, || cells.par_iter().map(run_cell).collect())?;
    let rows: Vec<ResultRow> = outcomes.into_iter().map(|o| o.row).collect();

    let per_n: Vec<RatePoint> = grid
        .iter()
        .map(|&n| {
            let subopts: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n)
                .map(|r| (optimum.j_r - r.j_r_wsac).max(SUBOPT_FLOOR))
                .collect();
            let (mean_subopt, std_subopt) = mean_std(&subopts);
            RatePoint {
                n,
                mean_subopt,
                std_subopt,
            }
        })
        .collect();

    // Log-log least squares through the per-N means.
    let xs: Vec<f64> = per_n.iter().map(|p| (p.n as f64).log10()).collect();
    let ys: Vec<f64> = per_n.iter().map(|p| p.mean_subopt.log10()).collect();
    let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let row_refs: Vec<&ResultRow> = rows.iter().collect();
    write_run_outputs(out, &row_refs)?;
    write_csv(
        &out.join("rate.csv"),
        "n,mean_subopt,std_subopt,seeds",
        per_n.iter().map(|p| {
            format!(
                "{},{},{},{}",
                p.n,
                fmt_f64(p.mean_subopt),
                fmt_f64(p.std_subopt),
                spec.data.seeds.len()
            )
        }),
    )?;
    write_csv(
        &out.join("rate_fit.csv"),
        "slope,intercept,points",
        [format!(
            "{},{},{}",
            fmt_f64(slope),
            fmt_f64(intercept),
            per_n.len()
        )],
    )?;

    let points = Series {
        label: "mean suboptimality".to_string(),
        points: xs.iter().zip(&ys).map(|(&x, &y)| (x, y)).collect(),
    };
    let fit = Series {
        label: format!("fit slope {slope:.2}"),
        points: vec![
            (xs[0], intercept + slope * xs[0]),
            (xs[xs.len() - 1], intercept + slope * xs[xs.len() - 1]),
        ],
    };
    write_text(
        &out.join("rate.svg"),
        &line_chart(
            "Suboptimality vs sample size",
            "log10(N)",
            "log10(suboptimality)",
            &[points, fit],
        ),
    )?;

    Ok(RateOutcome {
        per_n,
        slope,
        intercept,
        rows,
    })
}
