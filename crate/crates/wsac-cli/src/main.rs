//! Command-line front-end: instance/dataset generation, training, exact
//! evaluation, and the canned studies.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wsac::data::{behavior_clone, mixture_behavior, sample_dataset, Dataset};
use wsac::driver::run_wsac;
use wsac::eval::{mixture_eval, policy_eval};
use wsac::{Cmdp, MixturePolicy};

use wsac_cli::gen::generate_feasible_cmdp;
use wsac_cli::report::write_text;
use wsac_cli::spec::ExperimentSpec;
use wsac_cli::studies::{run_ablation, run_figure1, run_rate, run_sensitivity, Normalizer};

#[derive(Parser)]
#[command(
    name = "wsac-cli",
    version,
    about = "Safe offline RL experiment harness: generate instances, train, evaluate, and sweep"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment spec (JSON); built-in defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,

    /// Output directory; overrides the spec's `outputs` field.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for sweep cells (0 = all cores).
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Seed override: replaces the generator seed (the dataset sampling seed
    /// for `gen-data`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a feasible constrained MDP instance and write it as JSON.
    GenCmdp(CommonArgs),

    /// Sample an offline dataset from a mixture behavior policy.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
        /// Instance file; generated from the spec when omitted.
        #[arg(long)]
        cmdp: Option<PathBuf>,
        /// Behavior mixing weight (1 = optimal safe, 0 = uniform).
        #[arg(long, default_value_t = 0.5)]
        mix_p: f64,
        /// Number of transitions; defaults to the spec's first entry.
        #[arg(long)]
        n: Option<usize>,
    },

    /// Run the solver on a dataset; writes the mixture policy and a trace.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset file (JSON lines, as written by gen-data).
        #[arg(long)]
        data: PathBuf,
    },

    /// Exactly evaluate a stored mixture policy (or a mixture behavior at
    /// --mix-p) on an instance.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Instance file.
        #[arg(long)]
        cmdp: PathBuf,
        /// Mixture policy file (as written by train).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Evaluate the mixture behavior policy at this weight instead.
        #[arg(long)]
        mix_p: Option<f64>,
    },

    /// Behavior-quality sweep: learned vs behavior returns by mixture weight.
    Figure1(CommonArgs),

    /// Component knockouts (greedy update, linear penalty, no regularizer).
    Ablation(CommonArgs),

    /// Hyperparameter grid over β and λ ranges; exits 2 on safety flags.
    Sensitivity(CommonArgs),

    /// Suboptimality vs sample size with a log-log slope fit.
    Rate(CommonArgs),
}

fn load_spec(common: &CommonArgs, seed_overrides_generator: bool) -> Result<ExperimentSpec> {
    let mut spec = match &common.spec {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::default(),
    };
    if seed_overrides_generator {
        if let Some(seed) = common.seed {
            spec.generator.seed = seed;
        }
    }
    Ok(spec)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter("WSAC_LOG")
            .default_filter_or("info"),
    )
    .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenCmdp(common) => {
            let spec = load_spec(&common, true)?;
            let out = spec.resolve_out(common.out.as_deref())?;
            let (model, used_seed) = generate_feasible_cmdp(&spec.generator, spec.generator.seed)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("cmdp.json");
            model.save(&path)?;
            log::info!(
                "wrote {} ({} states x {} actions, seed {used_seed})",
                path.display(),
                model.n_states(),
                model.n_actions()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::GenData {
            common,
            cmdp,
            mix_p,
            n,
        } => {
            let spec = load_spec(&common, false)?;
            let out = spec.resolve_out(common.out.as_deref())?;
            let model = match cmdp {
                Some(path) => Cmdp::load(path)?,
                None => generate_feasible_cmdp(&spec.generator, spec.generator.seed)?.0,
            };
            let n = n.unwrap_or(spec.data.n_samples[0]);
            let seed = common.seed.unwrap_or(spec.data.seeds[0]);
            let behavior = mixture_behavior(&model, mix_p)?;
            let data = sample_dataset(&model, &behavior, n, seed)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("dataset.jsonl");
            data.save(&path)?;
            log::info!("wrote {} ({n} transitions, seed {seed})", path.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Train { common, data } => {
            let spec = load_spec(&common, false)?;
            let out = spec.resolve_out(common.out.as_deref())?;
            let dataset = Dataset::load(&data)?;
            let v_max = 1.0 / (1.0 - dataset.gamma());
            let mut config = spec.wsac.apply(v_max);
            if let Some(seed) = common.seed {
                config.seed = seed;
            }
            let reference = behavior_clone(&dataset)?;
            let (mixture, trace) = run_wsac(&dataset, &reference, &config)?;
            write_text(&out.join("policy.json"), &mixture.to_json()?)?;
            write_text(&out.join("trace.csv"), &trace.to_csv())?;
            log::info!(
                "trained on {} transitions for {} iterations; wrote {}",
                dataset.len(),
                mixture.len(),
                out.join("policy.json").display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Eval {
            common,
            cmdp,
            policy,
            mix_p,
        } => {
            let spec = load_spec(&common, false)?;
            let model = Cmdp::load(&cmdp)?;
            let bundle = match (&policy, mix_p) {
                (Some(path), None) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    mixture_eval(&model, &MixturePolicy::from_json(&text)?)?
                }
                (None, Some(p)) => policy_eval(&model, &mixture_behavior(&model, p)?)?,
                _ => bail!("pass exactly one of --policy or --mix-p"),
            };
            let norm = Normalizer::for_model(&model, spec.generator.cost_threshold)?;
            let summary = serde_json::json!({
                "j_r": bundle.j_r,
                "j_c": bundle.j_c,
                "norm_reward": norm.reward(bundle.j_r),
                "norm_cost": norm.cost(bundle.j_c),
                "safe": bundle.j_c <= 0.0,
            });
            let text = serde_json::to_string_pretty(&summary)?;
            println!("{text}");
            if let Ok(out) = spec.resolve_out(common.out.as_deref()) {
                write_text(&out.join("eval.json"), &text)?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Figure1(common) => {
            let spec = load_spec(&common, true)?;
            let out = spec.resolve_out(common.out.as_deref())?;
            let outcome = run_figure1(&spec, &out, common.workers)?;
            log::info!(
                "figure1: {} runs on instance seed {}; outputs in {}",
                outcome.rows.len(),
                outcome.instance_seed,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Ablation(common) => {
            let spec = load_spec(&common, true)?;
            let out = spec.resolve_out(common.out.as_deref())?;
            let outcome = run_ablation(&spec, &out, common.workers)?;
            for s in &outcome.summary {
                log::info!(
                    "ablation {}: cost {:.3}±{:.3}, reward {:.3}±{:.3}",
                    s.config,
                    s.mean_cost,
                    s.std_cost,
                    s.mean_reward,
                    s.std_reward
                );
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Sensitivity(common) => {
            let spec = load_spec(&common, true)?;
            let out = spec.resolve_out(common.out.as_deref())?;
            let outcome = run_sensitivity(&spec, &out, common.workers)?;
            log::info!(
                "sensitivity: {} settings, behavior p={}, {} flagged",
                outcome.rows.len(),
                outcome.behavior_p,
                outcome.flagged
            );
            if outcome.flagged > 0 {
                for r in outcome.rows.iter().filter(|r| r.flagged) {
                    log::error!(
                        "flagged: beta={} lambda=[{}, {}] learned cost {:.4} exceeds allowance",
                        r.beta,
                        r.lambda_lo,
                        r.lambda_hi,
                        r.row.j_c_wsac
                    );
                }
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Rate(common) => {
            let spec = load_spec(&common, true)?;
            let out = spec.resolve_out(common.out.as_deref())?;
            let outcome = run_rate(&spec, &out, common.workers)?;
            log::info!(
                "rate: slope {:.3} over {} sample sizes; outputs in {}",
                outcome.slope,
                outcome.per_n.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
