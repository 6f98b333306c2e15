use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use grasp_core::data::{load_group_map, load_csv};
use grasp_core::pipeline::{run_benchmark, run_select, GroupSource};
use grasp_core::synthetic::{generate_synthetic, parse_group_sizes};
use grasp_core::{ErrorKind, GbmConfig, RunConfig, Selector, SolverConfig, SyntheticSpec};

/// Group-Shapley feature selection for binary outcomes.
#[derive(Parser, Debug)]
#[command(name = "grasp", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one selector with k-fold consensus and write a JSON report.
    Select {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "grasp")]
        selector: Selector,
        /// Also write the final feature names, one per line, to this CSV.
        #[arg(long)]
        features_csv: Option<PathBuf>,
    },
    /// Run several selectors on the same folds and compare them.
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "grasp,lasso,shap_median")]
        selectors: Vec<Selector>,
    },
    /// Write a synthetic grouped dataset with known informative groups.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    /// Two-column feature,group CSV over design-matrix column names.
    /// Without it, columns are grouped by the input column they came from.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Columns to treat as categorical even if they parse as numbers.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "folds", default_value_t = 5)]
    k_folds: usize,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    /// Fixed penalty instead of the data-driven default.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    tau0: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps_weight: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps_tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 50)]
    n_trees: usize,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    #[arg(long, default_value_t = 1.0)]
    l2_leaf: f64,
    /// Bootstrap resamples for selection stability (0 = off).
    #[arg(long, default_value_t = 0)]
    stability_resamples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    /// Total feature count; must match --groups when both are given.
    #[arg(long)]
    p: Option<usize>,
    /// Group sizes as `10x4` or `4,4,3`. Defaults to p singleton groups.
    #[arg(long)]
    groups: Option<String>,
    #[arg(long, default_value_t = 3)]
    informative: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    coef: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self, selector: Selector) -> RunConfig {
        RunConfig {
            selector,
            k_folds: self.k_folds,
            bootstrap: self.bootstrap,
            seed: self.seed,
            holdout_fraction: self.holdout,
            lambda: self.lambda,
            tau0: self.tau0,
            eps_weight: self.eps_weight,
            solver: SolverConfig {
                eps_tol: self.eps_tol,
                max_iters: self.max_iters,
                alpha: self.alpha,
                ..SolverConfig::default()
            },
            gbm: GbmConfig {
                n_trees: self.n_trees,
                max_depth: self.max_depth,
                learning_rate: self.learning_rate,
                min_samples_leaf: self.min_leaf,
                l2_leaf: self.l2_leaf,
                seed: self.seed,
            },
            stability_resamples: self.stability_resamples,
            ..RunConfig::default()
        }
    }

    fn inputs(&self) -> anyhow::Result<(grasp_core::Dataset, GroupSource)> {
        let kinds: HashMap<_, _> = self
            .categorical
            .iter()
            .map(|c| (c.clone(), grasp_core::data::ColumnKind::Categorical))
            .collect();
        let data = load_csv(&self.data, &self.label, &kinds)?;
        let groups = match &self.groups {
            Some(path) => GroupSource::Map(load_group_map(path)?),
            None => GroupSource::BySourceColumn,
        };
        Ok((data, groups))
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Select {
            run,
            selector,
            features_csv,
        } => {
            let (data, groups) = run.inputs()?;
            let report = run_select(&data, &groups, &run.config(selector))?;
            write_json(&run.out, &report)?;
            if let Some(path) = features_csv {
                let mut text = String::from("feature\n");
                for f in &report.final_features {
                    text.push_str(f);
                    text.push('\n');
                }
                std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            }
            println!(
                "{}: {} feature(s) selected, holdout accuracy {:.3}",
                selector,
                report.final_features.len(),
                report.evaluation.accuracy
            );
        }
        Command::Benchmark { run, selectors } => {
            let (data, groups) = run.inputs()?;
            let report = run_benchmark(&data, &groups, &run.config(Selector::Grasp), &selectors)?;
            write_json(&run.out, &report)?;
            print!("{}", report.table());
        }
        Command::Synth(args) => {
            let group_sizes = match (&args.groups, args.p) {
                (Some(spec), _) => parse_group_sizes(spec)?,
                (None, Some(p)) => vec![1; p],
                (None, None) => {
                    return Err(grasp_core::Error::InvalidArgument("give --p or --groups".into()).into())
                }
            };
            let spec = SyntheticSpec {
                n: args.n,
                group_sizes,
                informative_groups: args.informative,
                rho: args.rho,
                coefficient: args.coef,
                label_noise: args.noise,
                seed: args.seed,
            };
            if let Some(p) = args.p.filter(|&p| p != spec.p()) {
                return Err(grasp_core::Error::InvalidArgument(format!(
                    "--p {p} disagrees with group sizes summing to {}",
                    spec.p()
                ))
                .into());
            }
            let files = generate_synthetic(&spec, &args.out)?;
            println!("wrote {}", files.data.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<grasp_core::Error>().map(grasp_core::Error::kind) {
        Some(ErrorKind::Usage) => 1,
        Some(ErrorKind::Numerical) => 3,
        Some(ErrorKind::Data) | None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
