//! `evcoord`: the end-to-end pipeline as subcommands with reproducible
//! seeds and file-based artifacts.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Resolver};
use evcoord_core::detector::{Activation, InitKind, Loss, ModelKind, OptimizerKind};

#[derive(Parser)]
#[command(
    name = "evcoord",
    about = "EV charging coordination workbench: impact simulation, dataset synthesis, detector training and tuning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic vehicle traces.
    GenTraces {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        evs: Option<usize>,
        #[arg(long)]
        days: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fix_interval_secs: Option<i64>,
        /// Directory receiving one <ev_id>.txt per vehicle.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Parse and normalize trace files.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Trace file or directory of .txt files.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build the honest and malicious datasets.
    BuildDataset {
        #[command(flatten)]
        common: Common,
        /// Trace directory; omitted means synthetic vehicles.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        evs: Option<usize>,
        #[arg(long)]
        days: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        attack_seed: Option<u64>,
        #[arg(long)]
        max_speed_mph: Option<f64>,
        #[arg(long)]
        fix_interval_secs: Option<i64>,
        #[arg(long)]
        out_honest: PathBuf,
        #[arg(long)]
        out_malicious: PathBuf,
    },
    /// Stratified train/test split of honest + malicious CSVs.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        honest: PathBuf,
        #[arg(long)]
        malicious: PathBuf,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// ADASYN-balance the honest class of a training CSV.
    Balance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        adasyn_k: Option<usize>,
        #[arg(long)]
        adasyn_xi: Option<f64>,
        #[arg(long)]
        adasyn_ratio_threshold: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one detector.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        units: Option<usize>,
        #[arg(long)]
        hidden_activation: Option<String>,
        #[arg(long)]
        optimizer: Option<String>,
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        max_norm: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        loss: Option<String>,
        #[arg(long)]
        valid_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_history: Option<PathBuf>,
    },
    /// Evaluate a saved model on a test CSV.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out_metrics: PathBuf,
        #[arg(long)]
        out_roc: Option<PathBuf>,
    },
    /// NSGA-II hyperparameter search.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<u32>,
        #[arg(long)]
        crossover_rate: Option<f64>,
        #[arg(long)]
        mutation_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        valid_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict widths, e.g. "32,64,128".
        #[arg(long)]
        widths: Option<String>,
        /// Restrict hidden layer count.
        #[arg(long)]
        max_layers: Option<u8>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Probability-of-charging and unused-power experiments.
    SimulateImpact {
        #[command(flatten)]
        common: Common,
        /// A count ("12") or inclusive range ("0..30").
        #[arg(long)]
        liars: Option<String>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long)]
        slots: Option<u32>,
        #[arg(long)]
        evs: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Join impact and detector metrics into one summary CSV.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        impact: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_arch(s: &str) -> Result<ModelKind> {
    match s {
        "mlp" => Ok(ModelKind::Mlp),
        "gru" => Ok(ModelKind::Gru),
        other => Err(anyhow!("unknown arch {other:?} (expected mlp or gru)")),
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    Activation::from_name(s).ok_or_else(|| anyhow!("unknown activation {s:?}"))
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    OptimizerKind::from_name(s).ok_or_else(|| anyhow!("unknown optimizer {s:?}"))
}

fn parse_init(s: &str) -> Result<InitKind> {
    InitKind::from_name(s).ok_or_else(|| anyhow!("unknown init {s:?}"))
}

fn parse_loss(s: &str) -> Result<Loss> {
    match s {
        "cross_entropy" => Ok(Loss::CrossEntropy),
        "mean_squared_error" | "mse" => Ok(Loss::MeanSquaredError),
        other => Err(anyhow!("unknown loss {other:?}")),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenTraces {
            common,
            evs,
            days,
            seed,
            fix_interval_secs,
            out_dir,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut r = Resolver::new(&file);
            let evs = r.get("evs", evs, 64usize)?;
            let days = r.get("days", days, 24u32)?;
            let seed = r.get("seed", seed, 0u64)?;
            let fix = r.get("fix_interval_secs", fix_interval_secs, 60i64)?;
            r.print("gen-traces");
            commands::gen_traces(evs, days, seed, fix, &out_dir)
        }
        Command::Ingest { common, traces, out_dir } => {
            let file = FileConfig::load(common.config.as_deref())?;
            Resolver::new(&file).print("ingest");
            commands::ingest(&traces, &out_dir)
        }
        Command::BuildDataset {
            common,
            traces,
            evs,
            days,
            seed,
            attack_seed,
            max_speed_mph,
            fix_interval_secs,
            out_honest,
            out_malicious,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut r = Resolver::new(&file);
            let evs = r.get("evs", evs, 64usize)?;
            let days = r.get("days", days, 24u32)?;
            let seed = r.get("seed", seed, 0u64)?;
            let attack_seed = r.get("attack_seed", attack_seed, seed.wrapping_add(1))?;
            let max_speed = r.get("max_speed_mph", max_speed_mph, 80.0f64)?;
            let fix = r.get("fix_interval_secs", fix_interval_secs, 60i64)?;
            r.print("build-dataset");
            commands::build_dataset(
                traces.as_deref(),
                evs,
                days,
                seed,
                attack_seed,
                max_speed,
                fix,
                &out_honest,
                &out_malicious,
            )
        }
        Command::Split {
            common,
            honest,
            malicious,
            train_fraction,
            seed,
            out_train,
            out_test,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut r = Resolver::new(&file);
            let fraction = r.get("train_fraction", train_fraction, 0.7f64)?;
            let seed = r.get("seed", seed, 0u64)?;
            r.print("split");
            commands::split_cmd(&honest, &malicious, fraction, seed, &out_train, &out_test)
        }
        Command::Balance {
            common,
            input,
            adasyn_k,
            adasyn_xi,
            adasyn_ratio_threshold,
            seed,
            out,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut r = Resolver::new(&file);
            let k = r.get("adasyn_k", adasyn_k, 5usize)?;
            let xi = r.get("adasyn_xi", adasyn_xi, 1.0f64)?;
            let threshold = r.get("adasyn_ratio_threshold", adasyn_ratio_threshold, 0.75f64)?;
            let seed = r.get("seed", seed, 0u64)?;
            r.print("balance");
            commands::balance_cmd(&input, k, xi, threshold, seed, &out)
        }
        Command::Train {
            common,
            train,
            arch,
            layers,
            units,
            hidden_activation,
            optimizer,
            init,
            dropout,
            max_norm,
            learning_rate,
            batch_size,
            epochs,
            loss,
            valid_fraction,
            seed,
            out_model,
            out_history,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut r = Resolver::new(&file);
            let args = commands::TrainArgs {
                arch: parse_arch(&r.get("arch", arch, "gru".to_string())?)?,
                layers: r.get("layers", layers, 2usize)?,
                units: r.get("units", units, 128usize)?,
                hidden_activation: parse_activation(&r.get(
                    "hidden_activation",
                    hidden_activation,
                    "softsign".to_string(),
                )?)?,
                optimizer: parse_optimizer(&r.get("optimizer", optimizer, "adam".to_string())?)?,
                init: parse_init(&r.get("init", init, "glorot".to_string())?)?,
                dropout: r.get("dropout", dropout, 0.0f64)?,
                max_norm: r.get("max_norm", max_norm, 3.0f64)?,
                learning_rate: r.get("learning_rate", learning_rate, 0.01f64)?,
                batch_size: r.get("batch_size", batch_size, 32usize)?,
                epochs: r.get("epochs", epochs, 15u32)?,
                loss: parse_loss(&r.get("loss", loss, "cross_entropy".to_string())?)?,
                valid_fraction: r.get("valid_fraction", valid_fraction, 0.15f64)?,
                seed: r.get("seed", seed, 0u64)?,
            };
            r.print("train");
            commands::train_cmd(&train, &args, &out_model, out_history.as_deref())
        }
        Command::Evaluate {
            common,
            model,
            test,
            out_metrics,
            out_roc,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            Resolver::new(&file).print("evaluate");
            commands::evaluate_cmd(&model, &test, &out_metrics, out_roc.as_deref())
        }
        Command::Tune {
            common,
            train,
            arch,
            population,
            generations,
            crossover_rate,
            mutation_rate,
            epochs,
            learning_rate,
            batch_size,
            valid_fraction,
            seed,
            widths,
            max_layers,
            out,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut r = Resolver::new(&file);
            let widths = widths
                .map(|s| {
                    s.split(',')
                        .map(|w| w.trim().parse::<u16>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                })
                .transpose()
                .map_err(|e| anyhow!("bad --widths: {e}"))?;
            let args = commands::TuneArgs {
                arch: parse_arch(&r.get("arch", arch, "gru".to_string())?)?,
                population: r.get("population", population, 12usize)?,
                generations: r.get("generations", generations, 8u32)?,
                crossover_rate: r.get("crossover_rate", crossover_rate, 0.9f64)?,
                mutation_rate: r.get("mutation_rate", mutation_rate, 0.1f64)?,
                epochs: r.get("epochs", epochs, 15u32)?,
                learning_rate: r.get("learning_rate", learning_rate, 0.01f64)?,
                batch_size: r.get("batch_size", batch_size, 32usize)?,
                valid_fraction: r.get("valid_fraction", valid_fraction, 0.2f64)?,
                seed: r.get("seed", seed, 0u64)?,
                widths,
                max_layers,
            };
            r.print("tune");
            commands::tune_cmd(&train, &args, &out)
        }
        Command::SimulateImpact {
            common,
            liars,
            beta,
            capacity,
            slots,
            evs,
            seed,
            out,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut r = Resolver::new(&file);
            let liars = commands::parse_liar_range(&r.get("liars", liars, "0".to_string())?)?;
            let beta = r.get("beta", beta, 0.2f64)?;
            let capacity = r.get("capacity", capacity, 2160.0f64)?;
            let slots = r.get("slots", slots, 30u32)?;
            let evs = r.get("evs", evs, 100u32)?;
            let seed = r.get("seed", seed, 0u64)?;
            r.print("simulate-impact");
            commands::simulate_impact(&liars, beta, capacity, slots, evs, seed, out.as_deref())
        }
        Command::Report {
            common,
            impact,
            metrics,
            out,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            Resolver::new(&file).print("report");
            commands::report_cmd(impact.as_deref(), metrics.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
