//! `evonf`: train the evolutionary neuro-fuzzy model and the MLP baseline,
//! compare them and generate synthetic data.

mod artifacts;
mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use evonf::fuzzy::MfKind;

use config::{default_out_base, RunConfig, SynthSpec};
use failure::{kind_of, one_line, render};

#[derive(Parser)]
#[command(name = "evonf", version, about = "Evolutionary neuro-fuzzy export-behaviour modelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve Takagi-Sugeno models, one run per seed.
    TrainEvonf {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        evo: EvoArgs,
    },
    /// Train the MLP baseline, one run per seed.
    TrainMlp {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        mlp: MlpArgs,
    },
    /// Tabulate EvoNF and MLP artifacts side by side.
    Compare {
        /// EvoNF output directory [default: $EVONF_OUT_DIR/evonf].
        #[arg(long)]
        evonf: Option<PathBuf>,
        /// MLP output directory [default: $EVONF_OUT_DIR/mlp].
        #[arg(long)]
        mlp: Option<PathBuf>,
        /// Where to write comparison.csv and predictions.csv [default: $EVONF_OUT_DIR/compare].
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Apply a saved model to a CSV dataset; output is in raw target units.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset as CSV.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise_sd: Option<f64>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags shared by the training commands.
#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset with the fixed 7-input schema.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Use generated data (size, seed and noise set by the synth flags).
    #[arg(long)]
    synth: bool,
    #[arg(long)]
    synth_n: Option<usize>,
    #[arg(long)]
    synth_seed: Option<u64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory [default: $EVONF_OUT_DIR/<paradigm>].
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvoArgs {
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    gd_epochs: Option<usize>,
    /// gaussian or bell.
    #[arg(long)]
    mf_kind: Option<MfKind>,
    #[arg(long)]
    mfs_per_input: Option<usize>,
    #[arg(long)]
    selection_pressure: Option<f64>,
    #[arg(long)]
    elitism: Option<f64>,
    #[arg(long)]
    target_rmse: Option<f64>,
}

#[derive(Args)]
struct MlpArgs {
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunArgs {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(path) = self.data {
            cfg.data = Some(path);
            cfg.synth = None;
        }
        let synth_flags = self.synth || self.synth_n.is_some() || self.synth_seed.is_some() || self.noise_sd.is_some();
        if synth_flags {
            cfg.data = None;
            let spec = cfg.synth.get_or_insert_with(SynthSpec::default);
            set(&mut spec.n, self.synth_n);
            set(&mut spec.seed, self.synth_seed);
            set(&mut spec.noise_sd, self.noise_sd);
        }
        set(&mut cfg.split.train_fraction, self.train_fraction);
        set(&mut cfg.split.seed, self.split_seed);
        set(&mut cfg.seeds, self.seeds);
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli, argv: &[String]) -> anyhow::Result<()> {
    match cli.command {
        Command::TrainEvonf { run, evo } => {
            let mut cfg = run.resolve()?;
            let e = &mut cfg.evolution;
            set(&mut e.population_size, evo.population);
            set(&mut e.max_generations, evo.generations);
            set(&mut e.gd_epochs_per_eval, evo.gd_epochs);
            set(&mut e.mf_kind, evo.mf_kind);
            set(&mut e.mf_per_input, evo.mfs_per_input);
            set(&mut e.selection_pressure, evo.selection_pressure);
            set(&mut e.elitism_fraction, evo.elitism);
            if evo.target_rmse.is_some() {
                e.target_rmse = evo.target_rmse;
            }
            let out = commands::train_evonf(&cfg, argv)?;
            println!("{}", out.display());
        }
        Command::TrainMlp { run, mlp } => {
            let mut cfg = run.resolve()?;
            set(&mut cfg.mlp.hidden, mlp.hidden);
            set(&mut cfg.mlp.rate, mlp.rate);
            set(&mut cfg.mlp.momentum, mlp.momentum);
            set(&mut cfg.mlp.epochs, mlp.epochs);
            let out = commands::train_mlp(&cfg, argv)?;
            println!("{}", out.display());
        }
        Command::Compare { evonf, mlp, out_dir } => {
            let base = default_out_base();
            let table = commands::compare(
                &evonf.unwrap_or_else(|| base.join("evonf")),
                &mlp.unwrap_or_else(|| base.join("mlp")),
                &out_dir.unwrap_or_else(|| base.join("compare")),
            )?;
            print!("{table}");
        }
        Command::Predict { model, data, out } => commands::predict(&model, &data, out.as_deref())?,
        Command::Synth { config, n, seed, noise_sd, out } => {
            let mut spec = match &config {
                Some(path) => RunConfig::load(path)?.synth.unwrap_or_default(),
                None => SynthSpec::default(),
            };
            set(&mut spec.n, n);
            set(&mut spec.seed, seed);
            set(&mut spec.noise_sd, noise_sd);
            commands::synth(&spec, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("evonf: error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evonf: error[{}]: {}", kind_of(&e), render(&e));
            ExitCode::FAILURE
        }
    }
}
