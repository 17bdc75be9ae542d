use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecat::datagen::{generate_world, sample_window, write_events, write_records};
use ecat::harness::{
    apply_override, config_reference, emit, load_config, read_metrics, render_table, run_suite, MetricsFormat,
    SuiteKind,
};
use ecat::trainer::{run_experiment, ExperimentConfig};
use ecat::{EcatError, Result};

#[derive(Parser)]
#[command(name = "ecat", version, about = "Cross-domain continual transfer experiments on synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Overrides train.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-key override, e.g. --set train.loss.alpha=0.25 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write every window's records and events as TSV files
    Generate(Common),
    /// Run one experiment and write metrics.csv and metrics.json
    Train {
        #[command(flatten)]
        common: Common,
        /// Record wall-clock seconds in the metrics
        #[arg(long)]
        timing: bool,
        /// Save model checkpoints under <out>/checkpoints
        #[arg(long)]
        checkpoints: bool,
    },
    /// Run a comparison suite over consecutive seeds
    Ablate {
        #[command(flatten)]
        common: Common,
        /// sample_transfer | adaptive_ablation | transfer_setting
        #[arg(long)]
        suite: String,
        /// Number of seeds, starting at --seed (default 0)
        #[arg(long, default_value_t = 5)]
        n_seeds: u64,
    },
    /// Render a metrics file as a text table
    Report {
        /// metrics .csv or .json file
        path: PathBuf,
    },
    /// Print the documented configuration with defaults and overrides applied
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn resolve(config: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    for o in overrides {
        cfg = apply_override(&cfg, o)?;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| EcatError::io(dir, e))
}

fn write_both(rows: &[ecat::harness::MetricsRow], dir: &Path, stem: &str) -> Result<()> {
    create_dir(dir)?;
    emit(rows, &dir.join(format!("{stem}.csv")), MetricsFormat::Csv)?;
    emit(rows, &dir.join(format!("{stem}.json")), MetricsFormat::Json)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = resolve(Some(&c.config), &c.overrides, c.seed)?;
            create_dir(&c.out)?;
            let world = generate_world(&cfg.world, cfg.train.seed)?;
            let (mut records, mut events) = (Vec::new(), Vec::new());
            for w in 0..=cfg.train.window_count + 1 {
                let data = sample_window(&world, w, &cfg.volume)?;
                records.extend(data.target_records);
                records.extend(data.source_records);
                events.extend(data.target_events);
                events.extend(data.source_events);
            }
            write_records(&c.out.join("records.tsv"), &records)?;
            write_events(&c.out.join("events.tsv"), &events)?;
            println!("wrote {} records and {} events to {}", records.len(), events.len(), c.out.display());
        }
        Command::Train { common: c, timing, checkpoints } => {
            let mut cfg = resolve(Some(&c.config), &c.overrides, c.seed)?;
            cfg.train.record_timing |= timing;
            if checkpoints {
                cfg.train.checkpoint_dir = Some(c.out.join("checkpoints"));
            }
            let rows = run_experiment(&cfg)?;
            write_both(&rows, &c.out, "metrics")?;
            print!("{}", render_table(&rows));
        }
        Command::Ablate { common: c, suite, n_seeds } => {
            let kind: SuiteKind = suite.parse()?;
            let cfg = resolve(Some(&c.config), &c.overrides, None)?;
            let first = c.seed.unwrap_or(0);
            let seeds: Vec<u64> = (first..first + n_seeds).collect();
            let rows = run_suite(kind, &cfg, &seeds)?;
            write_both(&rows, &c.out, kind.as_str())?;
            print!("{}", render_table(&rows));
        }
        Command::Report { path } => {
            print!("{}", render_table(&read_metrics(&path)?));
        }
        Command::Config { config, overrides } => {
            let cfg = resolve(config.as_deref(), &overrides, None)?;
            print!("{}", config_reference(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
