use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tde::{
    parse_sweep, run_experiment_kappa, run_experiment_snr, write_csv, Estimator, ExperimentConfig, Harness,
    HarnessError,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_FAILED_TRIALS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tde",
    version,
    about = "Compressive-sensing time delay estimation benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// τ-MSE versus subsampling ratio, noise free.
    Fig1 {
        #[command(flatten)]
        common: Common,
        /// `start:step:stop` or a comma list.
        #[arg(long, allow_hyphen_values = true)]
        kappas: Option<String>,
        #[arg(long, default_value = "fig1.csv")]
        out: PathBuf,
    },
    /// τ-MSE versus SNR at a fixed subsampling ratio.
    Fig2 {
        #[command(flatten)]
        common: Common,
        /// SNR points in dB, `start:step:stop` or a comma list.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<String>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value = "fig2.csv")]
        out: PathBuf,
    },
    /// Run a single trial and print it as one CSV row.
    Trial {
        #[arg(long)]
        kappa: f64,
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Print the column names first.
        #[arg(long)]
        header: bool,
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma separated subset of BOMP, IBOMP-Parabolic, IBOMP-Polar, TDE-MUSIC, DS-MUSIC.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Add mean wall-clock time per estimator.
    #[arg(long)]
    timing: bool,
}

fn load(config: Option<&PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    match config {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn parse_estimators(names: &[String]) -> Result<Vec<Estimator>, HarnessError> {
    names
        .iter()
        .map(|n| {
            n.parse()
                .map_err(|e: tde::estimator::UnknownEstimator| HarnessError::Config(e.to_string()))
        })
        .collect()
}

impl Common {
    fn apply(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = load(self.config.as_ref())?;
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(e) = &self.estimators {
            cfg.estimators = parse_estimators(e)?;
        }
        cfg.timing |= self.timing;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<u8, HarnessError> {
    match cli.command {
        Command::Fig1 { common, kappas, out } => {
            let mut cfg = common.apply()?;
            if let Some(k) = kappas {
                cfg.kappas = parse_sweep(&k)?;
            }
            cfg.validate()?;
            let table = run_experiment_kappa(&cfg)?;
            finish(&table, &out)
        }
        Command::Fig2 {
            common,
            snr,
            kappa,
            out,
        } => {
            let mut cfg = common.apply()?;
            if let Some(s) = snr {
                cfg.snr_db = parse_sweep(&s)?;
            }
            if let Some(k) = kappa {
                cfg.snr_kappa = k;
            }
            cfg.validate()?;
            let table = run_experiment_snr(&cfg)?;
            finish(&table, &out)
        }
        Command::Trial {
            kappa,
            snr,
            seed,
            trial,
            header,
            estimators,
            config,
            timing,
        } => {
            let mut cfg = load(config.as_ref())?;
            cfg.master_seed = seed;
            cfg.timing |= timing;
            cfg.kappas = vec![kappa];
            if let Some(e) = estimators {
                cfg.estimators = parse_estimators(&e)?;
            }
            if let Some(s) = snr {
                if !s.is_finite() {
                    return Err(HarnessError::Config("SNR must be finite".into()));
                }
            }
            let harness = Harness::new(cfg)?;
            let ctx = harness.context(kappa)?;
            let record = harness.run_trial(&ctx, snr, trial)?;
            tde::output::write_trial(&record, header, std::io::stdout().lock()).map_err(|source| {
                HarnessError::Csv {
                    path: "<stdout>".into(),
                    source,
                }
            })?;
            Ok(if record.outcomes.iter().any(|o| o.failed()) {
                EXIT_FAILED_TRIALS
            } else {
                0
            })
        }
    }
}

fn finish(table: &tde::Table, out: &Path) -> Result<u8, HarnessError> {
    write_csv(table, out)?;
    let failed = table.failed_trials();
    eprintln!("wrote {} rows to {}", table.rows.len(), out.display());
    if failed > 0 {
        eprintln!("{failed} estimator runs failed and were excluded from the means");
        return Ok(EXIT_FAILED_TRIALS);
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_) | HarnessError::Core(tde_core::Error::Parameter(_)) => {
                    ExitCode::from(EXIT_CONFIG)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}
