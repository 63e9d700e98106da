use std::path::PathBuf;
use std::process::ExitCode;

use anderson_harness::acceptance::{acceptance_table, run_acceptance, AcceptanceSettings};
use anderson_harness::experiments::run_experiment;
use anderson_harness::{emit_report, ExperimentConfig, ExperimentKind, HarnessError, EXIT_ACCEPTANCE_FAILURE};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anderson", version, about = "Random Schroedinger operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Field synthesis validation.
    Synth(Common),
    /// Principal eigenvalue campaign over t.
    Eig(Common),
    /// Variational constants.
    Variational(Common),
    /// Feynman-Kac moments against the eigenvalue.
    Fk(Common),
    /// Eigenvalue growth in theta at fixed t.
    Scaling(Common),
    /// Gaussian maximum comparison bound.
    Slepian(Common),
    /// The acceptance suite.
    Acceptance {
        #[command(flatten)]
        common: Common,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Eigen and variational tolerance; for acceptance, a scale on every tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn load(common: &Common, kind: ExperimentKind) -> Result<ExperimentConfig, HarnessError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| HarnessError::Config(format!("--config is required for {}", kind.as_str())))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if cfg.kind != kind {
        return Err(HarnessError::Config(format!(
            "config kind {:?} does not match the subcommand ({})",
            cfg.kind.as_str(),
            kind.as_str()
        )));
    }
    if let Some(seed) = common.seed {
        if let Some(s) = cfg.seeds.as_mut() {
            s.master = seed;
        }
    }
    if let Some(tol) = common.tol {
        cfg.tolerances.eigen = tol;
        cfg.tolerances.variational = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads(common: &Common) -> Result<(), HarnessError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run_kind(common: &Common, kind: ExperimentKind) -> Result<(), HarnessError> {
    threads(common)?;
    let cfg = load(common, kind)?;
    let dir = common.out.clone().unwrap_or_else(|| cfg.output.clone());
    for (name, table) in run_experiment(&cfg)? {
        let path = dir.join(format!("{name}.csv"));
        emit_report(&table, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn acceptance(common: &Common, only: Vec<usize>) -> Result<bool, HarnessError> {
    threads(common)?;
    let settings = AcceptanceSettings {
        tolerance_scale: common.tol.unwrap_or(1.0),
        only,
    };
    if !(settings.tolerance_scale > 0.0) {
        return Err(HarnessError::Config("--tol must be positive".into()));
    }
    let outcomes = run_acceptance(&settings, |o| println!("{}", o.line()));
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let mut table = acceptance_table(&outcomes);
    let cfg = ExperimentConfig::acceptance(dir.clone());
    table.stamp(cfg.kind.as_str(), &cfg.hash());
    emit_report(&table, &dir.join("acceptance.csv"))?;
    Ok(outcomes.iter().all(|o| o.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(c) => run_kind(c, ExperimentKind::SynthValidate),
        Command::Eig(c) => run_kind(c, ExperimentKind::EigScaling),
        Command::Variational(c) => run_kind(c, ExperimentKind::Variational),
        Command::Fk(c) => run_kind(c, ExperimentKind::FkConsistency),
        Command::Scaling(c) => run_kind(c, ExperimentKind::ThetaScaling),
        Command::Slepian(c) => run_kind(c, ExperimentKind::Slepian),
        Command::Acceptance { common, only } => match acceptance(common, only.clone()) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_ACCEPTANCE_FAILURE as u8),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
