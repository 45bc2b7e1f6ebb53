use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use timelens_core::hom::VisibilityConvention;
use timelens_sim::config::{parse_config, parse_config_str, RunConfig, EXPERIMENT_TOML};
use timelens_sim::run::{run, Command, RunError};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Simulate,
    Optimize,
    Analytic,
    Spectrum,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Convention {
    Depth,
    Michelson,
}

/// Time-lens bandwidth conversion and two-photon interference scenarios.
#[derive(Debug, Parser)]
#[command(name = "timelens-sim", version)]
struct Args {
    command: Cmd,
    /// TOML run configuration. Optional for `analytic`, which then uses the
    /// bundled experiment settings.
    config: Option<PathBuf>,
    /// Output directory [default: config `output.dir`, else `timelens-out`].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Grid sample count (power of two).
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long, value_enum)]
    convention: Option<Convention>,
    /// Compression factor for `analytic`.
    #[arg(long)]
    compression: Option<f64>,
}

fn load(args: &Args) -> Result<RunConfig, RunError> {
    let mut config = match (&args.config, args.command) {
        (Some(path), _) => parse_config(path).map_err(|e| RunError::Config(e.0))?,
        (None, Cmd::Analytic) => parse_config_str(EXPERIMENT_TOML).map_err(|e| RunError::Config(e.0))?,
        (None, _) => return Err(RunError::Config("a config file is required for this command".into())),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.grid_n {
        if n < 1024 || !n.is_power_of_two() {
            return Err(RunError::Config(format!("--grid-n must be a power of two >= 1024, got {n}")));
        }
        config.grid_samples = Some(n);
    }
    if let Some(c) = args.convention {
        config.convention = match c {
            Convention::Depth => VisibilityConvention::Depth,
            Convention::Michelson => VisibilityConvention::Michelson,
        };
    }
    if let Some(f) = args.compression {
        if !(f > 1.0 && f.is_finite()) {
            return Err(RunError::Config(format!("--compression must exceed 1, got {f}")));
        }
        config.analytic.compression = Some(f);
    }
    Ok(config)
}

fn init_threads() -> Result<(), RunError> {
    let Ok(value) = std::env::var("TIMELENS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RunError::Config(format!("TIMELENS_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RunError::Compute(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = init_threads().and_then(|_| {
        let config = load(&args)?;
        let out = args
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("timelens-out"));
        let command = match args.command {
            Cmd::Simulate => Command::Simulate,
            Cmd::Optimize => Command::Optimize,
            Cmd::Analytic => Command::Analytic,
            Cmd::Spectrum => Command::Spectrum,
        };
        run(command, &config, &out).map(|r| (r, out))
    });
    match result {
        Ok((report, out)) => {
            for line in report.lines {
                println!("{line}");
            }
            println!("wrote {} files to {}", report.files.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
