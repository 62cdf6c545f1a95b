use clap::{Parser, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use tps_reliab::commands::{self, CommandError};
use tps_reliab::config::RunConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Solve,
    Train,
    Validate,
    Sample,
    Benchmark,
    Report,
}

/// Reliability-based thermal protection design pipeline.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Weights file, written by `train` and read by the later steps.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let mut cfg = RunConfig::load(&cli.config)?.with_overrides(cli.seed, cli.workers, cli.out);
    if cli.weights.is_some() {
        cfg.weights = cli.weights;
    }
    cfg.validate()?;
    match cli.command {
        Command::Solve => {
            let s = commands::solve(&cfg)?;
            println!(
                "back temperature {:.3} °C (series {:.3} °C)",
                s.back_temperature_explicit_c, s.back_temperature_series_c
            );
        }
        Command::Train => {
            let m = commands::train(&cfg)?;
            let last = m.training_loss_history.last().map_or(f64::NAN, |r| r.total);
            println!("final loss {last:.4e}, weights in {}", cfg.weights_path().display());
        }
        Command::Validate => {
            let v = commands::validate(&cfg, &commands::load_model(&cfg)?)?;
            println!(
                "rmse {:.3} °C, max {:.3} °C at x = {:.4} m, t = {:.1} s",
                v.rmse_c, v.max_abs_c, v.max_error_x_m, v.max_error_t_s
            );
        }
        Command::Sample => {
            for s in commands::sample(&cfg, &commands::load_model(&cfg)?)? {
                println!(
                    "R = {}: {} samples, surrogate fraction {:.4}, FDM fraction {}",
                    s.target.reliability,
                    s.stats.n_samples,
                    s.stats.fraction_pinn,
                    s.stats.fraction_fdm.map_or("n/a".into(), |f| format!("{f:.4}"))
                );
            }
        }
        Command::Benchmark => {
            let b = commands::benchmark(&cfg, &commands::load_model(&cfg)?)?;
            for r in &b.inference {
                println!("M = {}: FDM {:.3e} s, PINN {:.3e} s", r.m, r.fdm_s, r.pinn_s);
            }
            for r in &b.smc {
                println!("SMC with {} workers: {:.3} s", r.workers, r.wall_s);
            }
        }
        Command::Report => {
            commands::report(&cfg.output_dir, &cfg.target)?;
            println!("{}", cfg.output_dir.join("report.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            e.print().ok();
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
