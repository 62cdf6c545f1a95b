//! The six pipeline steps driven from a JSON configuration, as the
//! `tps-reliab` binary runs them.
//!
//! ```text
//! cargo run --release --example full_pipeline -- [config.json] [out_dir]
//! ```

use tps_reliab::commands;
use tps_reliab::config::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = match args.get(1) {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_json(
            r#"{
                "training": { "epochs": 500 },
                "sampler": { "n_particles": 2000, "fdm_subsample": 200 },
                "benchmark": { "sizes": [1, 10, 100, 1000], "repetitions": 3, "smc_particles": 2000 }
            }"#,
        )?,
    };
    if let Some(out) = args.get(2) {
        cfg.output_dir = out.into();
    }
    cfg.validate()?;

    let s = commands::solve(&cfg)?;
    println!("solve: back temperature {:.3} °C", s.back_temperature_explicit_c);
    let model = commands::train(&cfg)?;
    println!("train: {} epochs", model.training_loss_history.len());
    let v = commands::validate(&cfg, &model)?;
    println!("validate: rmse {:.3} °C", v.rmse_c);
    for s in commands::sample(&cfg, &model)? {
        println!(
            "sample R = {}: surrogate fraction {:.4}, FDM fraction {:?}",
            s.target.reliability, s.stats.fraction_pinn, s.stats.fraction_fdm
        );
    }
    commands::benchmark(&cfg, &model)?;
    let r = commands::report(&cfg.output_dir, &cfg.target)?;
    println!(
        "report: {} reliability levels, written to {}",
        r.reliability.len(),
        cfg.output_dir.join("report.json").display()
    );
    Ok(())
}
