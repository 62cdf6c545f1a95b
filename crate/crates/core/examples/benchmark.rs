//! Batched surrogate inference against repeated FDM solves, and SMC wall
//! time against the number of worker threads.
//!
//! ```text
//! cargo run --release --example benchmark
//! ```

use std::hint::black_box;
use tps_reliab::commands::median_seconds;
use tps_reliab::heatsim::{explicit_back_temperature, MaterialSample, ThermalScenario};
use tps_reliab::pinn::{train, TrainingConfig};
use tps_reliab::reliability::{make_target, PosteriorModel, PriorSpec};
use tps_reliab::samplers::{smc_run, SmcConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = ThermalScenario::default();
    let model = train(&TrainingConfig { epochs: 200, ..Default::default() }, &sc)?;
    let mat = MaterialSample::validation();

    println!("{:>6} {:>12} {:>12} {:>10}", "M", "FDM [s]", "PINN [s]", "speedup");
    for m in [1, 10, 100, 1000] {
        let batch = vec![mat; m];
        let fdm = median_seconds(3, || {
            for b in &batch {
                black_box(explicit_back_temperature(&sc, b).ok());
            }
        });
        let pinn = median_seconds(5, || {
            black_box(model.predict_back_temperature(&batch));
        });
        println!("{m:>6} {fdm:>12.3e} {pinn:>12.3e} {:>10.1}", fdm / pinn);
    }

    let post = PosteriorModel::new(make_target(250.0, 0.95, 5.0)?, PriorSpec::default(), &model);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    println!("\nSMC, N = 10000, {cores} cores available");
    for w in [1, 2, 4, cores] {
        let cfg = SmcConfig { workers: Some(w), ..Default::default() };
        let t = median_seconds(3, || {
            black_box(smc_run(&post, &cfg).ok());
        });
        println!("{w:>3} workers: {t:.3} s");
    }
    Ok(())
}
