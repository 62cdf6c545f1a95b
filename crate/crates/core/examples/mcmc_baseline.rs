//! Adaptive Metropolis–Hastings chains on the design posterior with a quickly
//! trained surrogate, including the Gelman–Rubin check.
//!
//! ```text
//! cargo run --release --example mcmc_baseline -- [steps]
//! ```

use nalgebra::DMatrix;
use tps_reliab::heatsim::ThermalScenario;
use tps_reliab::pinn::{train, TrainingConfig};
use tps_reliab::reliability::{make_target, PosteriorModel, PriorSpec};
use tps_reliab::samplers::{gelman_rubin, run_chains, MhConfig, SmcModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5000);
    let sc = ThermalScenario::default();
    let model = train(&TrainingConfig::default(), &sc)?;
    let post = PosteriorModel::new(make_target(250.0, 0.95, 5.0)?, PriorSpec::default(), &model);

    let logpost = |theta: &[f64]| {
        let lp = SmcModel::log_prior(&post, theta);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + SmcModel::log_likelihood(&post, theta)
        }
    };
    let inits = vec![vec![0.3, 1.0e6], vec![0.6, 1.6e6], vec![0.9, 2.2e6]];
    let cov0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.06f64.powi(2), 8.0e4f64.powi(2)]));
    let cfg = MhConfig { n_steps: steps, ..Default::default() };
    let runs = run_chains(logpost, &inits, cov0, &cfg)?;

    for (i, r) in runs.iter().enumerate() {
        let last = r.samples.last().unwrap();
        println!(
            "chain {i}: acceptance {:.3}, final k = {:.3}, rho_cp = {:.3e}",
            r.acceptance_rate, last[0], last[1]
        );
    }
    let burn = steps / 5;
    let chains: Vec<Vec<Vec<f64>>> = runs.iter().map(|r| r.samples[burn..].to_vec()).collect();
    let r_hat = gelman_rubin(&chains);
    println!("R-hat after discarding {burn} steps: k {:.3}, rho_cp {:.3}", r_hat[0], r_hat[1]);

    let all: Vec<&Vec<f64>> = chains.iter().flatten().collect();
    let mats: Vec<_> = all.iter().map(|t| tps_reliab::heatsim::MaterialSample::new(t[0], t[1])).collect();
    let tb: Vec<f64> = model.predict_back_temperature(&mats).into_iter().map(|r| r.unwrap()).collect();
    let mean = tb.iter().sum::<f64>() / tb.len() as f64;
    let below = tb.iter().filter(|&&t| t <= 250.0).count() as f64 / tb.len() as f64;
    println!("surrogate T_back mean {mean:.2} °C, fraction below 250 °C {below:.4}");
    Ok(())
}
