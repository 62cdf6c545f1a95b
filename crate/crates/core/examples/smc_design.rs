//! Tempered SMC design at several reliability levels with the surrogate as
//! forward model, verified against the FDM solver on a subsample.
//!
//! ```text
//! cargo run --release --example smc_design -- [particles] [fdm_checks]
//! ```

use tps_reliab::heatsim::{MaterialSample, ThermalScenario};
use tps_reliab::pinn::{train, TrainingConfig};
use tps_reliab::reliability::{fdm_back_temperatures, make_target, reliability_fraction, PosteriorModel, PriorSpec};
use tps_reliab::samplers::{smc_run, SmcConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(10_000);
    let checks = args.get(1).copied().unwrap_or(1000).min(n);

    let sc = ThermalScenario::default();
    let model = train(&TrainingConfig::default(), &sc)?;
    for r in [0.95, 0.99, 0.99999] {
        let target = make_target(250.0, r, 5.0)?;
        let post = PosteriorModel::new(target, PriorSpec::default(), &model);
        let run = smc_run(&post, &SmcConfig { n_particles: n, ..Default::default() })?;
        let mats: Vec<MaterialSample> = run.ensemble.thetas().iter().map(|t| MaterialSample::new(t[0], t[1])).collect();
        let pinn: Vec<f64> = model.predict_back_temperature(&mats).into_iter().collect::<Result<_, _>>()?;
        let sub: Vec<MaterialSample> = (0..checks).map(|j| mats[j * n / checks]).collect();
        let fdm = fdm_back_temperatures(&sub, &sc)?;
        let max_k = mats.iter().map(|m| m.k).fold(0.0, f64::max);
        println!(
            "R = {r:<8} mu {:.2} °C | {} stages, {:.2} s | surrogate: mean {:.2} °C, fraction {:.4} | FDM ({checks}): mean {:.2} °C, fraction {:.4} | max k {:.3}",
            target.mu_target,
            run.stages.len(),
            run.wall_time_s,
            pinn.iter().sum::<f64>() / n as f64,
            reliability_fraction(&pinn, 250.0),
            fdm.iter().sum::<f64>() / checks as f64,
            reliability_fraction(&fdm, 250.0),
            max_k,
        );
    }
    Ok(())
}
