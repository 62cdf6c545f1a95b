//! Trains the physics-informed surrogate and compares it with the FDM field
//! on the validation material.
//!
//! ```text
//! cargo run --release --example train_surrogate -- [epochs] [weights.txt]
//! ```

use tps_reliab::heatsim::{back_temperature, solve_explicit, MaterialSample, ThermalScenario};
use tps_reliab::pinn::{field_errors, save_weights, train, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let sc = ThermalScenario::default();
    let cfg = TrainingConfig { epochs, ..Default::default() };

    let started = std::time::Instant::now();
    let model = train(&cfg, &sc)?;
    let h = &model.training_loss_history;
    println!("trained {epochs} epochs in {:.1} s", started.elapsed().as_secs_f64());
    for e in (0..h.len()).step_by((h.len() / 10).max(1)) {
        println!("epoch {e:>5}: total {:.4e}", h[e].total);
    }

    let mat = MaterialSample::validation();
    let field = solve_explicit(&sc, &mat)?;
    let xs: Vec<f64> = field.x().iter().map(|x| x / sc.thickness).collect();
    let ts: Vec<f64> = field.times().iter().map(|t| t / sc.t_final).collect();
    let pred = model.predict_field(&mat, &xs, &ts)?;
    let fdm: Vec<f64> = field.rows().flatten().copied().collect();
    let (rmse, max, at) = field_errors(&pred, &fdm);
    println!(
        "field RMSE {rmse:.3} °C, max {max:.3} °C at x = {:.4} m, t = {:.1} s",
        field.x()[at % xs.len()],
        field.times()[at / xs.len()]
    );
    println!(
        "back temperature: surrogate {:.3} °C, FDM {:.3} °C",
        model.predict_back_temperature(&[mat])[0]?,
        back_temperature(&field)
    );

    if let Some(path) = args.get(2) {
        save_weights(&model, path)?;
        println!("weights written to {path}");
    }
    Ok(())
}
