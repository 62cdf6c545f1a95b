//! Explicit and implicit finite differences against the exact series solution
//! for the validation material.
//!
//! ```text
//! cargo run --release --example heat_solvers
//! ```

use tps_reliab::heatsim::{analytic_reference, solve_explicit, solve_implicit, MaterialSample, ThermalScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = ThermalScenario::default();
    let mat = MaterialSample::validation();
    println!(
        "k = {} W/m/K, rho_cp = {:.4e} J/m^3/K, L = {} m, Q = {} W/m^2, t_final = {} s",
        mat.k, mat.rho_cp, sc.thickness, sc.flux, sc.t_final
    );

    let exp = solve_explicit(&sc, &mat)?;
    let imp = solve_implicit(&sc, &mat)?;

    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "t [s]", "explicit", "implicit", "series", "mean T");
    for n in (0..exp.n_rows()).step_by(10) {
        let t = exp.times()[n];
        println!(
            "{:>8.1} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            t,
            exp.at(n, 0),
            imp.at(n, 0),
            analytic_reference(&sc, &mat, 0.0, t, 200)?,
            exp.mean_temperature(n),
        );
    }

    let worst = exp
        .times()
        .iter()
        .zip(exp.back_trajectory())
        .map(|(&t, b)| Ok((b - analytic_reference(&sc, &mat, 0.0, t, 200)?).abs()))
        .collect::<Result<Vec<f64>, tps_reliab::heatsim::HeatError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let last = exp.n_rows() - 1;
    let balance = sc.mean_temperature(&mat, sc.t_final);
    println!("max |explicit - series| at x = 0: {worst:.4} °C");
    println!(
        "mean temperature at t_final: {:.4} °C (energy balance {:.4} °C)",
        exp.mean_temperature(last),
        balance
    );
    Ok(())
}
