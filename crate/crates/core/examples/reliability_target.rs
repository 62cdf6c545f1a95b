//! Reliability targets and the shape of the design posterior, using the FDM
//! solver as the forward model.
//!
//! ```text
//! cargo run --release --example reliability_target
//! ```

use tps_reliab::heatsim::{explicit_back_temperature, MaterialSample, ThermalScenario};
use tps_reliab::reliability::{make_target, FdmPredictor, PosteriorModel, PriorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (t_crit, sigma) = (250.0, 5.0);
    for r in [0.5, 0.95, 0.99, 0.99999] {
        let t = make_target(t_crit, r, sigma)?;
        println!("R = {r:<8} mu_target = {:.3} °C", t.mu_target);
    }

    let sc = ThermalScenario::default();
    let target = make_target(t_crit, 0.95, sigma)?;
    let post = PosteriorModel::new(target, PriorSpec::default(), FdmPredictor { scenario: sc });

    // back temperature and log-posterior over a coarse (k, rho_cp) grid
    println!("\nT_back [°C] / log posterior, rows k, columns rho_cp [MJ/m^3/K]");
    let cs = [0.8e6, 1.2e6, 1.6e6, 2.0e6, 2.4e6];
    print!("{:>6}", "k");
    for c in cs {
        print!("{:>18.1}", c / 1e6);
    }
    println!();
    for k in [0.2, 0.4, 0.6, 0.8, 1.0, 1.2] {
        print!("{k:>6.2}");
        for c in cs {
            let m = MaterialSample::new(k, c);
            let tb = explicit_back_temperature(&sc, &m)?;
            print!("{:>10.1} /{:>6.1}", tb, post.log_posterior(&m)?);
        }
        println!();
    }
    println!("\nk = 1.2 lies above the k_max = 1.0 cap, so its log posterior is -inf.");
    Ok(())
}
