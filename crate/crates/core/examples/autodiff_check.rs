//! Input derivatives and loss gradients of a small network checked against
//! central finite differences.
//!
//! ```text
//! cargo run --release --example autodiff_check
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tps_reliab::autodiff::{loss_gradient, Activation, DerivativeSeed, LossEvaluation, MlpNetwork};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = MlpNetwork::xavier(&[4, 8, 8, 1], Activation::Softplus, &mut rng)?;
    let (x, t, extra) = (0.3, 0.6, [0.2, 0.7]);

    let d = net.input_derivatives(x, t, &extra)?;
    let f = |x: f64, t: f64| net.forward(&[x, t, extra[0], extra[1]]).unwrap();
    let h = 1e-4;
    println!("u       = {:+.10e}", d.u);
    println!("du/dx   = {:+.10e}  fd {:+.10e}", d.du_dx, (f(x + h, t) - f(x - h, t)) / (2.0 * h));
    println!("du/dt   = {:+.10e}  fd {:+.10e}", d.du_dt, (f(x, t + h) - f(x, t - h)) / (2.0 * h));
    println!(
        "d2u/dx2 = {:+.10e}  fd {:+.10e}",
        d.d2u_dx2,
        (f(x + h, t) - 2.0 * f(x, t) + f(x - h, t)) / (h * h)
    );

    // a heat-equation style residual on three points
    let pts = vec![vec![0.1, 0.2, 0.5, 0.5], vec![0.5, 0.5, 0.1, 0.9], vec![0.9, 0.8, 0.7, 0.3]];
    let diff = 0.4;
    let residual = |n: &MlpNetwork| {
        pts.iter()
            .map(|p| {
                let d = n.input_derivatives(p[0], p[1], &p[2..]).unwrap();
                (d.du_dt - diff * d.d2u_dx2).powi(2)
            })
            .sum::<f64>()
    };
    let (value, grad) = loss_gradient(&net, &pts, |ds| {
        let mut value = 0.0;
        let seeds = ds
            .iter()
            .map(|d| {
                let r = d.du_dt - diff * d.d2u_dx2;
                value += r * r;
                DerivativeSeed {
                    du_dt: 2.0 * r,
                    d2u_dx2: -2.0 * diff * r,
                    ..Default::default()
                }
            })
            .collect();
        LossEvaluation { value, seeds }
    })?;
    println!("loss {value:.6e}, {} parameters", net.n_params());

    let p0 = net.params();
    let g = grad.to_flat();
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in 0..p0.len() {
        let step = 1e-5 * p0[i].abs().max(1.0);
        let mut p = p0.clone();
        p[i] = p0[i] + step;
        probe.set_params(&p)?;
        let up = residual(&probe);
        p[i] = p0[i] - step;
        probe.set_params(&p)?;
        let down = residual(&probe);
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((g[i] - fd).abs() / fd.abs().max(1e-6));
    }
    println!("worst relative gradient error vs finite differences: {worst:.2e}");
    Ok(())
}
