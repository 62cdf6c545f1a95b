//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! ```text
//! cargo test --release --test acceptance
//! cargo test --release --test acceptance -- 1 2 4   # a subset
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;
use std::time::Instant;
use tps_reliab::autodiff::{Activation, MlpNetwork};
use tps_reliab::commands::{self, read_csv, samples_file_name, SampleRow, SampleStats};
use tps_reliab::config::RunConfig;
use tps_reliab::heatsim::{analytic_reference, solve_explicit, solve_implicit, MaterialSample, ThermalScenario};
use tps_reliab::pinn::{field_errors, train, LossBatches, LossWeights, ParamRange, SurrogateModel, TrainingConfig};
use tps_reliab::samplers::{mh_run, smc_run, MhConfig, SmcConfig, SmcModel};

// criterion 1
const ORACLE_TOL_C: f64 = 0.5;
const ENERGY_REL_TOL: f64 = 0.01;
const SOLVE_BUDGET_S: f64 = 1.0;
const SERIES_TERMS: usize = 400;

// criterion 2
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_ABS_FLOOR: f64 = 1e-6;
const INPUT_REL_TOL: f64 = 1e-5;
const N_RANDOM_NETS: usize = 20;

// criterion 3
const FIELD_RMSE_TOL_C: f64 = 10.0;
const REPORTED_RMSE_C: f64 = 3.43;
const TRAIN_BUDGET_S: f64 = 15.0 * 60.0;

// criterion 4
const MH_STEPS: usize = 50_000;
const MH_MEAN_TOL: f64 = 0.05;
const MH_STD_REL_TOL: f64 = 0.10;
const SMC_ORACLE_PARTICLES: usize = 2000;
const SMC_MEAN_REL_TOL: f64 = 0.02;
const SMC_STD_REL_TOL: f64 = 0.05;
const SAMPLER_BUDGET_S: f64 = 60.0;

// criterion 5
const DESIGN_PARTICLES: usize = 10_000;
const FRACTION_TOL: [(f64, f64); 2] = [(0.95, 0.03), (0.99, 0.008)];
const ORDERING_LEVELS: [f64; 3] = [0.95, 0.99, 0.99999];

// criterion 6
const PINN_RATIO_MAX: f64 = 20.0;
const FDM_DECADE_RANGE: (f64, f64) = (7.0, 13.0);
const SMC_WORKER_RATIO_MAX: f64 = 0.6;
const BENCH_SIZES: [usize; 4] = [1, 10, 100, 1000];
const BENCH_REPS: usize = 3;

// criterion 7
const K_CAP: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let sc = ThermalScenario::default();
    let mat = MaterialSample::validation();
    let started = Instant::now();
    let field = solve_explicit(&sc, &mat).expect("explicit solve");
    let solve_s = started.elapsed().as_secs_f64();

    let mut oracle_err: f64 = 0.0;
    let mut energy_err: f64 = 0.0;
    for (n, (&t, back)) in field.times().iter().zip(field.back_trajectory()).enumerate() {
        let exact = analytic_reference(&sc, &mat, 0.0, t, SERIES_TERMS).expect("series");
        oracle_err = oracle_err.max((back - exact).abs());
        if n > 0 {
            // relative to the temperature rise, stricter than relative to T itself
            let balance = sc.mean_temperature(&mat, t);
            energy_err = energy_err.max((field.mean_temperature(n) - balance).abs() / (balance - sc.t_init));
        }
    }
    let imp = solve_implicit(&sc, &mat).expect("implicit solve");
    let implicit_err = imp
        .times()
        .iter()
        .zip(imp.back_trajectory())
        .map(|(&t, b)| (b - analytic_reference(&sc, &mat, 0.0, t, SERIES_TERMS).unwrap()).abs())
        .fold(0.0, f64::max);

    verdict(
        oracle_err <= ORACLE_TOL_C && energy_err <= ENERGY_REL_TOL && solve_s < SOLVE_BUDGET_S,
        format!(
            "max |FDM - series| = {oracle_err:.2e} °C (tol {ORACLE_TOL_C}), energy balance rel. error {energy_err:.2e} \
             (tol {ENERGY_REL_TOL}), explicit solve {solve_s:.3} s (budget {SOLVE_BUDGET_S} s); implicit scheme {implicit_err:.2e} °C"
        ),
    )
}

fn random_net(rng: &mut ChaCha8Rng, sizes: &[usize]) -> MlpNetwork {
    let mut net = MlpNetwork::xavier(sizes, Activation::Softplus, rng).unwrap();
    let p: Vec<f64> = net.params().iter().map(|w| w + rng.random_range(-0.3..0.3)).collect();
    net.set_params(&p).unwrap();
    net
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let range = ParamRange::default();
    let weights = LossWeights { physics: 0.7, initial: 1.3, boundary: 0.4 };
    let mut grad_worst: f64 = 0.0;
    let mut input_worst: f64 = 0.0;
    let mut n_components = 0;

    for _ in 0..N_RANDOM_NETS {
        let mut sizes = vec![4];
        sizes.extend((0..rng.random_range(1..=3)).map(|_| rng.random_range(2..=6)));
        sizes.push(1);
        let model = SurrogateModel::new(random_net(&mut rng, &sizes), ThermalScenario::default(), range).unwrap();
        let b = LossBatches {
            physics: (0..6).map(|_| (range.sample(&mut rng), rng.random(), rng.random())).collect(),
            initial: (0..6).map(|_| (range.sample(&mut rng), rng.random())).collect(),
            boundary: (0..6).map(|_| (range.sample(&mut rng), rng.random())).collect(),
        };
        let (_, g) = model.loss_and_gradient(&b, &weights).unwrap();
        let p0 = model.net.params();
        let mut probe = model.clone();
        for (i, a) in g.to_flat().into_iter().enumerate() {
            let h = 1e-5 * p0[i].abs().max(1.0);
            let mut eval = |d: f64| {
                let mut p = p0.clone();
                p[i] += d;
                probe.net.set_params(&p).unwrap();
                probe.total_loss(&b, &weights).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            grad_worst = grad_worst.max((a - fd).abs() / (GRAD_REL_TOL * fd.abs()).max(GRAD_ABS_FLOOR));
            n_components += 1;
        }

        // input derivatives against Richardson-extrapolated central differences
        let net = &model.net;
        let (x, t) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let e = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let d = net.input_derivatives(x, t, &e).unwrap();
        let fx = |h: f64| net.forward(&[x + h, t, e[0], e[1]]).unwrap();
        let ft = |h: f64| net.forward(&[x, t + h, e[0], e[1]]).unwrap();
        let d1 = |f: &dyn Fn(f64) -> f64, h: f64| (f(h) - f(-h)) / (2.0 * h);
        let d2 = |f: &dyn Fn(f64) -> f64, h: f64| (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        let h = 1e-3;
        let dx = (4.0 * d1(&fx, h / 2.0) - d1(&fx, h)) / 3.0;
        let dt = (4.0 * d1(&ft, h / 2.0) - d1(&ft, h)) / 3.0;
        let dxx = (4.0 * d2(&fx, h / 2.0) - d2(&fx, h)) / 3.0;
        for (a, b) in [(d.du_dx, dx), (d.du_dt, dt), (d.d2u_dx2, dxx)] {
            // 1e-4 floor keeps near-zero derivatives from dividing by rounding noise
            input_worst = input_worst.max((a - b).abs() / (INPUT_REL_TOL * b.abs().max(1e-4)));
        }
    }
    verdict(
        grad_worst <= 1.0 && input_worst <= 1.0,
        format!(
            "{N_RANDOM_NETS} nets, {n_components} gradient components: worst error/tolerance {grad_worst:.2e} \
             (rel {GRAD_REL_TOL}, abs floor {GRAD_ABS_FLOOR}); input derivatives worst error/tolerance {input_worst:.2e} \
             (rel {INPUT_REL_TOL}); {:.2} s",
            started.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_3() -> (Outcome, SurrogateModel) {
    let sc = ThermalScenario::default();
    let started = Instant::now();
    let model = train(&TrainingConfig::default(), &sc).expect("training");
    let train_s = started.elapsed().as_secs_f64();

    let mat = MaterialSample::validation();
    let field = solve_explicit(&sc, &mat).unwrap();
    let xs: Vec<f64> = field.x().iter().map(|x| x / sc.thickness).collect();
    let ts: Vec<f64> = field.times().iter().map(|t| t / sc.t_final).collect();
    let pred = model.predict_field(&mat, &xs, &ts).unwrap();
    let fdm: Vec<f64> = field.rows().flatten().copied().collect();
    let (rmse, max, _) = field_errors(&pred, &fdm);
    let out = verdict(
        rmse <= FIELD_RMSE_TOL_C && train_s <= TRAIN_BUDGET_S,
        format!(
            "default training: field RMSE {rmse:.3} °C (tol {FIELD_RMSE_TOL_C}, reported reference {REPORTED_RMSE_C}), \
             max error {max:.2} °C, final loss {:.3e}, training {train_s:.1} s (budget {TRAIN_BUDGET_S} s)",
            model.training_loss_history.last().unwrap().total
        ),
    );
    (out, model)
}

struct Conjugate {
    xbar: f64,
    n_obs: f64,
}

impl SmcModel for Conjugate {
    fn dim(&self) -> usize {
        1
    }
    fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.sample(StandardNormal)]
    }
    fn log_prior(&self, theta: &[f64]) -> f64 {
        -0.5 * theta[0] * theta[0]
    }
    fn log_likelihood_batch(&self, thetas: &[Vec<f64>]) -> Vec<f64> {
        thetas.iter().map(|t| -0.5 * self.n_obs * (self.xbar - t[0]).powi(2)).collect()
    }
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let logpost = |t: &[f64]| -0.5 * (t[0] * t[0] + t[1] * t[1]);
    let cfg = MhConfig { n_steps: MH_STEPS, adapt_interval: Some(200), seed: 4 };
    let run = mh_run(logpost, &[0.5, -0.5], DMatrix::identity(2, 2) * 0.5, &cfg).unwrap();
    let n = run.samples.len() as f64;
    let mut mh_ok = true;
    let mut mh_txt = Vec::new();
    for i in 0..2 {
        let m = run.samples.iter().map(|s| s[i]).sum::<f64>() / n;
        let s = (run.samples.iter().map(|s| (s[i] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        mh_ok &= m.abs() <= MH_MEAN_TOL && (s - 1.0).abs() <= MH_STD_REL_TOL;
        mh_txt.push(format!("({m:+.3}, {s:.3})"));
    }

    // N(0,1) prior, n_obs unit-variance observations with mean xbar
    let model = Conjugate { xbar: 1.5, n_obs: 10.0 };
    let post_mean = model.n_obs * model.xbar / (model.n_obs + 1.0);
    let post_std = (1.0 / (model.n_obs + 1.0)).sqrt();
    let smc = smc_run(&model, &SmcConfig { n_particles: SMC_ORACLE_PARTICLES, seed: 4, ..Default::default() }).unwrap();
    let (m, s) = (smc.ensemble.mean()[0], smc.ensemble.std()[0]);
    let mean_rel = (m - post_mean).abs() / post_mean;
    let std_rel = (s - post_std).abs() / post_std;
    let elapsed = started.elapsed().as_secs_f64();

    verdict(
        mh_ok && mean_rel <= SMC_MEAN_REL_TOL && std_rel <= SMC_STD_REL_TOL && elapsed < SAMPLER_BUDGET_S,
        format!(
            "MH {MH_STEPS} steps (mean, std) per axis {} (tol ±{MH_MEAN_TOL}, ±{}%), acceptance {:.3}; \
             SMC N={SMC_ORACLE_PARTICLES} mean {m:.4} vs {post_mean:.4} ({:.2}%, tol {}%), std {s:.4} vs {post_std:.4} \
             ({:.2}%, tol {}%), {} stages; {elapsed:.1} s (budget {SAMPLER_BUDGET_S} s)",
            mh_txt.join(" "),
            MH_STD_REL_TOL * 100.0,
            run.acceptance_rate,
            mean_rel * 100.0,
            SMC_MEAN_REL_TOL * 100.0,
            std_rel * 100.0,
            SMC_STD_REL_TOL * 100.0,
            smc.stages.len()
        ),
    )
}

/// Criterion 5 runs the full sampling step from the shipped reliability
/// configuration; its samples feed criterion 7.
fn criterion_5(out: &Path) -> (Outcome, Vec<Vec<SampleRow>>) {
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reliability.json");
    let mut cfg = RunConfig::load(&cfg_path).expect("reliability config");
    cfg.output_dir = out.to_path_buf();
    cfg.validate().expect("reliability config");
    assert_eq!(cfg.sampler.n_particles, DESIGN_PARTICLES);
    assert_eq!(cfg.target.reliabilities, ORDERING_LEVELS);
    assert_eq!(cfg.sampler.fdm_subsample, None, "every sample is FDM-verified");

    let started = Instant::now();
    let model = commands::train(&cfg).expect("training");
    let train_s = started.elapsed().as_secs_f64();
    let summaries = commands::sample(&cfg, &model).expect("sampling");
    let total_s = started.elapsed().as_secs_f64();

    let t_crit = cfg.target.t_critical;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut rows_all = Vec::new();
    let mut means = Vec::new();
    for s in &summaries {
        let r = s.target.reliability;
        let rows: Vec<SampleRow> = read_csv(&out.join(samples_file_name(r))).unwrap();
        let stats = SampleStats::from_rows(&rows, t_crit);
        assert_eq!(stats, s.stats);
        let frac = stats.fraction_fdm.unwrap();
        let mean_fdm = stats.mean_t_back_fdm.unwrap();
        means.push(mean_fdm);
        let tol = FRACTION_TOL.iter().find(|(level, _)| *level == r).map(|p| p.1);
        let ok = tol.is_none_or(|tol| (frac - r).abs() <= tol && stats.n_verified == DESIGN_PARTICLES);
        pass &= ok;
        parts.push(format!(
            "R={r}: FDM fraction {frac:.4}{} surrogate fraction {:.4}, mean T_back FDM {mean_fdm:.2} °C / surrogate {:.2} °C",
            match tol {
                Some(t) => format!(" (|Δ| {:.4}, tol {t}{}),", (frac - r).abs(), if ok { "" } else { ", out of tolerance" }),
                None => " (ordering only),".to_string(),
            },
            stats.fraction_pinn,
            stats.mean_t_back_pinn
        ));
        rows_all.push(rows);
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    pass &= decreasing;
    parts.push(format!(
        "mean T_back {} with R; training {train_s:.0} s, total {total_s:.0} s",
        if decreasing { "decreases" } else { "does NOT decrease" }
    ));
    (verdict(pass, parts.join("; ")), rows_all)
}

fn criterion_6(model: &SurrogateModel, out: &Path) -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut cfg = RunConfig { output_dir: out.to_path_buf(), ..RunConfig::default() };
    cfg.benchmark.sizes = BENCH_SIZES.to_vec();
    cfg.benchmark.repetitions = BENCH_REPS;
    cfg.benchmark.smc_particles = DESIGN_PARTICLES;
    cfg.benchmark.workers = Some(vec![1, cores]);
    let b = commands::benchmark(&cfg, model).expect("benchmark");

    let inf = &b.inference;
    let pinn_ratio = inf.last().unwrap().pinn_s / inf[0].pinn_s;
    let decades: Vec<f64> = inf.windows(2).map(|w| w[1].fdm_s / w[0].fdm_s).collect();
    let fdm_ok = decades.iter().all(|r| (FDM_DECADE_RANGE.0..=FDM_DECADE_RANGE.1).contains(r));
    let smc_ratio = b.smc.last().unwrap().wall_s / b.smc[0].wall_s;
    let smc_ok = cores > 1 && smc_ratio <= SMC_WORKER_RATIO_MAX;
    let mut detail = format!(
        "PINN time(M={})/time(M=1) = {:.3e} s / {:.3e} s = {pinn_ratio:.2} (max {PINN_RATIO_MAX}); FDM per-decade ratios {:.2?} (range {:?}); \
         SMC N={DESIGN_PARTICLES} {} workers / 1 worker = {smc_ratio:.3} (max {SMC_WORKER_RATIO_MAX})",
        inf.last().unwrap().m,
        inf.last().unwrap().pinn_s,
        inf[0].pinn_s,
        decades,
        FDM_DECADE_RANGE,
        cores
    );
    if cores == 1 {
        detail.push_str(
            "; this host exposes a single core: the maximum worker count is 1, so no parallel speedup can be \
             measured, and batched inference cannot overlap work, so its cost grows with the per-point compute \
             (about 2000 multiply-adds and 90 softplus evaluations per point) rather than staying near the \
             fixed per-call cost; both requirements are unattainable here, not relaxed",
        );
    }
    verdict(pinn_ratio <= PINN_RATIO_MAX && fdm_ok && smc_ok, detail)
}

fn criterion_7(samples: &[Vec<SampleRow>]) -> Outcome {
    let n: usize = samples.iter().map(Vec::len).sum();
    let violations = samples.iter().flatten().filter(|r| !(r.k <= K_CAP)).count();
    let max_k = samples.iter().flatten().map(|r| r.k).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        n > 0 && violations == 0,
        format!("{violations} of {n} sampled k exceed {K_CAP} W/m/K (max k {max_k:.4})"),
    )
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |c: u32| wanted.is_empty() || wanted.contains(&c);
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut failed = Vec::new();
    let mut report = |c: u32, o: Outcome| {
        println!("criterion {c} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(c);
        }
    };

    if on(1) {
        report(1, criterion_1());
    }
    if on(2) {
        report(2, criterion_2());
    }
    let mut model = None;
    if on(3) || on(6) {
        let (o, m) = criterion_3();
        if on(3) {
            report(3, o);
        }
        model = Some(m);
    }
    if on(4) {
        report(4, criterion_4());
    }
    let mut samples = Vec::new();
    if on(5) || on(7) {
        let (o, s) = criterion_5(&tmp.path().join("design"));
        if on(5) {
            report(5, o);
        }
        samples = s;
    }
    if on(6) {
        report(6, criterion_6(model.as_ref().unwrap(), &tmp.path().join("bench")));
    }
    if on(7) {
        report(7, criterion_7(&samples));
    }

    if failed.is_empty() {
        println!("acceptance: all selected criteria PASS");
    } else {
        println!("acceptance: FAIL {failed:?}");
        std::process::exit(1);
    }
}
