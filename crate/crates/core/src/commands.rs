//! Pipeline steps behind the `tps-reliab` subcommands.
//!
//! Each step validates the whole [`RunConfig`] before creating any file, then
//! writes its CSV/JSON outputs into `output_dir`:
//!
//! | step        | files |
//! |-------------|-------|
//! | `solve`     | `field_fdm.csv`, `field_diff.csv` |
//! | `train`     | weights file, `loss_history.csv` |
//! | `validate`  | `validation.json`, `error_field.csv` |
//! | `sample`    | `samples_R<R>.csv`, `diagnostics_R<R>.csv` per reliability level |
//! | `benchmark` | `bench_inference.csv`, `bench_smc.csv` |
//! | `report`    | `report.json` |

use crate::config::{ConfigError, RunConfig, SamplingMethod, TargetConfig};
use crate::heatsim::{
    analytic_reference, explicit_back_temperature, solve_explicit, solve_implicit, HeatError, MaterialSample,
    TemperatureField,
};
use crate::pinn::{field_errors, load_weights, save_weights, train as train_surrogate, PinnError, SurrogateModel, WeightsError};
use crate::reliability::{make_target, ParamPrior, PosteriorModel, PriorSpec, ReliabilityError, TargetSpec};
use crate::samplers::{gelman_rubin, run_chains, smc_run, stream_rng, MhConfig, SamplerError, SmcModel};
use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("weights: {0}")]
    Weights(#[from] WeightsError),
    #[error("weights do not match the configured scenario: {0}")]
    WeightsMismatch(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error("missing inputs: {}", .0.join(", "))]
    MissingInputs(Vec<String>),
    #[error("heat solver: {0}")]
    Heat(#[from] HeatError),
    #[error("surrogate: {0}")]
    Pinn(#[from] PinnError),
    #[error("sampling R = {reliability}: {source}")]
    Sampling { reliability: f64, source: SamplerError },
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

impl CommandError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) | CommandError::Weights(_) | CommandError::WeightsMismatch(_) => 2,
            CommandError::Heat(_)
            | CommandError::Pinn(_)
            | CommandError::Sampling { .. }
            | CommandError::Reliability(_) => 3,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CommandError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn prepare(cfg: &RunConfig) -> Result<&Path> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(dir)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |source| CommandError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| CommandError::Csv {
        path: path.to_path_buf(),
        source,
    };
    csv::Reader::from_path(path)
        .map_err(csv_err)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CommandError::Malformed {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub scheme: String,
    pub x_m: f64,
    pub t_s: f64,
    #[serde(rename = "T_C")]
    pub t_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiffRow {
    pub x_m: f64,
    pub t_s: f64,
    /// Explicit minus implicit, °C.
    #[serde(rename = "dT_C")]
    pub dt_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub back_temperature_explicit_c: f64,
    pub back_temperature_implicit_c: f64,
    pub back_temperature_series_c: f64,
    /// Largest explicit back-temperature deviation from the series over the saved times.
    pub max_back_error_explicit_c: f64,
    /// Largest relative deviation of the mean temperature rise from the absorbed energy.
    pub energy_balance_error: f64,
    pub max_scheme_difference_c: f64,
}

fn field_rows<'a>(scheme: &'a str, f: &'a TemperatureField) -> impl Iterator<Item = FieldRow> + 'a {
    f.times().iter().enumerate().flat_map(move |(n, &t)| {
        f.x().iter().enumerate().map(move |(i, &x)| FieldRow {
            scheme: scheme.to_string(),
            x_m: x,
            t_s: t,
            t_c: f.at(n, i),
        })
    })
}

/// Explicit and implicit fields for the configured material.
pub fn solve(cfg: &RunConfig) -> Result<SolveSummary> {
    let dir = prepare(cfg)?;
    let (sc, mat) = (&cfg.scenario, &cfg.material);
    let exp = solve_explicit(sc, mat)?;
    let imp = solve_implicit(sc, mat)?;

    write_csv(&dir.join("field_fdm.csv"), field_rows("explicit", &exp).chain(field_rows("implicit", &imp)))?;
    let mut max_diff: f64 = 0.0;
    let diff: Vec<FieldDiffRow> = field_rows("explicit", &exp)
        .zip(field_rows("implicit", &imp))
        .map(|(a, b)| {
            max_diff = max_diff.max((a.t_c - b.t_c).abs());
            FieldDiffRow {
                x_m: a.x_m,
                t_s: a.t_s,
                dt_c: a.t_c - b.t_c,
            }
        })
        .collect();
    write_csv(&dir.join("field_diff.csv"), diff)?;

    let mut max_back: f64 = 0.0;
    let mut energy: f64 = 0.0;
    for (n, &t) in exp.times().iter().enumerate().skip(1) {
        let series = analytic_reference(sc, mat, 0.0, t, 200)?;
        max_back = max_back.max((exp.at(n, 0) - series).abs());
        let exact = sc.mean_temperature(mat, t);
        energy = energy.max(((exp.mean_temperature(n) - exact) / (exact - sc.t_init)).abs());
    }
    let last = exp.n_rows() - 1;
    let summary = SolveSummary {
        back_temperature_explicit_c: exp.at(last, 0),
        back_temperature_implicit_c: imp.at(imp.n_rows() - 1, 0),
        back_temperature_series_c: analytic_reference(sc, mat, 0.0, sc.t_final, 200)?,
        max_back_error_explicit_c: max_back,
        energy_balance_error: energy,
        max_scheme_difference_c: max_diff,
    };
    log::info!("solve: {summary:?}");
    Ok(summary)
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub total: f64,
    pub physics: f64,
    pub initial: f64,
    pub boundary: f64,
}

/// Trains the surrogate, then writes the weights file and `loss_history.csv`.
pub fn train(cfg: &RunConfig) -> Result<SurrogateModel> {
    let dir = prepare(cfg)?;
    let started = Instant::now();
    let model = train_surrogate(&cfg.training, &cfg.scenario)?;
    log::info!(
        "trained {} epochs in {:.1} s",
        cfg.training.epochs,
        started.elapsed().as_secs_f64()
    );
    let weights = cfg.weights_path();
    if let Some(parent) = weights.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    save_weights(&model, &weights)?;
    write_csv(
        &dir.join("loss_history.csv"),
        model.training_loss_history.iter().enumerate().map(|(i, r)| LossRow {
            epoch: i + 1,
            total: r.total,
            physics: r.physics,
            initial: r.initial,
            boundary: r.boundary,
        }),
    )?;
    Ok(model)
}

/// Loads the configured weights and checks them against the scenario.
pub fn load_model(cfg: &RunConfig) -> Result<SurrogateModel> {
    cfg.validate()?;
    let model = load_weights(cfg.weights_path())?;
    let (a, b) = (&model.scenario, &cfg.scenario);
    let pairs = [
        ("T_norm", a.t_norm, b.t_norm),
        ("t_final", a.t_final, b.t_final),
        ("L", a.thickness, b.thickness),
        ("Q", a.flux, b.flux),
        ("T_init", a.t_init, b.t_init),
    ];
    for (name, w, c) in pairs {
        if w != c {
            return Err(CommandError::WeightsMismatch(format!("{name} is {w} in the weights, {c} in the config")));
        }
    }
    Ok(model)
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub k: f64,
    pub rho_cp: f64,
    pub n_points: usize,
    #[serde(rename = "rmse_C")]
    pub rmse_c: f64,
    #[serde(rename = "max_abs_C")]
    pub max_abs_c: f64,
    pub max_error_x_m: f64,
    pub max_error_t_s: f64,
    /// `t / t_final` at the maximum error.
    pub max_error_t_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFieldRow {
    pub x_m: f64,
    pub t_s: f64,
    #[serde(rename = "T_fdm_C")]
    pub t_fdm_c: f64,
    #[serde(rename = "T_pinn_C")]
    pub t_pinn_c: f64,
    /// Surrogate minus FDM, °C.
    #[serde(rename = "error_C")]
    pub error_c: f64,
}

impl ValidationReport {
    /// Compares `predicted` (row-major by time, same grid) with `field`.
    pub fn compare(mat: &MaterialSample, field: &TemperatureField, predicted: &[f64]) -> Self {
        let reference: Vec<f64> = field.rows().flatten().copied().collect();
        let (rmse, max, arg) = field_errors(predicted, &reference);
        let (n, i) = (arg / field.n_x(), arg % field.n_x());
        let t_final = field.times()[field.n_rows() - 1];
        ValidationReport {
            k: mat.k,
            rho_cp: mat.rho_cp,
            n_points: reference.len(),
            rmse_c: rmse,
            max_abs_c: max,
            max_error_x_m: field.x()[i],
            max_error_t_s: field.times()[n],
            max_error_t_norm: field.times()[n] / t_final,
        }
    }
}

/// Surrogate against the explicit FDM field on the configured material.
pub fn validate(cfg: &RunConfig, model: &SurrogateModel) -> Result<ValidationReport> {
    cfg.validate()?;
    let field = solve_explicit(&cfg.scenario, &cfg.material)?;
    let xs: Vec<f64> = field.x().iter().map(|x| x / cfg.scenario.thickness).collect();
    let ts: Vec<f64> = field.times().iter().map(|t| t / cfg.scenario.t_final).collect();
    let predicted = model.predict_field(&cfg.material, &xs, &ts)?;
    write_validation(cfg, &field, &predicted)
}

/// Validation with the FDM field standing in for the surrogate.
pub fn validate_self_check(cfg: &RunConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let field = solve_explicit(&cfg.scenario, &cfg.material)?;
    let predicted: Vec<f64> = field.rows().flatten().copied().collect();
    write_validation(cfg, &field, &predicted)
}

fn write_validation(cfg: &RunConfig, field: &TemperatureField, predicted: &[f64]) -> Result<ValidationReport> {
    let dir = prepare(cfg)?;
    let report = ValidationReport::compare(&cfg.material, field, predicted);
    let mut pred = predicted.iter();
    let rows = field.times().iter().enumerate().flat_map(|(n, &t)| {
        field.x().iter().enumerate().map(move |(i, &x)| (x, t, field.at(n, i)))
    });
    let rows: Vec<ErrorFieldRow> = rows
        .map(|(x, t, f)| {
            let p = *pred.next().expect("prediction covers the grid");
            ErrorFieldRow {
                x_m: x,
                t_s: t,
                t_fdm_c: f,
                t_pinn_c: p,
                error_c: p - f,
            }
        })
        .collect();
    write_csv(&dir.join("error_field.csv"), rows)?;
    write_json(&dir.join("validation.json"), &report)?;
    log::info!("validation: rmse {:.3} °C, max {:.3} °C", report.rmse_c, report.max_abs_c);
    Ok(report)
}

// ---------------------------------------------------------------- sample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub k: f64,
    pub rho_cp: f64,
    pub alpha: f64,
    #[serde(rename = "T_back_pinn")]
    pub t_back_pinn: f64,
    /// Empty for rows outside the FDM subsample.
    #[serde(rename = "T_back_fdm")]
    pub t_back_fdm: Option<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcDiagnosticRow {
    pub stage: usize,
    pub phi: f64,
    pub ess: f64,
    pub resampled: bool,
    pub acceptance_rate: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcDiagnosticRow {
    pub chain: usize,
    pub acceptance_rate: f64,
    pub r_hat_k: f64,
    pub r_hat_rho_cp: f64,
}

/// Weighted statistics of one samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n_samples: usize,
    pub n_verified: usize,
    /// Weighted fraction with surrogate `T_back ≤ T_critical`.
    pub fraction_pinn: f64,
    /// Same with FDM back temperatures, over the verified rows.
    pub fraction_fdm: Option<f64>,
    #[serde(rename = "mean_T_back_pinn")]
    pub mean_t_back_pinn: f64,
    #[serde(rename = "mean_T_back_fdm")]
    pub mean_t_back_fdm: Option<f64>,
    pub mean_k: f64,
    pub mean_rho_cp: f64,
    pub max_k: f64,
}

impl SampleStats {
    pub fn from_rows(rows: &[SampleRow], t_critical: f64) -> Self {
        let w: f64 = rows.iter().map(|r| r.weight).sum();
        let mean = |f: &dyn Fn(&SampleRow) -> f64| rows.iter().map(|r| r.weight * f(r)).sum::<f64>() / w;
        let verified: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.t_back_fdm.map(|t| (r.weight, t))).collect();
        let wv: f64 = verified.iter().map(|v| v.0).sum();
        let has_fdm = !verified.is_empty();
        SampleStats {
            n_samples: rows.len(),
            n_verified: verified.len(),
            fraction_pinn: mean(&|r| f64::from(u8::from(r.t_back_pinn <= t_critical))),
            fraction_fdm: has_fdm
                .then(|| verified.iter().filter(|v| v.1 <= t_critical).map(|v| v.0).sum::<f64>() / wv),
            mean_t_back_pinn: mean(&|r| r.t_back_pinn),
            mean_t_back_fdm: has_fdm.then(|| verified.iter().map(|v| v.0 * v.1).sum::<f64>() / wv),
            mean_k: mean(&|r| r.k),
            mean_rho_cp: mean(&|r| r.rho_cp),
            max_k: rows.iter().map(|r| r.k).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub target: TargetSpec,
    pub method: SamplingMethod,
    pub stats: SampleStats,
    pub wall_time_s: f64,
    /// SMC stages including the prior stage.
    pub stages: Option<usize>,
    /// Gelman–Rubin factor per parameter (MCMC only).
    pub r_hat: Option<Vec<f64>>,
}

pub fn samples_file_name(reliability: f64) -> String {
    format!("samples_R{reliability}.csv")
}

pub fn diagnostics_file_name(reliability: f64) -> String {
    format!("diagnostics_R{reliability}.csv")
}

/// Posterior samples for every configured reliability level.
pub fn sample(cfg: &RunConfig, model: &SurrogateModel) -> Result<Vec<SampleSummary>> {
    let dir = prepare(cfg)?;
    let mut out = Vec::new();
    for target in cfg.target.targets()? {
        let mut posterior = PosteriorModel::new(target, cfg.prior, model);
        if let Some(s) = cfg.target.sigma_like {
            posterior.sigma_like = s;
        }
        let r = target.reliability;
        let sampling = |source| CommandError::Sampling { reliability: r, source };
        let started = Instant::now();
        let (thetas, weights, stages, r_hat) = match cfg.sampler.method {
            SamplingMethod::Smc => {
                let run = smc_run(&posterior, &cfg.sampler.smc()).map_err(sampling)?;
                write_csv(
                    &dir.join(diagnostics_file_name(r)),
                    run.stages.iter().map(|s| SmcDiagnosticRow {
                        stage: s.stage,
                        phi: s.phi,
                        ess: s.ess,
                        resampled: s.resampled,
                        acceptance_rate: s.acceptance_rate,
                        elapsed_s: s.elapsed_s,
                    }),
                )?;
                (run.ensemble.thetas(), run.ensemble.weights(), Some(run.stages.len()), None)
            }
            SamplingMethod::Mcmc => {
                let (thetas, r_hat, rates) = mcmc_chains(cfg, &posterior).map_err(sampling)?;
                write_csv(
                    &dir.join(diagnostics_file_name(r)),
                    rates.iter().enumerate().map(|(chain, &acceptance_rate)| McmcDiagnosticRow {
                        chain,
                        acceptance_rate,
                        r_hat_k: r_hat.first().copied().unwrap_or(f64::NAN),
                        r_hat_rho_cp: r_hat.get(1).copied().unwrap_or(f64::NAN),
                    }),
                )?;
                let n = thetas.len();
                (thetas, vec![1.0 / n as f64; n], None, Some(r_hat))
            }
        };
        let sampling_time = started.elapsed().as_secs_f64();
        let rows = sample_rows(cfg, model, &thetas, &weights)?;
        write_csv(&dir.join(samples_file_name(r)), &rows)?;
        let summary = SampleSummary {
            target,
            method: cfg.sampler.method,
            stats: SampleStats::from_rows(&rows, target.t_critical),
            wall_time_s: sampling_time,
            stages,
            r_hat,
        };
        log::info!(
            "R = {r}: surrogate fraction {:.4}, FDM fraction {:?}",
            summary.stats.fraction_pinn,
            summary.stats.fraction_fdm
        );
        out.push(summary);
    }
    Ok(out)
}

fn sample_rows(cfg: &RunConfig, model: &SurrogateModel, thetas: &[Vec<f64>], weights: &[f64]) -> Result<Vec<SampleRow>> {
    use rayon::prelude::*;
    let mats: Vec<MaterialSample> = thetas.iter().map(|t| MaterialSample::new(t[0], t[1])).collect();
    let n = mats.len();
    let pinn: Vec<f64> = model
        .predict_back_temperature(&mats)
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| CommandError::Malformed {
                path: cfg.output_dir.clone(),
                msg: format!("sample {i}: {e}"),
            })
        })
        .collect::<Result<_>>()?;
    // evenly spaced subsample
    let m = cfg.sampler.fdm_subsample.unwrap_or(n).min(n);
    let mut check = vec![false; n];
    for j in 0..m {
        check[j * n / m] = true;
    }
    let fdm: Vec<Option<f64>> = mats
        .par_iter()
        .zip(&check)
        .map(|(mat, &c)| c.then(|| explicit_back_temperature(&cfg.scenario, mat)).transpose())
        .collect::<std::result::Result<_, _>>()?;
    Ok((0..n)
        .map(|i| SampleRow {
            k: mats[i].k,
            rho_cp: mats[i].rho_cp,
            alpha: mats[i].diffusivity(),
            t_back_pinn: pinn[i],
            t_back_fdm: fdm[i],
            weight: weights[i],
        })
        .collect())
}

/// Initial proposal standard deviation: a twentieth of the prior range.
fn prior_step(p: &ParamPrior) -> f64 {
    match *p {
        ParamPrior::Uniform { min, max } => (max - min) / 20.0,
        ParamPrior::Normal { std, .. } => 4.0 * std / 20.0,
    }
}

type ChainOutput = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

fn mcmc_chains<M: SmcModel>(cfg: &RunConfig, posterior: &M) -> std::result::Result<ChainOutput, SamplerError> {
    let s = &cfg.sampler;
    let inits: Vec<Vec<f64>> = (0..s.mcmc_chains)
        .map(|c| posterior.sample_prior(&mut stream_rng(s.seed, u64::MAX - 1, c as u64)))
        .collect();
    let prior: &PriorSpec = &cfg.prior;
    let cov0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        prior_step(&prior.k).powi(2),
        prior_step(&prior.rho_cp).powi(2),
    ]));
    let mh = MhConfig {
        n_steps: s.mcmc_steps,
        adapt_interval: s.mcmc_adapt_interval,
        seed: s.seed,
    };
    let logpost = |theta: &[f64]| {
        let lp = posterior.log_prior(theta);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + posterior.log_likelihood(theta)
        }
    };
    let runs = run_chains(logpost, &inits, cov0, &mh)?;
    let chains: Vec<Vec<Vec<f64>>> = runs.iter().map(|r| r.samples.clone()).collect();
    let r_hat = gelman_rubin(&chains);
    let rates = runs.iter().map(|r| r.acceptance_rate).collect();
    Ok((chains.into_iter().flatten().collect(), r_hat, rates))
}

// ---------------------------------------------------------------- benchmark

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRow {
    pub m: usize,
    /// Median seconds for `m` sequential explicit solves.
    pub fdm_s: f64,
    /// Median seconds for one batched surrogate prediction of size `m`.
    pub pinn_s: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcBenchRow {
    pub workers: usize,
    pub n_particles: usize,
    pub wall_s: f64,
    /// Relative to the first (smallest) worker count.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub inference: Vec<InferenceRow>,
    pub smc: Vec<SmcBenchRow>,
}

/// Median wall time of `reps` runs after one discarded warmup.
pub fn median_seconds(reps: usize, mut f: impl FnMut()) -> f64 {
    f();
    let mut t: Vec<f64> = (0..reps)
        .map(|_| {
            let s = Instant::now();
            f();
            s.elapsed().as_secs_f64()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    let n = t.len();
    if n % 2 == 1 {
        t[n / 2]
    } else {
        0.5 * (t[n / 2 - 1] + t[n / 2])
    }
}

pub fn benchmark(cfg: &RunConfig, model: &SurrogateModel) -> Result<BenchmarkSummary> {
    let dir = prepare(cfg)?;
    let b = &cfg.benchmark;
    let (sc, mat) = (&cfg.scenario, &cfg.material);
    explicit_back_temperature(sc, mat)?;
    model.predict_back_temperature(&[*mat])[0]
        .map_err(|e| PinnError::InvalidConfig(format!("benchmark material: {e}")))?;

    let mut inference = Vec::new();
    for &m in &b.sizes {
        let batch = vec![*mat; m];
        let fdm_s = median_seconds(b.repetitions, || {
            for mat in &batch {
                black_box(explicit_back_temperature(sc, mat).ok());
            }
        });
        let pinn_s = median_seconds(b.repetitions, || {
            black_box(model.predict_back_temperature(&batch));
        });
        log::info!("M = {m}: fdm {fdm_s:.3e} s, pinn {pinn_s:.3e} s");
        inference.push(InferenceRow {
            m,
            fdm_s,
            pinn_s,
            speedup: fdm_s / pinn_s,
        });
    }
    write_csv(&dir.join("bench_inference.csv"), &inference)?;

    let target = make_target(cfg.target.t_critical, b.reliability, cfg.target.sigma_target)?;
    let posterior = PosteriorModel::new(target, cfg.prior, model);
    let mut smc = Vec::new();
    for w in b.worker_counts() {
        let smc_cfg = crate::samplers::SmcConfig {
            n_particles: b.smc_particles,
            workers: Some(w),
            ..cfg.sampler.smc()
        };
        let mut failure = None;
        let wall_s = median_seconds(b.repetitions, || {
            if let Err(e) = smc_run(&posterior, &smc_cfg) {
                failure = Some(e);
            }
        });
        if let Some(source) = failure {
            return Err(CommandError::Sampling {
                reliability: b.reliability,
                source,
            });
        }
        log::info!("SMC with {w} workers: {wall_s:.3} s");
        smc.push(SmcBenchRow {
            workers: w,
            n_particles: b.smc_particles,
            wall_s,
            speedup: 1.0,
        });
    }
    let base = smc[0].wall_s;
    for r in &mut smc {
        r.speedup = base / r.wall_s;
    }
    write_csv(&dir.join("bench_smc.csv"), &smc)?;
    Ok(BenchmarkSummary { inference, smc })
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub min_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub n_rows: usize,
    #[serde(rename = "back_temperature_explicit_C")]
    pub back_temperature_explicit_c: f64,
    #[serde(rename = "back_temperature_implicit_C")]
    pub back_temperature_implicit_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityEntry {
    pub reliability: f64,
    #[serde(flatten)]
    pub stats: SampleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub inference: Vec<InferenceRow>,
    pub smc: Vec<SmcBenchRow>,
    /// FDM time ratio for each consecutive pair of sizes a decade apart.
    pub fdm_decade_ratios: Vec<f64>,
    /// Surrogate time at `M = 1000` over `M = 1`, when both were measured.
    pub pinn_ratio_1000_over_1: Option<f64>,
    /// SMC wall time at the largest worker count over one worker.
    pub smc_max_worker_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    #[serde(rename = "T_critical")]
    pub t_critical: f64,
    pub field: FieldSummary,
    pub training: TrainingSummary,
    pub validation: ValidationReport,
    pub reliability: Vec<ReliabilityEntry>,
    pub benchmark: BenchmarkReport,
}

pub const SAMPLES_PATTERN: &str = "samples_R<value>.csv";

/// The six inputs `report` needs; samples count once for all levels.
pub const REPORT_INPUTS: [&str; 6] = [
    "field_fdm.csv",
    "loss_history.csv",
    "validation.json",
    SAMPLES_PATTERN,
    "bench_inference.csv",
    "bench_smc.csv",
];

fn sample_files(dir: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let mut found = Vec::new();
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => return Ok(found),
    };
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(r) = name.strip_prefix("samples_R").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(r) = r.parse::<f64>() {
                found.push((r, entry.path()));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(found)
}

/// Merges the outputs in `dir` into `report.json`.
pub fn report(dir: &Path, target: &TargetConfig) -> Result<Report> {
    let samples = sample_files(dir)?;
    let missing: Vec<String> = REPORT_INPUTS
        .iter()
        .filter(|&&name| {
            if name == SAMPLES_PATTERN {
                samples.is_empty()
            } else {
                !dir.join(name).is_file()
            }
        })
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CommandError::MissingInputs(missing));
    }

    let field: Vec<FieldRow> = read_csv(&dir.join("field_fdm.csv"))?;
    let back = |scheme: &str| {
        field
            .iter()
            .filter(|r| r.scheme == scheme && r.x_m == 0.0)
            .max_by(|a, b| a.t_s.total_cmp(&b.t_s))
            .map(|r| r.t_c)
            .ok_or_else(|| CommandError::Malformed {
                path: dir.join("field_fdm.csv"),
                msg: format!("no {scheme} rows at x = 0"),
            })
    };
    let field_summary = FieldSummary {
        n_rows: field.len(),
        back_temperature_explicit_c: back("explicit")?,
        back_temperature_implicit_c: back("implicit")?,
    };

    let losses: Vec<LossRow> = read_csv(&dir.join("loss_history.csv"))?;
    let (first, last) = match (losses.first(), losses.last()) {
        (Some(f), Some(l)) => (f.total, l.total),
        _ => {
            return Err(CommandError::Malformed {
                path: dir.join("loss_history.csv"),
                msg: "no epochs".into(),
            })
        }
    };
    let training = TrainingSummary {
        epochs: losses.len(),
        initial_loss: first,
        final_loss: last,
        min_loss: losses.iter().map(|l| l.total).fold(f64::INFINITY, f64::min),
    };

    let validation: ValidationReport = read_json(&dir.join("validation.json"))?;

    let mut reliability = Vec::new();
    for (r, path) in &samples {
        let rows: Vec<SampleRow> = read_csv(path)?;
        if rows.is_empty() {
            return Err(CommandError::Malformed {
                path: path.clone(),
                msg: "no samples".into(),
            });
        }
        reliability.push(ReliabilityEntry {
            reliability: *r,
            stats: SampleStats::from_rows(&rows, target.t_critical),
        });
    }

    let inference: Vec<InferenceRow> = read_csv(&dir.join("bench_inference.csv"))?;
    let smc: Vec<SmcBenchRow> = read_csv(&dir.join("bench_smc.csv"))?;
    let fdm_decade_ratios = inference
        .windows(2)
        .filter(|w| w[1].m == 10 * w[0].m)
        .map(|w| w[1].fdm_s / w[0].fdm_s)
        .collect();
    let pinn_at = |m: usize| inference.iter().find(|r| r.m == m).map(|r| r.pinn_s);
    let pinn_ratio_1000_over_1 = pinn_at(1000).zip(pinn_at(1)).map(|(a, b)| a / b);
    let one = smc.iter().find(|r| r.workers == 1);
    let max = smc.iter().max_by_key(|r| r.workers);
    let smc_max_worker_ratio = one.zip(max).map(|(a, b)| b.wall_s / a.wall_s);

    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        t_critical: target.t_critical,
        field: field_summary,
        training,
        validation,
        reliability,
        benchmark: BenchmarkReport {
            inference,
            smc,
            fdm_decade_ratios,
            pinn_ratio_1000_over_1,
            smc_max_worker_ratio,
        },
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: f64, t: f64, fdm: Option<f64>, w: f64) -> SampleRow {
        SampleRow {
            k,
            rho_cp: 1.0e6,
            alpha: k / 1.0e6,
            t_back_pinn: t,
            t_back_fdm: fdm,
            weight: w,
        }
    }

    #[test]
    fn stats_weight_rows_and_skip_unverified() {
        let rows = [row(0.5, 240.0, Some(260.0), 0.25), row(0.9, 255.0, None, 0.75)];
        let s = SampleStats::from_rows(&rows, 250.0);
        assert_eq!(s.fraction_pinn, 0.25);
        assert_eq!(s.fraction_fdm, Some(0.0));
        assert_eq!(s.n_verified, 1);
        assert_eq!(s.mean_t_back_fdm, Some(260.0));
        assert_eq!(s.max_k, 0.9);
        assert!((s.mean_t_back_pinn - 251.25).abs() < 1e-12);
    }

    #[test]
    fn median_discards_warmup() {
        let mut calls = 0;
        median_seconds(4, || calls += 1);
        assert_eq!(calls, 5);
    }

    #[test]
    fn file_names() {
        assert_eq!(samples_file_name(0.95), "samples_R0.95.csv");
        assert_eq!(diagnostics_file_name(0.99999), "diagnostics_R0.99999.csv");
    }

    #[test]
    fn exit_codes() {
        let cfg_err = CommandError::Config(ConfigError::Invalid {
            block: "target",
            msg: String::new(),
        });
        assert_eq!(cfg_err.exit_code(), 2);
        assert_eq!(CommandError::Heat(HeatError::Unstable(1.0)).exit_code(), 3);
        assert_eq!(CommandError::MissingInputs(vec![]).exit_code(), 1);
    }
}
