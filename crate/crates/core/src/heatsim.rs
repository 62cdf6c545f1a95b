//! One-dimensional transient heat conduction through a TPS slab.
//!
//! The slab occupies `0 ≤ x ≤ L`. The inner face `x = 0` is insulated and the
//! outer face `x = L` receives a constant heating flux `Q`:
//!
//! ```text
//! ∂T/∂t = α ∂²T/∂x²,   α = k / (ρ·c_p)
//! ∂T/∂x (0, t) = 0,     ∂T/∂x (L, t) = Q / k,     T(x, 0) = T_init
//! ```
//!
//! Both finite-difference schemes run on the normalized variables
//! `T' = T / T_norm`, `t' = t / t_final`, `x' = x / L` and use a ghost-node
//! closure at each boundary, so the trapezoidal mean temperature obeys the
//! exact energy balance `dT̄/dt = Q / (ρ·c_p·L)`. Results are returned in
//! physical units.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("explicit scheme unstable: cfl = {0} must lie in (0, 0.5]")]
    Unstable(f64),
}

/// Geometry, loading and grid settings for one heat-conduction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalScenario {
    /// Applied heat flux at `x = L`, W/m².
    pub flux: f64,
    /// Slab thickness `L`, m.
    pub thickness: f64,
    /// Simulated duration, s.
    pub t_final: f64,
    /// Uniform initial temperature, °C.
    pub t_init: f64,
    /// Temperature normalization scale, °C.
    pub t_norm: f64,
    /// Number of spatial nodes, including both faces.
    pub n_x: usize,
    /// Fourier number `α·Δt/Δx²` targeted by the explicit scheme.
    pub cfl: f64,
    /// Time steps taken by the implicit scheme.
    pub n_t_implicit: usize,
    /// Number of saved time intervals; the field holds `n_save + 1` rows.
    pub n_save: usize,
}

impl Default for ThermalScenario {
    fn default() -> Self {
        Self {
            flux: 10_000.0,
            thickness: 0.007,
            t_final: 300.0,
            t_init: 25.0,
            t_norm: 100.0,
            n_x: 100,
            cfl: 0.2,
            n_t_implicit: 100,
            n_save: 100,
        }
    }
}

impl ThermalScenario {
    pub fn validate(&self) -> Result<(), HeatError> {
        let bad = |msg: &str| Err(HeatError::InvalidScenario(msg.to_string()));
        if !(self.flux.is_finite() && self.flux >= 0.0) {
            return bad("flux must be finite and non-negative");
        }
        if !(self.thickness.is_finite() && self.thickness > 0.0) {
            return bad("thickness must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return bad("t_final must be positive");
        }
        if !self.t_init.is_finite() {
            return bad("t_init must be finite");
        }
        if !(self.t_norm.is_finite() && self.t_norm > 0.0) {
            return bad("t_norm must be positive");
        }
        if self.n_x < 3 {
            return bad("n_x must be at least 3");
        }
        if self.n_t_implicit < 1 {
            return bad("n_t_implicit must be at least 1");
        }
        if self.n_save < 1 {
            return bad("n_save must be at least 1");
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(HeatError::Unstable(self.cfl));
        }
        Ok(())
    }

    /// Dimensionless diffusion group `α·t_final / L²`.
    pub fn fourier_group(&self, mat: &MaterialSample) -> f64 {
        mat.diffusivity() * self.t_final / (self.thickness * self.thickness)
    }

    /// Normalized flux gradient `Q·L / (k·T_norm)` at `x' = 1`.
    pub fn flux_gradient(&self, mat: &MaterialSample) -> f64 {
        self.flux * self.thickness / (mat.k * self.t_norm)
    }

    /// Exact spatial-mean temperature implied by the energy balance.
    pub fn mean_temperature(&self, mat: &MaterialSample, t: f64) -> f64 {
        self.t_init + self.flux * t / (mat.rho_cp * self.thickness)
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }
}

/// Thermal conductivity and volumetric heat capacity of the slab material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSample {
    /// Thermal conductivity, W/(m·K).
    pub k: f64,
    /// Thermal density ρ·c_p, J/(m³·K).
    pub rho_cp: f64,
}

impl MaterialSample {
    pub fn new(k: f64, rho_cp: f64) -> Self {
        Self { k, rho_cp }
    }

    /// The RCC composite AS4/3501-6 validation material.
    pub fn validation() -> Self {
        Self::new(0.65, 1509.0 * 1050.0)
    }

    pub fn diffusivity(&self) -> f64 {
        self.k / self.rho_cp
    }

    pub fn validate(&self) -> Result<(), HeatError> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(HeatError::InvalidMaterial(format!("k = {} must be positive", self.k)));
        }
        if !(self.rho_cp.is_finite() && self.rho_cp > 0.0) {
            return Err(HeatError::InvalidMaterial(format!(
                "rho_cp = {} must be positive",
                self.rho_cp
            )));
        }
        let alpha = self.diffusivity();
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(HeatError::InvalidMaterial("diffusivity is not finite".into()));
        }
        Ok(())
    }
}

/// Temperatures on a space-time grid, °C.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    /// Row-major `(times.len()) × x.len()` temperatures.
    temps: Vec<f64>,
    x: Vec<f64>,
    times: Vec<f64>,
    /// Grid spacing, m.
    pub dx: f64,
    /// Solver time step, s.
    pub dt: f64,
}

impl TemperatureField {
    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    /// Node positions, m.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Saved times, s.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let nx = self.n_x();
        &self.temps[n * nx..(n + 1) * nx]
    }

    pub fn at(&self, n: usize, i: usize) -> f64 {
        self.temps[n * self.n_x() + i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.temps.chunks_exact(self.n_x())
    }

    /// Temperature at `x = 0` for every saved time.
    pub fn back_trajectory(&self) -> Vec<f64> {
        self.rows().map(|r| r[0]).collect()
    }

    /// Trapezoidal spatial mean of row `n`.
    pub fn mean_temperature(&self, n: usize) -> f64 {
        trapezoid_mean(self.row(n))
    }
}

/// Temperature at the insulated face at the final saved time.
pub fn back_temperature(field: &TemperatureField) -> f64 {
    let last = field.n_rows() - 1;
    field.at(last, 0)
}

fn trapezoid_mean(row: &[f64]) -> f64 {
    let n = row.len();
    let inner: f64 = row[1..n - 1].iter().sum();
    (inner + 0.5 * (row[0] + row[n - 1])) / (n - 1) as f64
}

/// Normalized problem shared by both schemes.
struct Normalized {
    nx: usize,
    dx: f64,
    diff: f64,
    grad: f64,
    u0: f64,
}

impl Normalized {
    fn new(sc: &ThermalScenario, mat: &MaterialSample) -> Result<Self, HeatError> {
        sc.validate()?;
        mat.validate()?;
        Ok(Self {
            nx: sc.n_x,
            dx: 1.0 / (sc.n_x - 1) as f64,
            diff: sc.fourier_group(mat),
            grad: sc.flux_gradient(mat),
            u0: sc.t_init / sc.t_norm,
        })
    }

    /// Physical temperature, measured from `T_init` so the initial value maps back exactly.
    fn denormalize(&self, sc: &ThermalScenario, u: f64) -> f64 {
        sc.t_init + (u - self.u0) * sc.t_norm
    }

    /// Steps per saved interval and the normalized step for the explicit scheme.
    fn explicit_steps(&self, cfl: f64, n_save: usize) -> (usize, f64) {
        let dt_max = cfl * self.dx * self.dx / self.diff;
        let per_save = ((1.0 / n_save as f64) / dt_max).ceil().max(1.0) as usize;
        (per_save, 1.0 / (per_save * n_save) as f64)
    }

    fn explicit_step(&self, fo: f64, cur: &[f64], next: &mut [f64]) {
        let n = self.nx;
        next[0] = cur[0] + 2.0 * fo * (cur[1] - cur[0]);
        for i in 1..n - 1 {
            next[i] = cur[i] + fo * ((cur[i + 1] - cur[i]) + (cur[i - 1] - cur[i]));
        }
        next[n - 1] = cur[n - 1] + 2.0 * fo * ((cur[n - 2] - cur[n - 1]) + self.dx * self.grad);
    }
}

fn assemble(
    sc: &ThermalScenario,
    p: &Normalized,
    rows: Vec<f64>,
    n_rows: usize,
    dt_norm: f64,
) -> TemperatureField {
    let nx = sc.n_x;
    let dx = sc.thickness / (nx - 1) as f64;
    let temps = rows.into_iter().map(|u| p.denormalize(sc, u)).collect();
    TemperatureField {
        temps,
        x: (0..nx).map(|i| i as f64 * dx).collect(),
        times: (0..n_rows)
            .map(|n| sc.t_final * n as f64 / (n_rows - 1) as f64)
            .collect(),
        dx,
        dt: dt_norm * sc.t_final,
    }
}

/// Forward-Euler finite differences at the scenario's `cfl`.
///
/// The step is chosen so that an integer number of steps lands on each saved
/// time; the realized Fourier number never exceeds `cfl`.
pub fn solve_explicit(
    sc: &ThermalScenario,
    mat: &MaterialSample,
) -> Result<TemperatureField, HeatError> {
    let p = Normalized::new(sc, mat)?;
    let (per_save, dt) = p.explicit_steps(sc.cfl, sc.n_save);
    let fo = p.diff * dt / (p.dx * p.dx);

    let mut cur = vec![p.u0; p.nx];
    let mut next = vec![0.0; p.nx];
    let mut rows = Vec::with_capacity((sc.n_save + 1) * p.nx);
    rows.extend_from_slice(&cur);
    for _ in 0..sc.n_save {
        for _ in 0..per_save {
            p.explicit_step(fo, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        rows.extend_from_slice(&cur);
    }
    Ok(assemble(sc, &p, rows, sc.n_save + 1, dt))
}

/// Explicit-scheme back temperature at `t_final` without storing the field.
pub fn explicit_back_temperature(
    sc: &ThermalScenario,
    mat: &MaterialSample,
) -> Result<f64, HeatError> {
    let p = Normalized::new(sc, mat)?;
    let (per_save, dt) = p.explicit_steps(sc.cfl, sc.n_save);
    let fo = p.diff * dt / (p.dx * p.dx);
    let mut cur = vec![p.u0; p.nx];
    let mut next = vec![0.0; p.nx];
    for _ in 0..per_save * sc.n_save {
        p.explicit_step(fo, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(p.denormalize(sc, cur[0]))
}

/// Backward-Euler finite differences with a Thomas tridiagonal solve per step.
///
/// `n_t_implicit` is rounded up to a multiple of `n_save`. Each step solves for
/// the increment so that a zero-forcing constant field is preserved bit for bit.
pub fn solve_implicit(
    sc: &ThermalScenario,
    mat: &MaterialSample,
) -> Result<TemperatureField, HeatError> {
    let p = Normalized::new(sc, mat)?;
    let per_save = sc.n_t_implicit.div_ceil(sc.n_save);
    let dt = 1.0 / (per_save * sc.n_save) as f64;
    let fo = p.diff * dt / (p.dx * p.dx);
    let n = p.nx;

    // (1 + 2fo) on the diagonal, ghost nodes double the single neighbour.
    let diag = vec![1.0 + 2.0 * fo; n];
    let mut lower = vec![-fo; n];
    let mut upper = vec![-fo; n];
    lower[0] = 0.0;
    upper[0] = -2.0 * fo;
    lower[n - 1] = -2.0 * fo;
    upper[n - 1] = 0.0;
    let solver = Thomas::factor(&lower, &diag, &upper);

    let mut cur = vec![p.u0; n];
    let mut rhs = vec![0.0; n];
    let mut rows = Vec::with_capacity((sc.n_save + 1) * n);
    rows.extend_from_slice(&cur);
    for _ in 0..sc.n_save {
        for _ in 0..per_save {
            // A·(u + δ) = u + b  ⇔  A·δ = fo·Δu + b
            rhs[0] = 2.0 * fo * (cur[1] - cur[0]);
            for i in 1..n - 1 {
                rhs[i] = fo * ((cur[i + 1] - cur[i]) + (cur[i - 1] - cur[i]));
            }
            rhs[n - 1] = 2.0 * fo * ((cur[n - 2] - cur[n - 1]) + p.dx * p.grad);
            solver.solve_in_place(&mut rhs);
            for (u, d) in cur.iter_mut().zip(&rhs) {
                *u += d;
            }
        }
        rows.extend_from_slice(&cur);
    }
    Ok(assemble(sc, &p, rows, sc.n_save + 1, dt))
}

/// LU factors of a tridiagonal matrix (Thomas algorithm).
struct Thomas {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Thomas {
    fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = diag[0];
        assert!(denom[0] != 0.0, "singular tridiagonal system");
        c_prime[0] = upper[0] / denom[0];
        for i in 1..n {
            denom[i] = diag[i] - lower[i] * c_prime[i - 1];
            assert!(denom[i] != 0.0, "singular tridiagonal system");
            c_prime[i] = upper[i] / denom[i];
        }
        Self {
            lower: lower.to_vec(),
            c_prime,
            denom,
        }
    }

    fn solve_in_place(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] /= self.denom[0];
        for i in 1..n {
            d[i] = (d[i] - self.lower[i] * d[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.c_prime[i] * d[i + 1];
        }
    }
}

/// Exact series solution for the insulated/constant-flux slab, °C.
///
/// ```text
/// T = T_init + (Q·L/k)·[ α·t/L² + (3x² − L²)/(6L²)
///                        − (2/π²)·Σₙ ((−1)ⁿ/n²)·exp(−n²π²αt/L²)·cos(nπx/L) ]
/// ```
pub fn analytic_reference(
    sc: &ThermalScenario,
    mat: &MaterialSample,
    x: f64,
    t: f64,
    n_terms: usize,
) -> Result<f64, HeatError> {
    sc.validate()?;
    mat.validate()?;
    if n_terms == 0 {
        return Err(HeatError::InvalidScenario("n_terms must be at least 1".into()));
    }
    if sc.flux == 0.0 {
        return Ok(sc.t_init);
    }
    let l = sc.thickness;
    let tau = mat.diffusivity() * t / (l * l);
    let xi = x / l;
    let series: f64 = (1..=n_terms)
        .map(|n| {
            let nf = n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign / (nf * nf) * (-nf * nf * PI * PI * tau).exp() * (nf * PI * xi).cos()
        })
        .sum();
    let shape = tau + (3.0 * xi * xi - 1.0) / 6.0 - 2.0 / (PI * PI) * series;
    Ok(sc.t_init + sc.flux * l / mat.k * shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn validation(t_final: f64) -> ThermalScenario {
        ThermalScenario::default().with_t_final(t_final)
    }

    #[test]
    fn zero_flux_is_a_fixed_point() {
        let sc = ThermalScenario {
            flux: 0.0,
            ..validation(100.0)
        };
        let mat = MaterialSample::validation();
        for field in [solve_explicit(&sc, &mat).unwrap(), solve_implicit(&sc, &mat).unwrap()] {
            assert!(field.rows().flatten().all(|&t| t == 25.0));
        }
        assert_eq!(analytic_reference(&sc, &mat, 0.0, 50.0, 10).unwrap(), 25.0);
    }

    #[test]
    fn rejects_unstable_cfl() {
        let sc = ThermalScenario {
            cfl: 0.6,
            ..Default::default()
        };
        assert_eq!(
            solve_explicit(&sc, &MaterialSample::validation()),
            Err(HeatError::Unstable(0.6))
        );
    }

    #[test]
    fn rejects_bad_material() {
        let sc = ThermalScenario::default();
        assert!(solve_explicit(&sc, &MaterialSample::new(f64::NAN, 1.0e6)).is_err());
        assert!(solve_implicit(&sc, &MaterialSample::new(0.5, -1.0)).is_err());
        assert!(analytic_reference(&sc, &MaterialSample::validation(), 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn explicit_respects_requested_cfl() {
        let sc = validation(100.0);
        let mat = MaterialSample::validation();
        let f = solve_explicit(&sc, &mat).unwrap();
        let fo = mat.diffusivity() * f.dt / (f.dx * f.dx);
        assert!(fo <= sc.cfl + 1e-12);
        assert!(fo > 0.9 * sc.cfl);
    }

    #[test]
    fn fast_back_temperature_matches_field() {
        let sc = validation(100.0);
        let mat = MaterialSample::validation();
        let field = solve_explicit(&sc, &mat).unwrap();
        assert_eq!(
            explicit_back_temperature(&sc, &mat).unwrap(),
            back_temperature(&field)
        );
    }

    #[test]
    fn thomas_solves_small_system() {
        // [2 1 0; 1 2 1; 0 1 2] x = [3 4 3] → x = [1 1 1]
        let t = Thomas::factor(&[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0], &[1.0, 1.0, 0.0]);
        let mut d = vec![3.0, 4.0, 3.0];
        t.solve_in_place(&mut d);
        for v in d {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
