//! Probabilistic design of a thermal protection system layer.
//!
//! * [`heatsim`]: explicit and implicit finite-difference solvers for the
//!   insulated/heated slab, plus an exact series solution.
//! * [`autodiff`]: exact input and parameter derivatives for small MLPs.
//! * [`pinn`]: the physics-informed surrogate, its losses, training and
//!   weight files.
//! * [`reliability`]: reliability targets, priors and the posterior over
//!   material parameters.
//! * [`samplers`]: Metropolis–Hastings and tempered Sequential Monte Carlo.
//! * [`config`] and [`commands`]: the pipeline driven by the `tps-reliab`
//!   binary.

pub mod autodiff;
pub mod commands;
pub mod config;
pub mod heatsim;
pub mod pinn;
pub mod reliability;
pub mod samplers;
