//! Versioned text format for surrogate weights.
//!
//! ```text
//! version 1
//! layer_sizes 4 30 30 30 1
//! k_range 0.1 1.3
//! rho_cp_range 800000.0 2400000.0
//! T_norm 100.0
//! t_final 300.0
//! L 0.007
//! Q 10000.0
//! T_init 25.0
//! layer 0 weights
//! <out rows of in values>
//! layer 0 biases
//! <out values>
//! …
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit exact.

use super::{ParamRange, SurrogateModel};
use crate::autodiff::{Activation, MlpNetwork};
use crate::heatsim::ThermalScenario;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported weights version {found} (expected {WEIGHTS_VERSION})")]
    VersionMismatch { found: String },
    #[error("missing section `{0}`")]
    MissingSection(String),
    #[error("malformed line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:?}").unwrap();
    }
    s
}

pub fn to_string(model: &SurrogateModel) -> String {
    let sc = &model.scenario;
    let r = &model.param_range;
    let net = &model.net;
    let mut s = String::new();
    let sizes: Vec<String> = net.layer_sizes().iter().map(usize::to_string).collect();
    writeln!(s, "version {WEIGHTS_VERSION}").unwrap();
    writeln!(s, "layer_sizes {}", sizes.join(" ")).unwrap();
    writeln!(s, "k_range {}", join(&[r.k.0, r.k.1])).unwrap();
    writeln!(s, "rho_cp_range {}", join(&[r.rho_cp.0, r.rho_cp.1])).unwrap();
    writeln!(s, "T_norm {:?}", sc.t_norm).unwrap();
    writeln!(s, "t_final {:?}", sc.t_final).unwrap();
    writeln!(s, "L {:?}", sc.thickness).unwrap();
    writeln!(s, "Q {:?}", sc.flux).unwrap();
    writeln!(s, "T_init {:?}", sc.t_init).unwrap();
    for l in 0..net.n_layers() {
        let n_in = net.layer_sizes()[l];
        writeln!(s, "layer {l} weights").unwrap();
        for row in net.weights(l).chunks(n_in) {
            writeln!(s, "{}", join(row)).unwrap();
        }
        writeln!(s, "layer {l} biases").unwrap();
        writeln!(s, "{}", join(net.biases(l))).unwrap();
    }
    s
}

pub fn save_weights(model: &SurrogateModel, path: impl AsRef<Path>) -> Result<(), WeightsError> {
    std::fs::write(path, to_string(model))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<SurrogateModel, WeightsError> {
    from_str(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, section: &str) -> Result<(usize, &'a str), WeightsError> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Ok((i + 1, line));
            }
        }
        Err(WeightsError::MissingSection(section.to_string()))
    }

    /// Values following `key` on its own line.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), WeightsError> {
        let (n, line) = self.next_line(key)?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(WeightsError::Malformed {
                line: n,
                msg: format!("expected `{key}`"),
            });
        }
        Ok((n, parts.collect()))
    }

    fn floats(&mut self, key: &str, count: usize) -> Result<Vec<f64>, WeightsError> {
        let (n, parts) = self.keyed(key)?;
        let v = parse_floats(n, &parts)?;
        if v.len() != count {
            return Err(WeightsError::Malformed {
                line: n,
                msg: format!("`{key}` needs {count} values, found {}", v.len()),
            });
        }
        Ok(v)
    }

    fn row(&mut self, section: &str, count: usize) -> Result<Vec<f64>, WeightsError> {
        let (n, line) = self.next_line(section)?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let v = parse_floats(n, &parts)?;
        if v.len() != count {
            return Err(WeightsError::Dimension(format!(
                "line {n} in `{section}` has {} values, expected {count}",
                v.len()
            )));
        }
        Ok(v)
    }

    fn header(&mut self, expected: &str) -> Result<(), WeightsError> {
        let (n, line) = self.next_line(expected)?;
        if line.split_whitespace().collect::<Vec<_>>().join(" ") != expected {
            return Err(WeightsError::Malformed {
                line: n,
                msg: format!("expected `{expected}`, found `{line}`"),
            });
        }
        Ok(())
    }
}

fn parse_floats(line: usize, parts: &[&str]) -> Result<Vec<f64>, WeightsError> {
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>().map_err(|_| WeightsError::Malformed {
                line,
                msg: format!("`{p}` is not a number"),
            })
        })
        .collect()
}

pub fn from_str(text: &str) -> Result<SurrogateModel, WeightsError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, v) = lines.keyed("version")?;
    if v != [WEIGHTS_VERSION.to_string().as_str()] {
        return Err(WeightsError::VersionMismatch { found: v.join(" ") });
    }
    let (n, sizes) = lines.keyed("layer_sizes")?;
    let sizes = sizes
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| WeightsError::Malformed {
            line: n,
            msg: "layer sizes must be integers".into(),
        })?;
    let k = lines.floats("k_range", 2)?;
    let c = lines.floats("rho_cp_range", 2)?;
    let t_norm = lines.floats("T_norm", 1)?[0];
    let t_final = lines.floats("t_final", 1)?[0];
    let thickness = lines.floats("L", 1)?[0];
    let flux = lines.floats("Q", 1)?[0];
    let t_init = lines.floats("T_init", 1)?[0];

    if sizes.len() < 2 {
        return Err(WeightsError::Dimension("need at least two layer sizes".into()));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let section = format!("layer {l} weights");
        lines.header(&section)?;
        let mut w = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_out {
            w.extend(lines.row(&section, n_in)?);
        }
        weights.push(w);
        let section = format!("layer {l} biases");
        lines.header(&section)?;
        biases.push(lines.row(&section, n_out)?);
    }

    let net = MlpNetwork::from_parts(sizes, weights, biases, Activation::Softplus)
        .map_err(|e| WeightsError::Dimension(e.to_string()))?;
    let scenario = ThermalScenario {
        flux,
        thickness,
        t_final,
        t_init,
        t_norm,
        ..ThermalScenario::default()
    };
    let range = ParamRange {
        k: (k[0], k[1]),
        rho_cp: (c[0], c[1]),
    };
    SurrogateModel::new(net, scenario, range).map_err(|e| WeightsError::Dimension(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn model() -> SurrogateModel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = MlpNetwork::xavier(&[4, 5, 1], Activation::Softplus, &mut rng).unwrap();
        SurrogateModel::new(net, ThermalScenario::default(), ParamRange::default()).unwrap()
    }

    #[test]
    fn string_round_trip_is_exact() {
        let m = model();
        let back = from_str(&to_string(&m)).unwrap();
        assert_eq!(back.net, m.net);
        assert_eq!(back.param_range, m.param_range);
        assert_eq!(to_string(&back), to_string(&m));
    }

    #[test]
    fn truncated_file_names_missing_section() {
        let text = to_string(&model());
        let cut: String = text.lines().take(11).map(|l| format!("{l}\n")).collect();
        match from_str(&cut) {
            Err(WeightsError::MissingSection(s)) => assert_eq!(s, "layer 0 weights"),
            other => panic!("unexpected {other:?}"),
        }
        let header_only: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        match from_str(&header_only) {
            Err(WeightsError::MissingSection(s)) => assert_eq!(s, "T_norm"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let text = to_string(&model()).replacen("version 1", "version 7", 1);
        assert!(matches!(from_str(&text), Err(WeightsError::VersionMismatch { .. })));
    }

    #[test]
    fn wrong_row_width_is_a_dimension_error() {
        let text = to_string(&model()).replacen("layer_sizes 4 5 1", "layer_sizes 5 5 1", 1);
        assert!(matches!(from_str(&text), Err(WeightsError::Dimension(_))));
    }
}
