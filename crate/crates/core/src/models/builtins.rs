//! Named parameter sets. Total decay rates are split equally between the
//! ground levels.

use std::collections::BTreeMap;

use super::{Continuum, ExcitedLevel, Level, ModelSpec, RateConvention, SCHEMA_VERSION};
use crate::{Error, Result};

/// Names accepted by [`builtin`].
pub const NAMES: [&str; 7] = [
    "single_level",
    "fano_fig3",
    "lambda_fig5",
    "lambda_fig6",
    "lambda_fig7",
    "lambda_fig8",
    "lambda_fig9",
];

fn ground(energies: &[f64]) -> Vec<Level> {
    energies
        .iter()
        .enumerate()
        .map(|(i, &e)| Level {
            label: format!("g{}", i + 1),
            energy: e,
        })
        .collect()
}

fn spec(name: &str, ground_levels: Vec<Level>) -> ModelSpec {
    ModelSpec {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        ground_levels,
        ground_couplings: Vec::new(),
        excited_levels: Vec::new(),
        continua: Vec::new(),
        rate_convention: RateConvention::GoldenRule,
    }
}

/// One ground level and one continuum with injection rate 1 and return
/// rate `beta`.
pub fn single_level(beta: f64) -> ModelSpec {
    let mut s = spec("single_level", ground(&[0.0]));
    s.continua.push(Continuum {
        label: "c1".into(),
        density: 1.0,
        couplings: vec![(1.0 / (2.0 * std::f64::consts::PI)).sqrt().into()],
        decay_rates: vec![beta],
    });
    s
}

/// Two ground levels and one continuum of unit density.
pub fn fano(e1: f64, e2: f64, v1: f64, v2: f64, gamma: f64) -> ModelSpec {
    let mut s = spec("fano", ground(&[e1, e2]));
    s.continua.push(Continuum {
        label: "c1".into(),
        density: 1.0,
        couplings: vec![v1.into(), v2.into()],
        decay_rates: vec![gamma / 2.0, gamma / 2.0],
    });
    s
}

pub fn fano_fig3(gamma: f64) -> ModelSpec {
    let mut s = fano(0.0, 0.9, 1.0, 0.2, gamma);
    s.name = "fano_fig3".into();
    s
}

/// Two ground levels and one excited level; `pumped` adds ground to
/// excited rates equal to the decay rates.
pub fn lambda(e1: f64, e2: f64, e3: f64, v1: f64, v2: f64, gamma: f64, pumped: bool) -> ModelSpec {
    let mut s = spec("lambda", ground(&[e1, e2]));
    let rates = vec![gamma / 2.0, gamma / 2.0];
    s.excited_levels.push(ExcitedLevel {
        label: "e1".into(),
        energy: e3,
        couplings: vec![v1.into(), v2.into()],
        decay_rates: rates.clone(),
        pump_rates: if pumped { rates } else { Vec::new() },
    });
    s
}

fn named(mut s: ModelSpec, name: &str) -> ModelSpec {
    s.name = name.into();
    s
}

pub fn lambda_fig5(gamma: f64) -> ModelSpec {
    named(lambda(7.0, 9.0, 6.0, 1.0, 0.7, gamma, false), "lambda_fig5")
}

pub fn lambda_fig6(gamma: f64) -> ModelSpec {
    named(lambda(7.0, 9.0, 6.0, 1.0, 0.7, gamma, true), "lambda_fig6")
}

pub fn lambda_fig7(gamma: f64) -> ModelSpec {
    named(lambda(0.5, -0.1, 0.01, 0.2, 0.3, gamma, false), "lambda_fig7")
}

/// `lambda_fig7` couplings with degenerate ground levels, which admits a dark state.
pub fn lambda_fig8(gamma: f64) -> ModelSpec {
    named(lambda(0.5, 0.5, 0.01, 0.2, 0.3, gamma, false), "lambda_fig8")
}

/// `E1` is the detuning of `g1`; `g2` is resonant with the excited level.
pub fn lambda_fig9(detuning: f64) -> ModelSpec {
    named(lambda(detuning, 0.0, 0.0, 1.7, 1.0, 2.0, false), "lambda_fig9")
}

fn take(params: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

/// Builds a named model. Recognized parameters: `beta` (single_level),
/// `gamma` (fano and lambda sets), `detuning` (lambda_fig9). Unused
/// parameters are an error.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let mut p = params.clone();
    let spec = match name {
        "single_level" => single_level(take(&mut p, "beta", 1.0)),
        "fano_fig3" => fano_fig3(take(&mut p, "gamma", 10.0)),
        "lambda_fig5" => lambda_fig5(take(&mut p, "gamma", 10.0)),
        "lambda_fig6" => lambda_fig6(take(&mut p, "gamma", 10.0)),
        "lambda_fig7" => lambda_fig7(take(&mut p, "gamma", 1.0)),
        "lambda_fig8" => lambda_fig8(take(&mut p, "gamma", 1.0)),
        "lambda_fig9" => lambda_fig9(take(&mut p, "detuning", 0.0)),
        _ => {
            return Err(Error::InvalidModel(format!(
                "unknown builtin model '{name}'; expected one of {}",
                NAMES.join(", ")
            )))
        }
    };
    if let Some(k) = p.keys().next() {
        return Err(Error::InvalidArgument(format!("parameter '{k}' does not apply to builtin '{name}'")));
    }
    spec.validate()?;
    Ok(spec)
}
