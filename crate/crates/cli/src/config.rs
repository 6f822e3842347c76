//! Experiment configuration: a TOML file with one section per module plus a
//! few top-level run controls. Unknown keys are hard errors so a typo in a
//! physics parameter cannot silently fall back to a default.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Measure,
    Epr,
    Chsh,
    CosmoSpectrum,
    AstroConstants,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Kind::Measure => "measure",
            Kind::Epr => "epr",
            Kind::Chsh => "chsh",
            Kind::CosmoSpectrum => "cosmo-spectrum",
            Kind::AstroConstants => "astro-constants",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApparatusBlock {
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub b_field: [f64; 3],
    pub omega: f64,
    pub k_t: f64,
    pub b0: f64,
    pub c0: f64,
    pub g: f64,
}

impl Default for ApparatusBlock {
    fn default() -> Self {
        let p = qmeter_core::measurement::ApparatusParams::default();
        Self {
            gamma: p.gamma,
            lambda: p.lambda,
            mu: p.mu,
            epsilon: p.epsilon,
            b_field: p.b_field,
            omega: p.omega,
            k_t: p.k_t,
            b0: p.b0,
            c0: p.c0,
            g: p.g,
        }
    }
}

impl ApparatusBlock {
    pub fn to_params(&self) -> qmeter_core::measurement::ApparatusParams {
        qmeter_core::measurement::ApparatusParams {
            gamma: self.gamma,
            lambda: self.lambda,
            mu: self.mu,
            epsilon: self.epsilon,
            b_field: self.b_field,
            omega: self.omega,
            k_t: self.k_t,
            b0: self.b0,
            c0: self.c0,
            g: self.g,
        }
    }
}

/// Initial spin direction and integration window for single-meter runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureBlock {
    /// Initial spin polar angle (radians) on the Bloch sphere.
    pub polar: f64,
    pub azimuth: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for MeasureBlock {
    fn default() -> Self {
        Self {
            polar: 0.0,
            azimuth: 0.0,
            t_end: 10.0,
            dt: 0.005,
        }
    }
}

/// Detector angles (radians, x–z plane) and integration window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EprBlock {
    pub angle1: f64,
    pub angle2: f64,
    /// Overrides the per-gamma default window when positive.
    pub t_end: f64,
    pub dt: f64,
}

impl Default for EprBlock {
    fn default() -> Self {
        Self {
            angle1: 0.0,
            angle2: 0.0,
            t_end: 0.0,
            dt: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CosmoBlock {
    pub hubble: f64,
    pub eta_start: f64,
    pub eta_end: f64,
    pub lambda: f64,
    pub phi0: f64,
    pub delta_t: f64,
    pub n_steps: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
}

impl Default for CosmoBlock {
    fn default() -> Self {
        Self {
            hubble: 1.0,
            eta_start: -20.0,
            eta_end: -0.05,
            lambda: 1.0,
            phi0: 1.0,
            delta_t: 1.0,
            n_steps: 200,
            k_min: 0.01,
            k_max: 1.0,
            n_k: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub kind: Option<Kind>,
    pub master_seed: u64,
    pub n: usize,
    /// 0 means "let the runtime pick".
    pub workers: usize,
    pub apparatus: ApparatusBlock,
    pub measure: MeasureBlock,
    pub epr: EprBlock,
    pub cosmo: CosmoBlock,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            kind: None,
            master_seed: 0,
            n: 1000,
            workers: 0,
            apparatus: ApparatusBlock::default(),
            measure: MeasureBlock::default(),
            epr: EprBlock::default(),
            cosmo: CosmoBlock::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = Config::default();
        cfg.kind = Some(Kind::Chsh);
        cfg.master_seed = 17;
        cfg.apparatus.gamma = 4.0;
        cfg.apparatus.epsilon = 1.0;
        let reparsed = Config::parse(&cfg.emit()).unwrap();
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = Config::parse("gama = 2.0\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        let err = Config::parse("[apparatus]\ngamm = 2.0\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = Config::parse("n = 42\n[apparatus]\ngamma = 2.5\n").unwrap();
        assert_eq!(cfg.n, 42);
        assert_eq!(cfg.apparatus.gamma, 2.5);
        assert_eq!(cfg.apparatus.lambda, ApparatusBlock::default().lambda);
    }
}
