use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use missiles_core::costarica::{StehfestScheme, DEFAULT_STEHFEST_TERMS};
use missiles_core::{Execution, ModelId, TimeGrid};
use serde::Deserialize;

use crate::error::CliError;

/// Default JFM tolerance.
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Missiles,
    NiJacobi,
    IfosmondiJfm,
    Monolithic,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::NiJacobi,
        Method::Missiles,
        Method::IfosmondiJfm,
        Method::Monolithic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Missiles => "missiles",
            Method::NiJacobi => "ni-jacobi",
            Method::IfosmondiJfm => "ifosmondi-jfm",
            Method::Monolithic => "monolithic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected missiles, ni-jacobi, ifosmondi-jfm or monolithic)"))
    }
}

/// One co-simulation or reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelId,
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    /// JFM convergence threshold; ignored by the other methods.
    pub epsilon: f64,
    pub stehfest_terms: usize,
    pub output_path: Option<PathBuf>,
    /// Where monolithic references are cached. `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    pub execution: Execution,
}

impl RunConfig {
    /// Defaults: the model's end time, `ε = 1e-5`, 12 Stehfest terms,
    /// sequential scheduling, no output file and no cache.
    pub fn new(model: ModelId, method: Method, dt: f64) -> Self {
        Self {
            model,
            method,
            dt,
            t_end: model.build().t_end,
            epsilon: DEFAULT_EPSILON,
            stehfest_terms: DEFAULT_STEHFEST_TERMS,
            output_path: None,
            cache_dir: None,
            execution: Execution::Sequential,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(0.0, self.t_end, self.dt).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    pub fn stehfest(&self) -> Result<StehfestScheme, CliError> {
        StehfestScheme::new(self.stehfest_terms).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CliError::ConfigInvalid(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CliError::ConfigInvalid(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.method == Method::IfosmondiJfm && !(self.epsilon > 0.0 && self.epsilon.is_finite())
        {
            return Err(CliError::ConfigInvalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        self.grid()?;
        self.stehfest()?;
        Ok(())
    }
}

/// Optional key-value configuration file (TOML). Command-line flags take
/// precedence over every key.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub method: Option<String>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub epsilon: Option<f64>,
    pub stehfest_terms: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub parallel: Option<bool>,
    /// `compare` only.
    pub dts: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub epsilons: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
    }
}

pub fn parse_model(s: &str) -> Result<ModelId, CliError> {
    s.parse().map_err(CliError::ConfigInvalid)
}

pub fn parse_method(s: &str) -> Result<Method, CliError> {
    s.parse().map_err(CliError::ConfigInvalid)
}
