use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Method;
use crate::alloc::GreedyStart;
use crate::baseline::LINEAR_MAX_SWEEPS;
use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::phase_opt::DEFAULT_MAX_SWEEPS;

/// Parameter swept across the run; every value gets `trials` cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    #[default]
    None,
    /// Angular standard deviation in radians.
    Asd(Vec<f64>),
    NRis(Vec<usize>),
    TxDbm(Vec<f64>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::Asd(_) => "asd",
            Sweep::NRis(_) => "n_ris",
            Sweep::TxDbm(_) => "tx_dbm",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::None => 1,
            Sweep::Asd(v) | Sweep::TxDbm(v) => v.len(),
            Sweep::NRis(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Name and value written to the CSV for sweep index `i`.
    pub fn label(&self, i: usize) -> (&'static str, f64) {
        let v = match self {
            Sweep::None => 0.0,
            Sweep::Asd(v) | Sweep::TxDbm(v) => v[i],
            Sweep::NRis(v) => v[i] as f64,
        };
        (self.name(), v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub greedy_start: GreedyStart,
    /// Element-wise sweeps for the THP phase objective.
    pub max_sweeps: usize,
    /// Element-wise sweeps on the linear ZF sum rate.
    pub linear_max_sweeps: usize,
    /// Keep only this many candidates per greedy step, ranked by the
    /// two-norm relaxation.
    pub relaxation_prune: Option<usize>,
    /// Record wall time; `false` writes 0 so output files are reproducible.
    pub timing: bool,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            greedy_start: GreedyStart::BestSingle,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            linear_max_sweeps: LINEAR_MAX_SWEEPS,
            relaxation_prune: None,
            timing: true,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub trials: usize,
    pub methods: Vec<Method>,
    pub sweep: Sweep,
    pub scenario: ScenarioConfig,
    pub options: RunOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    trials: usize,
    methods: Vec<Method>,
    #[serde(default)]
    sweep: Sweep,
    scenario: Option<toml::Value>,
    #[serde(default)]
    options: RunOptions,
}

/// `scenario` is a preset name, or a table whose optional `preset` key picks
/// the base that the remaining keys override.
fn resolve_scenario(v: Option<toml::Value>) -> Result<ScenarioConfig> {
    let unknown = |name: &str| {
        Error::config(
            "scenario.preset",
            format!("unknown preset `{name}`; expected one of {:?}", ScenarioConfig::PRESETS),
        )
    };
    match v {
        None => Ok(ScenarioConfig::default()),
        Some(toml::Value::String(name)) => ScenarioConfig::preset(&name).ok_or_else(|| unknown(&name)),
        Some(toml::Value::Table(mut t)) => {
            let base = match t.remove("preset") {
                None => ScenarioConfig::default(),
                Some(toml::Value::String(name)) => ScenarioConfig::preset(&name).ok_or_else(|| unknown(&name))?,
                Some(_) => return Err(Error::config("scenario.preset", "must be a string")),
            };
            let mut merged = toml::Table::try_from(&base).map_err(|e| Error::config("scenario", e.to_string()))?;
            for (k, v) in t {
                merged.insert(k, v);
            }
            merged
                .try_into::<ScenarioConfig>()
                .map_err(|e| Error::config("scenario", e.message().to_string()))
        }
        Some(_) => Err(Error::config("scenario", "must be a preset name or a table")),
    }
}

impl RunConfig {
    pub fn new(scenario: ScenarioConfig, trials: usize, methods: Vec<Method>) -> Self {
        Self {
            trials,
            methods,
            sweep: Sweep::None,
            scenario,
            options: RunOptions::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: RawRunConfig = toml::from_str(s).map_err(|e| Error::Format {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        let c = Self {
            trials: raw.trials,
            methods: raw.methods,
            sweep: raw.sweep,
            scenario: resolve_scenario(raw.scenario)?,
            options: raw.options,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("serializing config: {e}")))
    }

    /// Scenario of every sweep value.
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        let base = &self.scenario;
        match &self.sweep {
            Sweep::None => vec![base.clone()],
            Sweep::Asd(v) => v.iter().map(|&asd| ScenarioConfig { asd, ..base.clone() }).collect(),
            Sweep::NRis(v) => v.iter().map(|&n_ris| ScenarioConfig { n_ris, ..base.clone() }).collect(),
            Sweep::TxDbm(v) => v.iter().map(|&tx_dbm| ScenarioConfig { tx_dbm, ..base.clone() }).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "must list at least one method"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::config(format!("methods[{i}]"), format!("`{m}` listed twice")));
            }
        }
        let field = format!("sweep.{}", self.sweep.name());
        if self.sweep.is_empty() {
            return Err(Error::config(field, "sweep list must be nonempty"));
        }
        self.scenario.validate_at("scenario")?;
        for (i, s) in self.scenarios().iter().enumerate() {
            s.validate_at("scenario")
                .map_err(|e| Error::config(format!("{field}[{i}]"), e.to_string()))?;
        }
        if self.options.max_sweeps == 0 {
            return Err(Error::config("options.max_sweeps", "must be at least 1"));
        }
        if self.options.linear_max_sweeps == 0 {
            return Err(Error::config("options.linear_max_sweeps", "must be at least 1"));
        }
        if self.options.relaxation_prune == Some(0) {
            return Err(Error::config("options.relaxation_prune", "must be at least 1"));
        }
        if self.options.threads == Some(0) {
            return Err(Error::config("options.threads", "must be at least 1"));
        }
        Ok(())
    }
}
