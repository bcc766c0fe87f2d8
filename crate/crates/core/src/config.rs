//! Sectioned TOML experiment configuration with strict keys.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::dichotomy::ClassifierSettings;
use crate::error::{LabError, Result};
use crate::model::{InitialData, ModelParams};
use crate::solver::{GridSpec, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Thresholds,
    Phaseplane,
    Wave,
    SweepMu,
    Speed,
    Sweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Simulate,
        ExperimentKind::Thresholds,
        ExperimentKind::Phaseplane,
        ExperimentKind::Wave,
        ExperimentKind::SweepMu,
        ExperimentKind::Speed,
        ExperimentKind::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Thresholds => "thresholds",
            ExperimentKind::Phaseplane => "phaseplane",
            ExperimentKind::Wave => "wave",
            ExperimentKind::SweepMu => "sweep-mu",
            ExperimentKind::Speed => "speed",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::config("run.kind", format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitFamily {
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSettings {
    pub family: InitFamily,
    pub amp_u: f64,
    pub amp_v: f64,
    pub n_samples: usize,
}

impl Default for InitSettings {
    fn default() -> Self {
        InitSettings {
            family: InitFamily::Cosine,
            amp_u: 0.5,
            amp_v: 0.5,
            n_samples: 801,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub dt_safety: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_interval: Option<f64>,
    pub snapshot_times: Vec<f64>,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            n: 200,
            dt: 0.01,
            t_end: 200.0,
            dt_safety: 0.5,
            record_interval: None,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub kind: ExperimentKind,
    pub out_dir: String,
    pub seed: u64,
    /// Margin δ of the decaying upper solution.
    pub delta: f64,
    /// Bisection steps for sweep-mu.
    pub iters: usize,
    /// Number of random parameter sets for sweep.
    pub sweep_count: usize,
    /// phaseplane rows use η = η*·2^{−k}, k = 1..=eta_points.
    pub eta_points: usize,
    /// wave: s = wave_speed_factor·speed_upper.
    pub wave_speed_factor: f64,
    /// wave: the finite wave starts with slope eta_fraction·η*.
    pub eta_fraction: f64,
    /// wave: speed of the finite wave.
    pub finite_wave_speed: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            kind: ExperimentKind::Simulate,
            out_dir: "out".into(),
            seed: 0,
            delta: 0.1,
            iters: 8,
            sweep_count: 50,
            eta_points: 12,
            wave_speed_factor: 1.1,
            eta_fraction: 0.5,
            finite_wave_speed: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub init: InitSettings,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub classify: ClassifierSettings,
    #[serde(default)]
    pub run: RunSettings,
}

/// A validated configuration plus the keys that were filled from defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub defaulted: Vec<String>,
}

/// Pulls the first backquoted name out of a deserializer message.
fn offending_key(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let raw: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| LabError::config(offending_key(e.message()).unwrap_or_default(), e.message().trim()))?;
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        LabError::config(offending_key(&msg).unwrap_or_default(), msg)
    })?;
    config.validate()?;
    let resolved = toml::Table::try_from(&config).map_err(|e| LabError::Internal(e.to_string()))?;
    let mut defaulted = Vec::new();
    for (section, value) in &resolved {
        let Some(table) = value.as_table() else { continue };
        let given = raw.get(section).and_then(|v| v.as_table());
        for key in table.keys() {
            if given.is_none_or(|g| !g.contains_key(key)) {
                defaulted.push(format!("{section}.{key}"));
            }
        }
    }
    Ok(ParsedConfig { config, defaulted })
}

/// Serializes a configuration so that [`parse_config`] reproduces it exactly.
pub fn emit_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| LabError::Internal(e.to_string()))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let i = &self.init;
        for (key, a) in [("init.amp_u", i.amp_u), ("init.amp_v", i.amp_v)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(LabError::config(key, format!("must be >= 0, got {a}")));
            }
        }
        if i.amp_u == 0.0 && i.amp_v == 0.0 {
            return Err(LabError::config("init.amp_u", "at least one amplitude must be positive"));
        }
        if i.n_samples < 3 {
            return Err(LabError::config("init.n_samples", format!("must be >= 3, got {}", i.n_samples)));
        }
        self.grid_spec().validate()?;
        if let Some(r) = self.grid.record_interval {
            if !(r > 0.0 && r.is_finite()) {
                return Err(LabError::config("grid.record_interval", format!("must be > 0, got {r}")));
            }
        }
        if let Some(t) = self.grid.snapshot_times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(LabError::config("grid.snapshot_times", format!("times must be >= 0, got {t}")));
        }
        self.classify.validate()?;
        let r = &self.run;
        if !(r.delta > 0.0 && r.delta.is_finite()) {
            return Err(LabError::config("run.delta", format!("must be > 0, got {}", r.delta)));
        }
        if r.iters < 4 {
            return Err(LabError::config("run.iters", format!("must be >= 4, got {}", r.iters)));
        }
        if r.sweep_count == 0 {
            return Err(LabError::config("run.sweep_count", "must be >= 1"));
        }
        if r.eta_points == 0 || r.eta_points > 40 {
            return Err(LabError::config("run.eta_points", format!("must lie in 1..=40, got {}", r.eta_points)));
        }
        if !(r.wave_speed_factor > 1.0 && r.wave_speed_factor.is_finite()) {
            return Err(LabError::config("run.wave_speed_factor", format!("must be > 1, got {}", r.wave_speed_factor)));
        }
        if !(r.eta_fraction > 0.0 && r.eta_fraction < 1.0) {
            return Err(LabError::config("run.eta_fraction", format!("must lie in (0, 1), got {}", r.eta_fraction)));
        }
        if !(r.finite_wave_speed >= 0.0 && r.finite_wave_speed.is_finite()) {
            return Err(LabError::config("run.finite_wave_speed", format!("must be >= 0, got {}", r.finite_wave_speed)));
        }
        if r.out_dir.is_empty() {
            return Err(LabError::config("run.out_dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            n: self.grid.n,
            dt: self.grid.dt,
            t_end: self.grid.t_end,
            dt_safety: self.grid.dt_safety,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            record_interval: self.grid.record_interval,
            snapshot_times: self.grid.snapshot_times.clone(),
        }
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        match self.init.family {
            InitFamily::Cosine => InitialData::cosine(self.model.h0, self.init.amp_u, self.init.amp_v, self.init.n_samples),
        }
    }
}
