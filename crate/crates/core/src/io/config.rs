//! Strict TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{DetectOptions, IntegrateOptions, Mode};
use crate::error::{Error, Result};
use crate::geometry::{Domain, TraceOptions};
use crate::model::ModelSpec;
use crate::policy::{FiscalRamp, Instrument, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateOptions {
    pub grid_n: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { grid_n: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub mode: Mode,
    pub y0: f64,
    /// Starting rate; defaults to the lowest LM root at `y0`. In reduced
    /// mode it selects the stable arc to start on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// Horizon in fast time.
    pub t_end: f64,
    pub solver: IntegrateOptions,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            mode: Mode::Full,
            y0: 1.0,
            r0: None,
            t_end: 1000.0,
            solver: IntegrateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizeOptions {
    pub mode: Mode,
    pub instrument: Instrument,
    pub margin: f64,
    /// Income of the fold to guard; defaults to the first fold where the
    /// rate jumps up.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold_y: Option<f64>,
    pub ramp: FiscalRamp,
}

impl Default for StabilizeOptions {
    fn default() -> Self {
        StabilizeOptions {
            mode: Mode::Reduced,
            instrument: Instrument::Inflation,
            margin: 0.05,
            fold_y: None,
            ramp: FiscalRamp {
                y_start: 3.0,
                y_end: 5.0,
                duration: 2000.0,
                settle: 500.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown format `{other}` (expected csv, json or svg)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            dir: "out".into(),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inline economy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Economy read from the `[model]` table of another file, relative to
    /// this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub isocline: TraceOptions,
    #[serde(default)]
    pub validate: ValidateOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub detect: DetectOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub stabilize: StabilizeOptions,
    #[serde(default)]
    pub output: OutputOptions,
}

#[derive(Deserialize)]
struct ModelOnly {
    model: ModelSpec,
}

impl RunConfig {
    /// Parse TOML text; `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::Config {
                path: origin.to_string(),
                message: match locate(text, &field) {
                    Some((line, col)) => format!("line {line}, column {col}: `{field}` {reason}"),
                    None => format!("`{field}` {reason}"),
                },
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Structural checks on everything except an external model file.
    pub fn validate(&self) -> Result<()> {
        match (&self.model, &self.model_path) {
            (Some(_), Some(_)) => {
                return Err(Error::param("model_path", "give either [model] or model_path, not both"))
            }
            (None, None) => return Err(Error::param("model", "missing [model] table or model_path")),
            _ => {}
        }
        if let Some(m) = &self.model {
            m.validate().map_err(prefix("model."))?;
        }
        self.domain.validate()?;
        self.isocline.validate()?;
        if self.validate.grid_n < 100 {
            return Err(Error::param("validate.grid_n", "must be at least 100"));
        }
        if !(self.simulate.y0 >= 0.0) {
            return Err(Error::param("simulate.y0", "must be non-negative"));
        }
        if !(self.simulate.t_end >= 0.0) {
            return Err(Error::param("simulate.t_end", "must be non-negative"));
        }
        self.simulate.solver.validate()?;
        self.detect.validate()?;
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        if !(0.0..1.0).contains(&self.stabilize.margin) {
            return Err(Error::param("stabilize.margin", "must lie in [0, 1)"));
        }
        self.stabilize.ramp.validate()?;
        if self.output.formats.is_empty() {
            return Err(Error::param("output.formats", "must name at least one format"));
        }
        Ok(())
    }

    /// The economy, loading `model_path` relative to `base_dir` if needed.
    pub fn resolve_model(&self, base_dir: &Path) -> Result<ModelSpec> {
        if let Some(m) = &self.model {
            return Ok(m.clone());
        }
        let rel = self.model_path.as_deref().unwrap_or_default();
        let path = base_dir.join(rel);
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let file: ModelOnly = toml::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        file.model.validate().map_err(prefix("model."))?;
        Ok(file.model)
    }
}

fn prefix(p: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{p}{field}"),
            reason,
        },
        other => other,
    }
}

/// 1-based line and column of the key named by the last segment of a
/// dotted field path.
fn locate(text: &str, field: &str) -> Option<(usize, usize)> {
    let key = field.rsplit('.').next()?;
    let key = key.split('[').next()?;
    text.lines().enumerate().find_map(|(n, line)| {
        let trimmed = line.trim_start();
        let rest = trimmed.strip_prefix(key)?;
        rest.trim_start()
            .starts_with('=')
            .then(|| (n + 1, line.len() - trimmed.len() + 1))
    })
}

/// Read and parse a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })?;
    RunConfig::from_toml(&text, &path.display().to_string())
}
