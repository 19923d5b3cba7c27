//! Trajectory tables, structured result documents and provenance records.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{CycleSummary, JumpEvent, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{Equilibrium, LmIsocline};
use crate::io::config::{Format, RunConfig};
use crate::policy::{ControllerReport, LogEntry, ProbeReport, StabilizationPlan};
use crate::validate::ValidationReport;

pub const SCHEMA_VERSION: &str = "1";
pub const TRAJECTORY_HEADER: &str = "t,Y,R,regime";

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const RESULT_FILE: &str = "result.json";
pub const PORTRAIT_FILE: &str = "portrait.svg";
pub const PROVENANCE_FILE: &str = "provenance.json";
const LOCK_FILE: &str = ".islm.lock";

/// Everything a command computed, minus the trajectory samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ResultDoc {
    pub schema_version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isocline: Option<LmIsocline>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibria: Option<Vec<Equilibrium>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<JumpEvent>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<Vec<LogEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<StabilizationPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeReport>,
}

impl ResultDoc {
    pub fn new(command: &str) -> Self {
        ResultDoc {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            ..ResultDoc::default()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config {
            path: RESULT_FILE.into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub schema_version: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The configuration as parsed, defaults included.
    pub config: String,
    /// Random seeds; nothing is random yet.
    pub seeds: Option<Vec<u64>>,
    pub created_unix: u64,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Provenance {
            schema_version: SCHEMA_VERSION.into(),
            tool: "islm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.to_toml(),
            seeds: None,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(32 * (traj.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&format!("{},{},{},{}\n", s.t, s.y, s.r, s.regime.as_str()));
    }
    out
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<DirLock> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(LOCK_FILE);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|source| Error::Io {
                path: path.clone(),
                source: if source.kind() == std::io::ErrorKind::AlreadyExists {
                    std::io::Error::new(source.kind(), "output directory is in use by another run")
                } else {
                    source
                },
            })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(DirLock { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write(path: PathBuf, data: &str) -> Result<PathBuf> {
    let mut f = File::create(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    f.write_all(data.as_bytes()).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Write the requested artifacts plus a provenance record into `dir`.
pub fn emit_outputs(
    dir: &Path,
    formats: &[Format],
    doc: &ResultDoc,
    trajectory: Option<&Trajectory>,
    svg: Option<&str>,
    provenance: &Provenance,
) -> Result<Vec<PathBuf>> {
    let _lock = DirLock::acquire(dir)?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        if let Some(t) = trajectory {
            written.push(write(dir.join(TRAJECTORY_FILE), &trajectory_csv(t))?);
        }
    }
    if formats.contains(&Format::Json) {
        written.push(write(dir.join(RESULT_FILE), &doc.to_json())?);
    }
    if formats.contains(&Format::Svg) {
        if let Some(s) = svg {
            written.push(write(dir.join(PORTRAIT_FILE), s)?);
        }
    }
    let mut prov = serde_json::to_string_pretty(provenance).expect("provenance serializes");
    prov.push('\n');
    written.push(write(dir.join(PROVENANCE_FILE), &prov)?);
    Ok(written)
}
