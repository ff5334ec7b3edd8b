use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Pipeline that produced the check.
    pub section: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub result: serde_json::Value,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ExperimentConfig,
    /// sha256 of the resolved config.
    pub input_hash: String,
    pub sections: Vec<Section>,
    pub checks: Vec<Check>,
    /// Wall-clock seconds per section.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown report format {other:?} (json or text)")),
        }
    }
}

pub fn input_hash(config: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"latgas-config\0");
    h.update(config.to_toml().as_bytes());
    format!("{:x}", h.finalize())
}

impl RunReport {
    pub fn new(config: ExperimentConfig) -> Self {
        RunReport {
            version: env!("CARGO_PKG_VERSION").into(),
            input_hash: input_hash(&config),
            config,
            sections: Vec::new(),
            checks: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

pub fn emit_report(report: &RunReport, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Text => text(report),
    }
}

fn text(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "latgas {}  config {}", r.version, &r.input_hash[..16]);
    let _ = writeln!(s, "preset {}  gamma {}  seed {}", r.config.preset.name(), r.config.gamma, r.config.seed);
    let _ = writeln!(s);
    if r.sections.is_empty() {
        let _ = writeln!(s, "no sections");
    }
    for sec in &r.sections {
        let t = r.timings.get(&sec.name).copied().unwrap_or(0.0);
        let _ = writeln!(s, "[{}] {:.2}s", sec.name, t);
        for a in &sec.artifacts {
            let _ = writeln!(s, "  wrote {a}");
        }
    }
    if !r.checks.is_empty() {
        let w = r.checks.iter().map(|c| c.section.len() + c.name.len() + 1).max().unwrap_or(0).max(5);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<w$}  {:<6}  detail", "check", "status");
        for c in &r.checks {
            let id = format!("{}/{}", c.section, c.name);
            let _ = writeln!(s, "{:<w$}  {:<6}  {}", id, if c.passed { "pass" } else { "FAIL" }, c.detail);
        }
    }
    let n_fail = r.checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(s);
    let _ = writeln!(s, "{} checks, {} failed", r.checks.len(), n_fail);
    s
}
