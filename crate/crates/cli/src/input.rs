//! Series files and model configs.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use spliceboot::{Dynamics, ModelSpec, NoiseKind, NoiseSpec, Threshold, TimeSeries};

use crate::CliError;

/// Parse a single-column series. An optional first row `value` is a header;
/// lines starting with `#` are comments; blank lines are errors.
pub fn parse_series(text: &str) -> Result<TimeSeries, CliError> {
    let mut values = Vec::new();
    let mut seen_row = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            return Err(CliError::Data(format!("line {lineno}: blank line")));
        }
        if !seen_row && line == "value" {
            seen_row = true;
            continue;
        }
        seen_row = true;
        if line.contains(',') {
            return Err(CliError::Data(format!("line {lineno}: expected a single column")));
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::Data(format!("line {lineno}: cannot parse {line:?} as a number")))?;
        if !v.is_finite() {
            return Err(CliError::Data(format!("line {lineno}: non-finite value {line:?}")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Data("series file has no values".into()));
    }
    Ok(TimeSeries::new(values)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Read and parse a series file, returning it with the digest of its bytes.
pub fn read_series(path: &Path) -> Result<(TimeSeries, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Data(format!("{} is not UTF-8", path.display())))?;
    Ok((parse_series(text)?, sha256_hex(&bytes)))
}

/// Inline JSON or the contents of a JSON file; `None` for anything else.
fn json_text(arg: &str) -> Result<Option<String>, CliError> {
    if arg.trim_start().starts_with('{') {
        return Ok(Some(arg.to_string()));
    }
    let path = Path::new(arg);
    if path.is_file() {
        return std::fs::read_to_string(path)
            .map(Some)
            .map_err(|e| CliError::Config(format!("cannot read {arg}: {e}")));
    }
    Ok(None)
}

/// `ar<p>`, `setar` (SETAR(2;1,1), delay 1, estimated threshold), inline JSON
/// or a JSON file.
pub fn parse_model(arg: &str) -> Result<ModelSpec, CliError> {
    if let Some(text) = json_text(arg)? {
        let spec: ModelSpec =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid model config: {e}")))?;
        spec.validate()?;
        return Ok(spec);
    }
    let spec = match arg {
        "setar" | "setar211" => ModelSpec::setar(1, 1, 1, Threshold::Estimate),
        _ => match arg.strip_prefix("ar").map(str::parse::<usize>) {
            Some(Ok(p)) => ModelSpec::ar(p),
            _ => return Err(CliError::Config(format!("unknown model {arg:?}"))),
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// Known dynamics for `simulate`.
#[derive(Debug, Clone, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationModel {
    pub dynamics: Dynamics,
    #[serde(default = "unit_normal")]
    pub noise: NoiseSpec,
}

fn unit_normal() -> NoiseSpec {
    NoiseSpec::standard(NoiseKind::Normal)
}

pub fn parse_simulation_model(arg: &str) -> Result<SimulationModel, CliError> {
    let text =
        json_text(arg)?.ok_or_else(|| CliError::Config(format!("--model for simulate must be JSON, got {arg:?}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid simulation model: {e}")))
}

pub fn parse_noise(arg: &str) -> Result<NoiseKind, CliError> {
    arg.parse()
        .map_err(|_| CliError::Config(format!("unknown noise law {arg:?}")))
}
