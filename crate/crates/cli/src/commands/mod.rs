pub mod fit;
pub mod metrics;
pub mod reconstruct;
pub mod simulate;
pub mod sweep;

use qmem::protocols::Protocol;
use qmem::{ControlPulse, MemoryParams};
use serde_json::{json, Value};

use crate::config::{missing, RunConfig};
use crate::error::{CliError, CliResult};

pub(crate) const MEMORY_KEYS: &[&str] = &["preset", "d", "tau_gamma", "detuning", "gamma_b"];
pub(crate) const CONTROL_KEYS: &[&str] = &["preset", "area", "delay", "duration"];

pub(crate) fn require_config<'a>(config: Option<&'a RunConfig>, command: &str) -> CliResult<&'a RunConfig> {
    config.ok_or_else(|| CliError::usage(format!("{command} needs --config")))
}

fn preset(cfg: &RunConfig, section: &str) -> CliResult<Option<Protocol>> {
    cfg.get(section, "preset")
        .map(|v| {
            v.parse::<Protocol>()
                .map_err(|_| CliError::usage(format!("config: `{section}.preset` = `{v}`; expected ATT, ATS or EIT")))
        })
        .transpose()
}

/// `[memory]`: a preset regime and/or explicit `d`, `tau_gamma`,
/// `detuning`, `gamma_b`. Explicit keys override the preset.
pub(crate) fn memory_from(cfg: &RunConfig) -> CliResult<MemoryParams> {
    let base = preset(cfg, "memory")?.map(|p| p.preset().memory);
    let value = |key: &str, fallback: Option<f64>| -> CliResult<f64> {
        match cfg.f64_opt("memory", key)? {
            Some(v) => Ok(v),
            None => fallback.ok_or_else(|| missing("memory", key)),
        }
    };
    let m = MemoryParams::new(
        value("d", base.map(|m| m.d))?,
        value("tau_gamma", base.map(|m| m.tau_gamma))?,
        value("detuning", Some(base.map_or(0.0, |m| m.detuning)))?,
        value("gamma_b", Some(base.map_or(0.0, |m| m.gamma_b)))?,
    );
    m.map_err(|e| CliError::from_config(e).context("config [memory]"))
}

/// `[control]`: a preset pulse and/or explicit `area`, `delay`,
/// `duration`.
pub(crate) fn control_from(cfg: &RunConfig) -> CliResult<ControlPulse> {
    let base = preset(cfg, "control")?.map(|p| p.preset().control);
    let value = |key: &str, fallback: Option<f64>| -> CliResult<f64> {
        match cfg.f64_opt("control", key)? {
            Some(v) => Ok(v),
            None => fallback.ok_or_else(|| missing("control", key)),
        }
    };
    let c = ControlPulse::new(
        value("area", base.map(|c| c.area))?,
        value("delay", base.map(|c| c.delay))?,
        value("duration", base.map(|c| c.duration))?,
    );
    c.map_err(|e| CliError::from_config(e).context("config [control]"))
}

pub(crate) fn refine_from(cfg: Option<&RunConfig>) -> CliResult<usize> {
    let k = match cfg {
        Some(c) => c.usize_opt("grid", "refine")?.unwrap_or(1),
        None => 1,
    };
    if k == 0 {
        return Err(CliError::usage("config: `grid.refine` must be at least 1"));
    }
    Ok(k)
}

pub(crate) fn memory_json(m: &MemoryParams) -> Value {
    json!({"d": m.d, "tau_gamma": m.tau_gamma, "detuning": m.detuning, "gamma_b": m.gamma_b})
}

pub(crate) fn control_json(c: &ControlPulse) -> Value {
    json!({"area": c.area, "delay": c.delay, "duration": c.duration})
}

/// Shortest round-trip text for a number; empty for missing values.
pub(crate) fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::usage(format!("writing csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::usage(format!("writing csv: {e}")))
}

pub(crate) fn open(path: &std::path::Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(|e| CliError::io(path, e))
}
