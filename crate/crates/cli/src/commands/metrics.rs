use qmem::characterization::{figures_of_merit, snr_to_fidelity, PhysicalConstantsConfig, ATOMIC_MASS_UNIT};
use serde_json::{json, Value};

use super::require_config;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{Context, Outcome};

const METRIC_KEYS: &[&str] = &[
    "lifetime_s",
    "bandwidth_hz",
    "clock_rate_hz",
    "d",
    "gamma_hz",
    "gamma_nat_hz",
    "snr",
];
const CONSTANT_KEYS: &[&str] = &[
    "mass_atom_u",
    "mass_buffer_u",
    "radius_atom_m",
    "radius_buffer_m",
    "lambda_signal_m",
    "lambda_control_m",
    "gamma_nat_hz",
];

fn constants(cfg: &RunConfig) -> CliResult<PhysicalConstantsConfig> {
    let d = PhysicalConstantsConfig::default();
    let c = PhysicalConstantsConfig {
        mass_atom: cfg.f64_or("constants", "mass_atom_u", d.mass_atom / ATOMIC_MASS_UNIT)? * ATOMIC_MASS_UNIT,
        mass_buffer: cfg.f64_or("constants", "mass_buffer_u", d.mass_buffer / ATOMIC_MASS_UNIT)? * ATOMIC_MASS_UNIT,
        radius_atom: cfg.f64_or("constants", "radius_atom_m", d.radius_atom)?,
        radius_buffer: cfg.f64_or("constants", "radius_buffer_m", d.radius_buffer)?,
        lambda_signal: cfg.f64_or("constants", "lambda_signal_m", d.lambda_signal)?,
        lambda_control: cfg.f64_or("constants", "lambda_control_m", d.lambda_control)?,
        gamma_nat: cfg.f64_or("constants", "gamma_nat_hz", d.gamma_nat)?,
    };
    c.validate()
        .map_err(|e| CliError::from_config(e).context("config [constants]"))?;
    Ok(c)
}

/// `[metrics]` figures of merit, `[kinetics]` collision kinetics and the
/// Doppler lifetime, each computed when its section is present.
pub fn run(ctx: &mut Context) -> CliResult<Outcome> {
    let cfg = require_config(ctx.config, "metrics")?;
    cfg.check_keys(&[
        ("metrics", METRIC_KEYS),
        ("kinetics", &["pressure_mbar", "temperature_k"]),
        ("constants", CONSTANT_KEYS),
    ])?;
    let consts = constants(cfg)?;
    let mut doc = serde_json::Map::new();
    let mut parts = Vec::new();
    if cfg.has_section("metrics") {
        let gamma_nat = cfg.f64_or("metrics", "gamma_nat_hz", consts.gamma_nat)?;
        let fom = figures_of_merit(
            cfg.require_f64("metrics", "lifetime_s")?,
            cfg.require_f64("metrics", "bandwidth_hz")?,
            cfg.require_f64("metrics", "clock_rate_hz")?,
            cfg.require_f64("metrics", "d")?,
            cfg.require_f64("metrics", "gamma_hz")?,
            gamma_nat,
        )
        .map_err(|e| CliError::from_config(e).context("config [metrics]"))?;
        let fidelity = match cfg.f64_opt("metrics", "snr")? {
            Some(snr) => Some(snr_to_fidelity(snr).map_err(|e| CliError::from_config(e).context("config [metrics]"))?),
            None => None,
        };
        doc.insert(
            "figures_of_merit".into(),
            json!({"tbp": fom.tbp, "trp": fom.trp, "cold_od": fom.cold_od, "fidelity": fidelity}),
        );
        parts.push(format!(
            "TBP = {:.4e}, TRP = {:.4e}, cold OD = {:.4e}",
            fom.tbp, fom.trp, fom.cold_od
        ));
    }
    if cfg.has_section("kinetics") {
        let pressure = cfg.require_f64("kinetics", "pressure_mbar")?;
        let temperature = cfg.require_f64("kinetics", "temperature_k")?;
        let k = consts
            .kinetics(pressure, temperature)
            .map_err(|e| CliError::from_config(e).context("config [kinetics]"))?;
        let doppler = consts
            .doppler_lifetime(temperature)
            .map_err(|e| CliError::from_config(e).context("config [kinetics]"))?;
        doc.insert(
            "kinetics".into(),
            json!({
                "pressure_mbar": pressure,
                "temperature_k": temperature,
                "mean_free_path_m": k.mean_free_path,
                "collision_time_s": k.collision_time,
                "diffusion_coefficient_m2_per_s": k.diffusion_coefficient,
                "doppler_lifetime_s": doppler.is_finite().then_some(doppler),
            }),
        );
        parts.push(format!(
            "collision time = {:.4e} s, Doppler lifetime = {doppler:.4e} s",
            k.collision_time
        ));
    }
    if doc.is_empty() {
        return Err(CliError::usage(
            "config: metrics needs a [metrics] or [kinetics] section",
        ));
    }
    ctx.out.write_json("metrics.json", &Value::Object(doc))?;
    Ok(Outcome::ok(parts.join("; ")))
}
