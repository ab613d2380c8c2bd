use std::collections::BTreeMap;

use qmem::norm::{
    control_adiabaticity, default_detunings, fig6_matrix, optimal_detuning, sweep_detuning, MatrixCell, OptimalDetuning,
};
use qmem::protocols::{adiabaticity, sweep_pulse_area, Protocol};
use qmem::solver::GridPolicy;
use serde_json::{json, Value};

use super::{
    control_from, control_json, csv_bytes, memory_from, memory_json, num, refine_from, require_config, CONTROL_KEYS,
    MEMORY_KEYS,
};
use crate::config::RunConfig;
use crate::error::{exit, CliError, CliResult};
use crate::{Context, Outcome, SweepKind};

pub fn run(ctx: &mut Context, kind: SweepKind) -> CliResult<Outcome> {
    match kind {
        SweepKind::Detuning => detuning(ctx),
        SweepKind::Area => area(ctx),
        SweepKind::Fig6Matrix => matrix(ctx),
    }
}

fn policy(refine: usize) -> GridPolicy {
    if refine == 1 {
        GridPolicy::Default
    } else {
        GridPolicy::Refined(refine)
    }
}

/// `[sweep] min, max, points`: all three or none.
fn range(cfg: &RunConfig) -> CliResult<Option<Vec<f64>>> {
    if !cfg.has_section("sweep") {
        return Ok(None);
    }
    let min = cfg.require_f64("sweep", "min")?;
    let max = cfg.require_f64("sweep", "max")?;
    let points = cfg
        .usize_opt("sweep", "points")?
        .ok_or_else(|| crate::config::missing("sweep", "points"))?;
    if points == 0 || max < min || (points > 1 && max == min) {
        return Err(CliError::usage(format!(
            "config: empty sweep range (min = {min}, max = {max}, points = {points})"
        )));
    }
    if points == 1 {
        return Ok(Some(vec![min]));
    }
    let step = (max - min) / (points - 1) as f64;
    Ok(Some((0..points).map(|k| min + step * k as f64).collect()))
}

fn finish(failures: usize, total: usize, message: String) -> Outcome {
    match failures {
        0 => Outcome::ok(message),
        f if f == total => Outcome {
            code: exit::NUMERICAL,
            message: format!("all {total} points failed"),
        },
        f => Outcome {
            code: exit::NUMERICAL,
            message: format!("partial success: {f} of {total} points failed; {message}"),
        },
    }
}

fn optimum_json(o: &Option<OptimalDetuning>) -> Value {
    match o {
        Some(o) => json!({
            "delta_opt": o.delta_opt,
            "eta_max": o.eta_max,
            "flat_interval": [o.flat_interval.0, o.flat_interval.1],
            "degenerate": o.degenerate,
            "off_resonant": o.is_off_resonant(),
        }),
        None => Value::Null,
    }
}

fn detuning(ctx: &mut Context) -> CliResult<Outcome> {
    let cfg = require_config(ctx.config, "sweep detuning")?;
    cfg.check_keys(&[
        ("memory", MEMORY_KEYS),
        ("control", CONTROL_KEYS),
        ("grid", &["refine"]),
        ("sweep", &["min", "max", "points"]),
    ])?;
    let memory = memory_from(cfg)?;
    let control = control_from(cfg)?;
    let detunings = range(cfg)?.unwrap_or_else(|| default_detunings(&memory));
    let sweep = sweep_detuning(&memory, &control, &detunings, &policy(refine_from(Some(cfg))?))
        .map_err(CliError::from_config)?;
    let rows = sweep.points.iter().map(|p| {
        vec![
            p.detuning.to_string(),
            num(p.eta_store),
            num(p.eta_tot),
            p.error.clone().unwrap_or_default(),
        ]
    });
    let csv = csv_bytes(&["detuning_over_gamma", "eta_store", "eta_tot", "error"], rows)?;
    ctx.out.write("detuning_sweep.csv", &csv)?;

    let optimum = optimal_detuning(&sweep).ok();
    // χ′ is defined only for preset controls.
    let chi_control = control_adiabaticity(&control).ok();
    let chi_memory = adiabaticity(&memory);
    let predicted = chi_control.map(|c| c < chi_memory);
    let failures = sweep.failures();
    let summary = json!({
        "memory": memory_json(&memory),
        "control": control_json(&control),
        "points": sweep.points.len(),
        "failures": failures,
        "partial": failures > 0 && failures < sweep.points.len(),
        "optimum": optimum_json(&optimum),
        "chi_control": chi_control,
        "chi_memory": chi_memory,
        "predicted_norm": predicted,
        "observed_norm": optimum.map(|o| o.is_off_resonant()),
    });
    ctx.out.write_json("summary.json", &summary)?;
    let message = match optimum {
        Some(o) => format!("delta_opt = {:.4}, eta_tot max = {:.6}", o.delta_opt, o.eta_max),
        None => "optimum not located".into(),
    };
    Ok(finish(failures, sweep.points.len(), message))
}

fn area(ctx: &mut Context) -> CliResult<Outcome> {
    let cfg = require_config(ctx.config, "sweep area")?;
    cfg.check_keys(&[
        ("memory", MEMORY_KEYS),
        ("control", CONTROL_KEYS),
        ("grid", &["refine"]),
        ("sweep", &["min", "max", "points"]),
    ])?;
    let memory = memory_from(cfg)?;
    let control = control_from(cfg)?;
    let areas = range(cfg)?.unwrap_or_else(|| (0..=30).map(|k| 0.1 * k as f64).collect());
    let scan =
        sweep_pulse_area(&memory, &control, &areas, &policy(refine_from(Some(cfg))?)).map_err(CliError::from_config)?;
    let rows = scan.points.iter().map(|p| {
        vec![
            p.theta_over_pi.to_string(),
            num(p.eta_store),
            p.error.clone().unwrap_or_default(),
        ]
    });
    let csv = csv_bytes(&["theta_over_pi", "eta_store", "error"], rows)?;
    ctx.out.write("area_sweep.csv", &csv)?;
    let point = |p: Option<(f64, f64)>| p.map(|(t, e)| json!({"theta_over_pi": t, "eta_store": e}));
    let failures = scan.failures();
    let summary = json!({
        "memory": memory_json(&memory),
        "control": control_json(&control),
        "points": scan.points.len(),
        "failures": failures,
        "partial": scan.is_partial(),
        "first_max": point(scan.first_max),
        "next_min": point(scan.next_min),
    });
    ctx.out.write_json("summary.json", &summary)?;
    let message = match scan.first_max {
        Some((t, e)) => format!("first maximum eta_store = {e:.6} at {t:.3} pi"),
        None => "no maximum located".into(),
    };
    Ok(finish(failures, scan.points.len(), message))
}

fn matrix(ctx: &mut Context) -> CliResult<Outcome> {
    if let Some(cfg) = ctx.config {
        cfg.check_keys(&[("grid", &["refine"])])?;
    }
    let cells = fig6_matrix(&policy(refine_from(ctx.config)?));
    let mut table = Vec::new();
    let mut json_cells = Vec::new();
    let (mut failures, mut total) = (0, 0);
    for cell in &cells {
        let name = format!("fig6_{}_in_{}.csv", cell.protocol, cell.regime);
        let rows = cell.sweep.points.iter().map(|p| {
            vec![
                p.detuning.to_string(),
                num(p.eta_store),
                num(p.eta_tot),
                p.error.clone().unwrap_or_default(),
            ]
        });
        let csv = csv_bytes(&["detuning_over_gamma", "eta_store", "eta_tot", "error"], rows)?;
        ctx.out.write(&name, &csv)?;
        failures += cell.sweep.failures();
        total += cell.sweep.points.len();
        table.push(truth_row(cell));
        json_cells.push(json!({
            "protocol": cell.protocol.to_string(),
            "regime": cell.regime.to_string(),
            "chi_control": cell.chi_control,
            "chi_memory": cell.chi_memory,
            "predicted_norm": cell.predicted_norm,
            "observed_norm": cell.observed_norm(),
            "optimum": optimum_json(&cell.optimum),
            "failures": cell.sweep.failures(),
            "curve": name,
        }));
    }
    let csv = csv_bytes(
        &[
            "protocol",
            "regime",
            "chi_control",
            "chi_memory",
            "predicted_norm",
            "observed_norm",
            "delta_opt",
            "eta_max",
            "degenerate",
        ],
        table,
    )?;
    ctx.out.write("truth_table.csv", &csv)?;

    let norm_matches = cells.iter().all(|c| c.observed_norm() == Some(c.predicted_norm));
    let mut best_regime = BTreeMap::new();
    for p in Protocol::ALL {
        let best = cells
            .iter()
            .filter(|c| c.protocol == p)
            .filter_map(|c| c.optimum.map(|o| (c.regime, o.eta_max)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(r, _)| r.to_string());
        best_regime.insert(p.to_string(), best);
    }
    let summary = json!({
        "cells": json_cells,
        "norm_matches_prediction": norm_matches,
        "best_regime": best_regime,
        "points": total,
        "failures": failures,
        "partial": failures > 0 && failures < total,
    });
    ctx.out.write_json("summary.json", &summary)?;
    let message = format!(
        "{} cells; observed NORM {} the chi' < chi prediction",
        cells.len(),
        if norm_matches { "matches" } else { "does not match" }
    );
    Ok(finish(failures, total, message))
}

fn truth_row(cell: &MatrixCell) -> Vec<String> {
    let o = cell.optimum;
    vec![
        cell.protocol.to_string(),
        cell.regime.to_string(),
        cell.chi_control.to_string(),
        cell.chi_memory.to_string(),
        cell.predicted_norm.to_string(),
        cell.observed_norm().map(|b| b.to_string()).unwrap_or_default(),
        num(o.map(|o| o.delta_opt)),
        num(o.map(|o| o.eta_max)),
        o.map(|o| o.degenerate.to_string()).unwrap_or_default(),
    ]
}
