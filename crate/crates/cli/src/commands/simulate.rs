use qmem::field::gaussian_signal_at;
use qmem::solver::{default_retrieval_delay, photon_counting_efficiency, solve_with, write_field_dump, SolveOptions};
use qmem::{GridConfig, TimeGrid};
use serde_json::json;

use super::{
    control_from, control_json, memory_from, memory_json, refine_from, require_config, CONTROL_KEYS, MEMORY_KEYS,
};
use crate::error::{CliError, CliResult};
use crate::{Context, Outcome};

pub fn run(ctx: &mut Context, control_area: Option<f64>) -> CliResult<Outcome> {
    let cfg = require_config(ctx.config, "simulate")?;
    cfg.check_keys(&[
        ("memory", MEMORY_KEYS),
        ("control", CONTROL_KEYS),
        ("retrieval", &["enabled", "delay"]),
        ("grid", &["refine", "n_z", "n_t"]),
        ("dump", &["z_stride", "t_stride"]),
    ])?;
    let memory = memory_from(cfg)?;
    let mut control = control_from(cfg)?;
    if let Some(area) = control_area {
        control = control.with_area(area);
        control
            .validate()
            .map_err(|e| CliError::from_config(e).context("--control-area"))?;
    }
    let retrieve = cfg.bool_or("retrieval", "enabled", true)?;
    let delay = if retrieve {
        cfg.f64_or("retrieval", "delay", default_retrieval_delay(&memory, &control))?
    } else {
        0.0
    };
    let retrieval = retrieve.then_some(&control);

    let refine = refine_from(Some(cfg))?;
    let mut grid = GridConfig::for_run(&memory, &control, retrieval, delay)
        .and_then(|g| g.refined(refine))
        .map_err(CliError::from_config)?;
    if let Some(n_z) = cfg.usize_opt("grid", "n_z")? {
        grid.n_z = n_z;
    }
    if let Some(n_t) = cfg.usize_opt("grid", "n_t")? {
        grid.t_span = TimeGrid::new(grid.t_span.t_start(), grid.t_span.t_end(), n_t)
            .map_err(|e| CliError::from_config(e).context("config [grid]"))?;
    }
    grid.validate()
        .map_err(|e| CliError::from_config(e).context("config [grid]"))?;

    let record = if ctx.dump_fields {
        let z_stride = cfg.usize_opt("dump", "z_stride")?.unwrap_or((grid.n_z / 50).max(1));
        let t_stride = cfg.usize_opt("dump", "t_stride")?.unwrap_or((grid.n_t() / 400).max(1));
        if z_stride == 0 || t_stride == 0 {
            return Err(CliError::usage("config: dump strides must be at least 1"));
        }
        Some((z_stride, t_stride))
    } else {
        None
    };
    let signal = gaussian_signal_at(memory.tau_gamma, 0.0, &grid.t_span).map_err(CliError::from_config)?;
    let r = solve_with(
        &memory,
        &signal,
        &control,
        retrieval,
        delay,
        &grid,
        &SolveOptions { record },
    )
    .map_err(CliError::from_config)?;
    let pc = photon_counting_efficiency(&r, r.tau_mid).ok();

    let l = r.ledger;
    let result = json!({
        "eta_store": r.eta_store,
        "eta_ret": r.eta_ret,
        "eta_tot": r.eta_tot,
        "ledger": {
            "e_in": l.e_in,
            "e_out": l.e_out,
            "e_pol_final": l.e_pol_final,
            "e_spin_final": l.e_spin_final,
            "e_pol_decay": l.e_pol_decay,
            "e_spin_decay": l.e_spin_decay,
            "closure": l.closure(),
        },
        "photon_counting": pc.map(|p| json!({"eta_store_pc": p.eta_store_pc, "eta_tot_pc": p.eta_tot_pc})),
        "memory": memory_json(&memory),
        "control": control_json(&control),
        "retrieval": {"enabled": retrieve, "delay": delay},
        "storage_window_end": r.tau_mid,
        "grid": {
            "n_z": grid.n_z,
            "n_t": grid.n_t(),
            "t_start": grid.t_span.t_start(),
            "t_end": grid.t_span.t_end(),
        },
    });
    ctx.out.write_json("result.json", &result)?;
    if let Some(fields) = &r.fields {
        let mut buf = Vec::new();
        write_field_dump(fields, &mut buf).map_err(|e| CliError::usage(format!("field dump: {e}")))?;
        ctx.out.write("fields.csv", &buf)?;
    }
    Ok(Outcome::ok(format!(
        "eta_store = {:.6}, eta_ret = {:.6}, eta_tot = {:.6}",
        r.eta_store, r.eta_ret, r.eta_tot
    )))
}
