use std::f64::consts::PI;
use std::path::Path;

use qmem::interferometry::{
    phase_rms_error, read_counts_csv, reconstruct_phase, reconstruct_time_domain, Interferogram,
};
use qmem::TimeGrid;
use serde_json::json;

use super::{csv_bytes, open, require_config};
use crate::error::{CliError, CliResult};
use crate::{Context, Outcome};

/// Frequencies in the temporal reconstruction are rad/ps relative to the
/// spectral centroid, times are ps.
const RAD_PER_S_TO_RAD_PER_PS: f64 = 1e-12;

fn read(ctx: &mut Context, path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    ctx.out.input(path)?;
    read_counts_csv(open(path)?).map_err(|e| CliError::from_config(e).context(&path.display().to_string()))
}

fn same_axis(reference: &[f64], other: &[f64], what: &str) -> CliResult<()> {
    let scale = reference.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let same =
        reference.len() == other.len() && reference.iter().zip(other).all(|(a, b)| (a - b).abs() <= 1e-12 * scale);
    if same {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "{what} is not sampled on the interferogram's frequency axis"
        )))
    }
}

fn magnitudes(counts: &[f64], what: &str) -> CliResult<Vec<f64>> {
    if let Some(c) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(CliError::data(format!(
            "{what}: counts must be finite and non-negative, got {c}"
        )));
    }
    Ok(counts.iter().map(|c| c.sqrt()).collect())
}

pub fn run(ctx: &mut Context) -> CliResult<Outcome> {
    let cfg = require_config(ctx.config, "reconstruct")?;
    cfg.check_keys(&[(
        "reconstruct",
        &[
            "interferogram",
            "reference",
            "signal",
            "delta_tau_s",
            "reference_phase",
            "truth_phase",
        ],
    )])?;
    let delta_tau = cfg.require_f64("reconstruct", "delta_tau_s")?;
    let (omega, s) = read(ctx, &cfg.require_path("reconstruct", "interferogram")?)?;
    let (w1, c1) = read(ctx, &cfg.require_path("reconstruct", "reference")?)?;
    let (w2, c2) = read(ctx, &cfg.require_path("reconstruct", "signal")?)?;
    same_axis(&omega, &w1, "reference spectrum")?;
    same_axis(&omega, &w2, "signal spectrum")?;
    let phi1 = match cfg.path_opt("reconstruct", "reference_phase") {
        Some(p) => {
            let (w, phase) = read(ctx, &p)?;
            same_axis(&omega, &w, "reference phase")?;
            phase
        }
        None => vec![0.0; omega.len()],
    };
    let ig = Interferogram::new(omega.clone(), s, delta_tau).map_err(CliError::from_data)?;
    let a1 = magnitudes(&c1, "reference spectrum")?;
    let a2 = magnitudes(&c2, "signal spectrum")?;
    let rec = reconstruct_phase(&ig, &a1, &a2, &phi1).map_err(CliError::from_data)?;

    let mut buf = Vec::new();
    rec.write_csv(&mut buf).map_err(CliError::from_data)?;
    ctx.out.write("reconstruction.csv", &buf)?;

    let rms = match cfg.path_opt("reconstruct", "truth_phase") {
        Some(p) => {
            let (w, truth) = read(ctx, &p)?;
            same_axis(&omega, &w, "truth phase")?;
            let (got, want): (Vec<f64>, Vec<f64>) = rec
                .phase
                .iter()
                .zip(&truth)
                .filter_map(|(p, t)| p.map(|p| (p, *t)))
                .unzip();
            Some(phase_rms_error(&got, &want))
        }
        None => None,
    };

    let spec = rec.to_spectral_field().map_err(CliError::from_data)?;
    let center = spec
        .centroid()
        .ok_or_else(|| CliError::data("reconstructed spectrum has zero energy"))?;
    let rel = spec
        .rescaled(center, RAD_PER_S_TO_RAD_PER_PS)
        .map_err(CliError::from_data)?;
    let grid = time_grid(rel.omega())?;
    let temporal = reconstruct_time_domain(&rel, &grid).map_err(CliError::from_data)?;
    let field = &temporal.field;
    let rows = grid.times().zip(field.samples()).map(|(t, a)| {
        vec![
            t.to_string(),
            a.norm_sqr().to_string(),
            a.arg().to_string(),
            a.re.to_string(),
            a.im.to_string(),
        ]
    });
    let csv = csv_bytes(&["t_ps", "intensity", "phase_rad", "re", "im"], rows)?;
    ctx.out.write("temporal.csv", &csv)?;

    let report = json!({
        "samples_per_fringe": ig.samples_per_fringe(),
        "support_len": rec.support_len(),
        "clamp_fraction": rec.clamp_fraction,
        "low_confidence": rec.low_confidence,
        "phase_rms_error_rad": rms,
        "center_omega_rad_per_s": center,
        "temporal": {
            "c0_rad": temporal.c0,
            "c1_rad_per_ps": temporal.c1,
            "c2_rad_per_ps2": temporal.c2,
            "window_ps": [temporal.window.0, temporal.window.1],
            "intensity_fwhm_ps": field.intensity_fwhm(),
        },
    });
    ctx.out.write_json("report.json", &report)?;
    let mut message = format!(
        "support {} samples, c1 = {:.6} rad/ps, c2 = {:.6} rad/ps^2",
        rec.support_len(),
        temporal.c1,
        temporal.c2
    );
    if let Some(r) = rms {
        message.push_str(&format!(", phase rms error {r:.3e} rad"));
    }
    Ok(Outcome::ok(message))
}

/// One alias period 2π/δω of the mean spacing, sampled finely enough for
/// the widest frequency offset.
fn time_grid(omega: &[f64]) -> CliResult<TimeGrid> {
    let n = omega.len();
    let spacing = (omega[n - 1] - omega[0]) / (n - 1) as f64;
    let period = 2.0 * PI / spacing;
    let reach = omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let needed = (2.0 * period * reach / PI).ceil() as usize;
    let samples = needed.next_power_of_two().clamp(512, 16384);
    TimeGrid::new(-0.5 * period, 0.5 * period, samples).map_err(CliError::from_data)
}
