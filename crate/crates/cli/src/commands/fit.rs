use std::path::Path;

use qmem::characterization::{
    fit_frequency_response, fit_lifetime, fit_lifetime_vs_pressure, fit_linewidth_vs_pressure, fit_snr_linear,
    read_two_columns, snr_to_fidelity, DecayScan, LifetimeModel,
};
use qmem::fit::{ExpDecay, GaussDecay, Gaussian, InverseOffset, Model, Visibility};
use qmem::interferometry::fit_visibility;
use qmem::FitResult;
use serde_json::{json, Value};

use super::{csv_bytes, open};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{Context, FitKind, Outcome};

/// Header each model expects in its input CSV.
pub fn columns(kind: FitKind) -> (&'static str, &'static str) {
    match kind {
        FitKind::Lifetime => ("storage_time_ns", "efficiency_pct"),
        FitKind::LifetimeVsPressure => ("pressure_mbar", "lifetime_ns"),
        FitKind::Linewidth => ("pressure_mbar", "linewidth_ghz"),
        FitKind::Snr => ("mean_photon_number", "snr"),
        FitKind::Visibility => ("integration_time_s", "visibility"),
        FitKind::FrequencyResponse => ("detuning_over_gamma", "efficiency"),
    }
}

struct Fitted {
    fit: FitResult,
    derived: Value,
    predict: Box<dyn Fn(f64) -> f64>,
}

pub fn run(ctx: &mut Context, kind: FitKind, input: &Path) -> CliResult<Outcome> {
    let empty = RunConfig::default();
    let cfg = ctx.config.unwrap_or(&empty);
    cfg.check_keys(&[("fit", &["pressure_mbar", "temperature_c", "model", "with_offset"])])?;
    let cols = columns(kind);
    let (x, y) = read_two_columns(open(input)?, cols)
        .map_err(|e| CliError::from_config(e).context(&input.display().to_string()))?;
    ctx.out.input(input)?;

    let fitted = fit(kind, cfg, &x, &y)?;
    let mut doc = serde_json::to_value(&fitted.fit).expect("fit results serialize");
    let obj = doc.as_object_mut().expect("fit result is an object");
    obj.insert("input_columns".into(), json!([cols.0, cols.1]));
    obj.insert("derived".into(), fitted.derived);
    ctx.out.write_json("fit.json", &doc)?;

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let rows = pairs.iter().map(|&(xi, yi)| {
        let f = (fitted.predict)(xi);
        vec![xi.to_string(), yi.to_string(), f.to_string(), (yi - f).to_string()]
    });
    let csv = csv_bytes(&[cols.0, cols.1, "fitted", "residual"], rows)?;
    ctx.out.write("residuals.csv", &csv)?;

    let params: Vec<String> = fitted
        .fit
        .param_names
        .iter()
        .zip(&fitted.fit.params)
        .map(|(n, v)| format!("{n} = {v:.6e}"))
        .collect();
    Ok(Outcome::ok(format!("{}: {}", fitted.fit.model, params.join(", "))))
}

fn fit(kind: FitKind, cfg: &RunConfig, x: &[f64], y: &[f64]) -> CliResult<Fitted> {
    let data = CliError::from_data;
    Ok(match kind {
        FitKind::Lifetime => {
            let model: LifetimeModel = match cfg.get("fit", "model") {
                Some(v) => v.parse().map_err(|_| {
                    CliError::usage(format!(
                        "config: `fit.model` = `{v}`; expected auto, exponential or gaussian"
                    ))
                })?,
                None => LifetimeModel::Auto,
            };
            let pressure = match (model, cfg.f64_opt("fit", "pressure_mbar")?) {
                (_, Some(p)) => p,
                (LifetimeModel::Auto, None) => return Err(crate::config::missing("fit", "pressure_mbar")),
                (_, None) => 0.0,
            };
            let temperature = cfg.f64_or("fit", "temperature_c", 0.0)?;
            let scan = DecayScan::new(x.to_vec(), y.to_vec(), pressure, temperature).map_err(data)?;
            let lf = fit_lifetime(&scan, model).map_err(data)?;
            let p = lf.fit.params.clone();
            let gaussian = lf.model == LifetimeModel::Gaussian;
            Fitted {
                derived: json!({
                    "model_used": lf.model.to_string(),
                    "lifetime_ns": (!lf.infinite).then_some(lf.lifetime),
                    "lifetime_std_err_ns": lf.lifetime_std_err,
                    "infinite": lf.infinite,
                }),
                fit: lf.fit,
                predict: if gaussian {
                    Box::new(move |t| GaussDecay.value(t, &p))
                } else {
                    Box::new(move |t| ExpDecay.value(t, &p))
                },
            }
        }
        FitKind::LifetimeVsPressure => {
            let with_offset = cfg.bool_or("fit", "with_offset", true)?;
            let pf = fit_lifetime_vs_pressure(x, y, with_offset).map_err(data)?;
            let p = pf.fit.params.clone();
            Fitted {
                derived: json!({"relative_rms": pf.relative_rms, "poor_fit": pf.poor_fit}),
                fit: pf.fit,
                predict: if with_offset {
                    Box::new(move |v| InverseOffset.value(v, &p))
                } else {
                    Box::new(move |v| p[0] / v)
                },
            }
        }
        FitKind::Linewidth => {
            let fit = fit_linewidth_vs_pressure(x, y).map_err(data)?;
            let (b, m) = (fit.params[0], fit.params[1]);
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ends = [b + m * lo, b + m * hi];
            Fitted {
                derived: json!({
                    "zero_pressure_linewidth_ghz": b,
                    "broadening_ghz_per_mbar": m,
                    "fitted_linewidth_range_ghz": [ends[0].min(ends[1]), ends[0].max(ends[1])],
                }),
                fit,
                predict: Box::new(move |v| b + m * v),
            }
        }
        FitKind::Snr => {
            let sf = fit_snr_linear(x, y).map_err(data)?;
            let (b, m) = (sf.fit.params[0], sf.fit.params[1]);
            let fidelity = snr_to_fidelity(sf.snr_at_one).ok();
            Fitted {
                derived: json!({"snr_at_one_photon": sf.snr_at_one, "fidelity_at_one_photon": fidelity}),
                fit: sf.fit,
                predict: Box::new(move |v| b + m * v),
            }
        }
        FitKind::Visibility => {
            let vf = fit_visibility(x, y).map_err(data)?;
            let p = vf.fit.params.clone();
            Fitted {
                derived: json!({"f1": vf.model.f1, "f2": vf.model.f2}),
                fit: vf.fit,
                predict: Box::new(move |t| Visibility.value(t, &p)),
            }
        }
        FitKind::FrequencyResponse => {
            let ff = fit_frequency_response(x, y).map_err(data)?;
            let p = ff.fit.params.clone();
            Fitted {
                derived: json!({
                    "center": ff.center,
                    "fwhm": ff.fwhm,
                    "amplitude": ff.amplitude,
                    "degenerate": ff.degenerate,
                }),
                fit: ff.fit,
                predict: Box::new(move |v| Gaussian.value(v, &p)),
            }
        }
    })
}
