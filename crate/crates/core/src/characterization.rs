//! Fits and physical estimates for characterizing a memory experimentally:
//! lifetime decays, pressure dependence of lifetime and linewidth, the
//! Doppler dephasing limit, hard-sphere collision kinetics, SNR and
//! figures of merit.

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{
    fit_inverse, fit_line, levenberg_marquardt, scaled_starts, sorted_pairs, ExpDecay, FitResult, GaussDecay, Gaussian,
    InverseOffset,
};

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Below this buffer-gas pressure `auto` fits use a Gaussian decay.
pub const GAUSSIAN_CUTOFF_MBAR: f64 = 25.0;

/// Relative RMS residual above which a lifetime-vs-pressure fit is poor.
pub const POOR_FIT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScan {
    /// ns, strictly increasing.
    pub storage_time: Vec<f64>,
    /// Percent.
    pub efficiency: Vec<f64>,
    /// mbar.
    pub pressure: f64,
    /// °C.
    pub temperature: f64,
}

impl DecayScan {
    /// Sorts the points by storage time.
    pub fn new(storage_time: Vec<f64>, efficiency: Vec<f64>, pressure: f64, temperature: f64) -> Result<Self> {
        let (t, e) = sorted_pairs(&storage_time, &efficiency)?;
        if let Some(x) = t.first().filter(|x| **x < 0.0) {
            return Err(Error::param("storage_time", format!("must be >= 0, got {x}")));
        }
        if t.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("storage_time", "values must be distinct"));
        }
        if let Some(x) = e.iter().find(|x| **x < 0.0) {
            return Err(Error::param("efficiency", format!("must be >= 0, got {x}")));
        }
        if !(pressure >= 0.0) {
            return Err(Error::param("pressure", format!("must be >= 0, got {pressure}")));
        }
        Ok(Self {
            storage_time: t,
            efficiency: e,
            pressure,
            temperature,
        })
    }

    /// Reads `storage_time_ns, efficiency_pct`.
    pub fn from_csv<R: Read>(reader: R, pressure: f64, temperature: f64) -> Result<Self> {
        let cols = read_two_columns(reader, ("storage_time_ns", "efficiency_pct"))?;
        Self::new(cols.0, cols.1, pressure, temperature)
    }
}

/// Reads a two-column numeric CSV whose header must match `expected`.
pub fn read_two_columns<R: Read>(reader: R, expected: (&str, &str)) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != [expected.0, expected.1] {
        return Err(Error::Csv(format!(
            "expected columns `{},{}`, found `{}`",
            expected.0,
            expected.1,
            names.join(",")
        )));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Csv(format!(
                "row {} has {} columns, expected 2",
                line + 2,
                record.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Csv(format!("row {}: {e}", line + 2)))
        };
        x.push(parse(&record[0])?);
        y.push(parse(&record[1])?);
    }
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LifetimeModel {
    Auto,
    Exponential,
    Gaussian,
}

impl FromStr for LifetimeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "exponential" | "exp" => Ok(Self::Exponential),
            "gaussian" | "gauss" => Ok(Self::Gaussian),
            _ => Err(Error::param(
                "model",
                format!("expected auto, exponential or gaussian, got `{s}`"),
            )),
        }
    }
}

impl fmt::Display for LifetimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Exponential => "exponential",
            Self::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeFit {
    /// The model actually fitted (never `Auto`).
    pub model: LifetimeModel,
    pub fit: FitResult,
    /// 1/e time in the scan's time unit; infinite when no decay is seen.
    pub lifetime: f64,
    pub lifetime_std_err: f64,
    pub infinite: bool,
}

/// Fits η₀e^{−t/T} or η₀e^{−(t/T)²}; T is the 1/e time in both.
pub fn fit_lifetime(scan: &DecayScan, model: LifetimeModel) -> Result<LifetimeFit> {
    let (t, y) = (&scan.storage_time, &scan.efficiency);
    if t.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            found: t.len(),
        });
    }
    let model = match model {
        LifetimeModel::Auto if scan.pressure < GAUSSIAN_CUTOFF_MBAR => LifetimeModel::Gaussian,
        LifetimeModel::Auto => LifetimeModel::Exponential,
        m => m,
    };
    if y.iter().all(|v| *v == y[0]) {
        let fit = FitResult {
            model: model.to_string(),
            param_names: vec!["amplitude".into(), "rate".into()],
            params: vec![y[0], 0.0],
            std_errs: vec![0.0, 0.0],
            residual_norm: 0.0,
            converged: true,
            iterations: 0,
        };
        return Ok(LifetimeFit {
            model,
            fit,
            lifetime: f64::INFINITY,
            lifetime_std_err: f64::NAN,
            infinite: true,
        });
    }
    let gaussian = model == LifetimeModel::Gaussian;
    let guess = decay_guess(t, y, gaussian);
    let starts = scaled_starts(&guess, &[1]);
    let fit = if gaussian {
        levenberg_marquardt(&GaussDecay, t, y, &starts)?
    } else {
        levenberg_marquardt(&ExpDecay, t, y, &starts)?
    }
    .require_converged()?;
    let k = if gaussian { fit.params[1].abs() } else { fit.params[1] };
    let infinite = !(k > 0.0);
    let (lifetime, lifetime_std_err) = if infinite {
        (f64::INFINITY, f64::NAN)
    } else {
        (1.0 / k, fit.std_errs[1] / (k * k))
    };
    Ok(LifetimeFit {
        model,
        fit,
        lifetime,
        lifetime_std_err,
        infinite,
    })
}

/// Amplitude and rate from a log-linear fit on the positive points.
fn decay_guess(t: &[f64], y: &[f64], gaussian: bool) -> [f64; 2] {
    let peak = y.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(ti, v)| (if gaussian { ti * ti } else { *ti }, v.ln()))
        .collect();
    let span = t.last().unwrap_or(&1.0) - t.first().unwrap_or(&0.0);
    let fallback = 2.0 / span.max(f64::MIN_POSITIVE);
    let line = fit_line(
        &pts.iter().map(|p| p.0).collect::<Vec<_>>(),
        &pts.iter().map(|p| p.1).collect::<Vec<_>>(),
    );
    match line {
        Ok(l) if l.params[1] < 0.0 => {
            let rate = if gaussian { (-l.params[1]).sqrt() } else { -l.params[1] };
            [l.params[0].exp(), rate]
        }
        _ => [peak, fallback],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureFit {
    pub fit: FitResult,
    /// RMS residual over RMS lifetime.
    pub relative_rms: f64,
    pub poor_fit: bool,
}

/// Fits T(P) = a/P, or a/(P + b) with `with_offset`.
pub fn fit_lifetime_vs_pressure(pressures: &[f64], lifetimes: &[f64], with_offset: bool) -> Result<PressureFit> {
    let (p, t) = sorted_pairs(pressures, lifetimes)?;
    if p.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            found: p.len(),
        });
    }
    if let Some(x) = p.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::param("pressure", format!("must be > 0, got {x}")));
    }
    if p.iter().all(|x| *x == p[0]) {
        return Err(Error::RankDeficient("all pressures are identical".into()));
    }
    let inverse = fit_inverse(&p, &t)?;
    let fit = if with_offset {
        let a0 = inverse.params[0];
        let median = p[p.len() / 2];
        let starts: Vec<Vec<f64>> = [0.0, 0.1, 0.5, 1.0, 3.0]
            .iter()
            .map(|s| {
                let b = s * median;
                // Match the data mean with the chosen offset.
                let scale = p.iter().zip(&t).map(|(x, y)| y * (x + b)).sum::<f64>() / p.len() as f64;
                vec![if scale > 0.0 { scale } else { a0 }, b]
            })
            .collect();
        levenberg_marquardt(&InverseOffset, &p, &t, &starts)?.require_converged()?
    } else {
        inverse
    };
    let rms_t = (t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64).sqrt();
    let relative_rms = fit.residual_norm / (t.len() as f64).sqrt() / rms_t;
    Ok(PressureFit {
        fit,
        relative_rms,
        poor_fit: relative_rms > POOR_FIT_THRESHOLD,
    })
}

/// 1/e time √2/(Δk·ū) of the Gaussian spin-wave dephasing
/// exp(−(Δk ū t)²/2), with Δk = 2π|1/λ_s − 1/λ_c| and the 1-D rms
/// thermal speed ū = √(k_B T/m). Infinite when λ_s = λ_c.
pub fn doppler_lifetime(temperature: f64, mass: f64, lambda_s: f64, lambda_c: f64) -> Result<f64> {
    for (name, v) in [
        ("temperature", temperature),
        ("mass", mass),
        ("lambda_s", lambda_s),
        ("lambda_c", lambda_c),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
        }
    }
    let dk = 2.0 * PI * (1.0 / lambda_s - 1.0 / lambda_c).abs();
    if dk == 0.0 {
        return Ok(f64::INFINITY);
    }
    let u = (BOLTZMANN * temperature / mass).sqrt();
    Ok(2f64.sqrt() / (dk * u))
}

/// Linear Γ(P) = Γ₀ + slope·P.
pub fn fit_linewidth_vs_pressure(pressures: &[f64], linewidths: &[f64]) -> Result<FitResult> {
    fit_line(pressures, linewidths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kinetics {
    /// m.
    pub mean_free_path: f64,
    /// s.
    pub collision_time: f64,
    /// m²/s.
    pub diffusion_coefficient: f64,
}

/// Hard-sphere kinetic theory for a collision pair. Pressure in Pa,
/// temperature in K, radii in m, masses in kg.
pub fn collision_kinetics(pressure: f64, temperature: f64, radii: (f64, f64), masses: (f64, f64)) -> Result<Kinetics> {
    for (name, v) in [
        ("pressure", pressure),
        ("temperature", temperature),
        ("radius", radii.0),
        ("radius", radii.1),
        ("mass", masses.0),
        ("mass", masses.1),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
        }
    }
    let kt = BOLTZMANN * temperature;
    let diameter = radii.0 + radii.1;
    let sigma = PI * diameter * diameter;
    let mu = masses.0 * masses.1 / (masses.0 + masses.1);
    let mean_free_path = kt / (2f64.sqrt() * sigma * pressure);
    let v_rel = (8.0 * kt / (PI * mu)).sqrt();
    let density = pressure / kt;
    Ok(Kinetics {
        mean_free_path,
        collision_time: mean_free_path / v_rel,
        diffusion_coefficient: 3.0 / 16.0 * (2.0 * PI * kt / mu).sqrt() / (density * sigma),
    })
}

/// Species and optical constants; defaults are barium in argon with the
/// 553.5 nm signal and 1500 nm control transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstantsConfig {
    /// kg.
    pub mass_atom: f64,
    /// kg.
    pub mass_buffer: f64,
    /// m.
    pub radius_atom: f64,
    /// m.
    pub radius_buffer: f64,
    /// m.
    pub lambda_signal: f64,
    /// m.
    pub lambda_control: f64,
    /// Hz.
    pub gamma_nat: f64,
}

impl Default for PhysicalConstantsConfig {
    fn default() -> Self {
        Self {
            mass_atom: 137.327 * ATOMIC_MASS_UNIT,
            mass_buffer: 39.948 * ATOMIC_MASS_UNIT,
            radius_atom: 268e-12,
            radius_buffer: 188e-12,
            lambda_signal: 553.5e-9,
            lambda_control: 1500e-9,
            gamma_nat: 120e6,
        }
    }
}

impl PhysicalConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass_atom", self.mass_atom),
            ("mass_buffer", self.mass_buffer),
            ("radius_atom", self.radius_atom),
            ("radius_buffer", self.radius_buffer),
            ("lambda_signal", self.lambda_signal),
            ("lambda_control", self.lambda_control),
            ("gamma_nat", self.gamma_nat),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Kinetics at `pressure_mbar` and `temperature_k`.
    pub fn kinetics(&self, pressure_mbar: f64, temperature_k: f64) -> Result<Kinetics> {
        self.validate()?;
        collision_kinetics(
            pressure_mbar * 100.0,
            temperature_k,
            (self.radius_atom, self.radius_buffer),
            (self.mass_atom, self.mass_buffer),
        )
    }

    pub fn doppler_lifetime(&self, temperature_k: f64) -> Result<f64> {
        self.validate()?;
        doppler_lifetime(temperature_k, self.mass_atom, self.lambda_signal, self.lambda_control)
    }
}

/// F = 1 − 1/(SNR + 1).
pub fn snr_to_fidelity(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::param("snr", format!("must be >= 0, got {snr}")));
    }
    Ok(1.0 - 1.0 / (snr + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrFit {
    pub fit: FitResult,
    /// Fitted SNR at a mean photon number of one.
    pub snr_at_one: f64,
}

pub fn fit_snr_linear(photon_numbers: &[f64], snr: &[f64]) -> Result<SnrFit> {
    if let Some(x) = photon_numbers.iter().chain(snr).find(|x| !(**x >= 0.0)) {
        return Err(Error::param("snr data", format!("must be >= 0, got {x}")));
    }
    let fit = fit_line(photon_numbers, snr)?;
    let snr_at_one = fit.params[0] + fit.params[1];
    Ok(SnrFit { fit, snr_at_one })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiguresOfMerit {
    pub tbp: f64,
    pub trp: f64,
    pub cold_od: f64,
}

/// TBP = T·BW, TRP = T·R and cold OD = d·Γ/Γ_nat.
pub fn figures_of_merit(
    lifetime: f64,
    bandwidth: f64,
    clock_rate: f64,
    d: f64,
    gamma: f64,
    gamma_nat: f64,
) -> Result<FiguresOfMerit> {
    for (name, v) in [
        ("lifetime", lifetime),
        ("bandwidth", bandwidth),
        ("clock_rate", clock_rate),
        ("d", d),
        ("gamma", gamma),
        ("gamma_nat", gamma_nat),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
        }
    }
    Ok(FiguresOfMerit {
        tbp: lifetime * bandwidth,
        trp: lifetime * clock_rate,
        cold_od: d * gamma / gamma_nat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyResponseFit {
    pub fit: FitResult,
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    /// Non-positive amplitude or a width far beyond the sampled range.
    pub degenerate: bool,
}

/// Gaussian A·exp(−(Δ − c)²/(2σ²)) fit of efficiency against detuning.
pub fn fit_frequency_response(detunings: &[f64], efficiencies: &[f64]) -> Result<FrequencyResponseFit> {
    let (x, y) = sorted_pairs(detunings, efficiencies)?;
    if x.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            found: x.len(),
        });
    }
    let k = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).expect("non-empty");
    let span = x[x.len() - 1] - x[0];
    let above: Vec<f64> = x
        .iter()
        .zip(&y)
        .filter(|(_, v)| **v >= 0.5 * y[k])
        .map(|p| *p.0)
        .collect();
    let half_width = (above.last().unwrap_or(&0.0) - above.first().unwrap_or(&0.0)).max(span / x.len() as f64);
    let sigma0 = half_width / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let guess = [y[k], x[k], sigma0.max(f64::MIN_POSITIVE)];
    let fit = levenberg_marquardt(&Gaussian, &x, &y, &scaled_starts(&guess, &[2]))?.require_converged()?;
    let fwhm = 2.0 * (2.0 * 2f64.ln()).sqrt() * fit.params[2].abs();
    let amplitude = fit.params[0];
    Ok(FrequencyResponseFit {
        center: fit.params[1],
        fwhm,
        amplitude,
        degenerate: !(amplitude > 0.0) || !(fwhm < 10.0 * span),
        fit,
    })
}
