//! Dimensionless units, field containers and pulse constructors.
//!
//! Time is measured in units of 1/γ, the inverse excited-state coherence
//! decay rate, and frequency in units of γ. Every duration is an intensity
//! FWHM; the Rabi-frequency (amplitude) FWHM of a Gaussian is √2 larger.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of normalized time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_samples: usize,
}

impl TimeGrid {
    pub const MIN_SAMPLES: usize = 16;

    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::param(
                "t_end",
                format!("need t_end > t_start, got [{t_start}, {t_end}]"),
            ));
        }
        if n_samples < Self::MIN_SAMPLES {
            return Err(Error::param(
                "n_samples",
                format!("need at least {} samples, got {n_samples}", Self::MIN_SAMPLES),
            ));
        }
        Ok(Self {
            t_start,
            t_end,
            n_samples,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn at(&self, j: usize) -> f64 {
        // Fixed endpoints avoid accumulated drift at the last sample.
        if j + 1 == self.n_samples {
            self.t_end
        } else {
            self.t_start + j as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(move |j| self.at(j))
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }
}

/// Trapezoidal integral of uniformly spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Complex envelope sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalField {
    grid: TimeGrid,
    samples: Vec<Complex64>,
}

impl TemporalField {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::param(
                "samples",
                format!("length {} does not match grid ({})", samples.len(), grid.len()),
            ));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::param("samples", "non-finite sample"));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ∫|A|² dτ by the trapezoidal rule.
    pub fn energy(&self) -> f64 {
        trapezoid(&self.intensity(), self.grid.dt())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|a| a * c).collect(),
        }
    }

    /// Intensity-weighted mean time.
    pub fn centroid(&self) -> Option<f64> {
        let intensity = self.intensity();
        let total: f64 = intensity.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let first: f64 = intensity.iter().enumerate().map(|(j, w)| w * self.grid.at(j)).sum();
        Some(first / total)
    }

    /// Full width at half maximum of |A|², from linearly interpolated
    /// crossings on either side of the peak.
    pub fn intensity_fwhm(&self) -> Option<f64> {
        let intensity = self.intensity();
        let (t_lo, t_hi) = half_max_crossings(&intensity)?;
        Some((t_hi - t_lo) * self.grid.dt())
    }

    /// Linear interpolation of the envelope at an arbitrary time, zero
    /// outside the grid.
    pub fn interpolate(&self, t: f64) -> Complex64 {
        if !self.grid.contains(t) {
            return Complex64::new(0.0, 0.0);
        }
        let x = (t - self.grid.t_start) / self.grid.dt();
        let j = (x.floor() as usize).min(self.samples.len() - 2);
        let f = x - j as f64;
        self.samples[j] * (1.0 - f) + self.samples[j + 1] * f
    }
}

/// Fractional sample indices where `values` crosses half its maximum,
/// searching outward from the peak.
pub(crate) fn half_max_crossings(values: &[f64]) -> Option<(f64, f64)> {
    let (peak_idx, &peak) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak <= 0.0 {
        return None;
    }
    let half = 0.5 * peak;
    let mut lo = None;
    for j in (0..peak_idx).rev() {
        if values[j] < half {
            let f = (half - values[j]) / (values[j + 1] - values[j]);
            lo = Some(j as f64 + f);
            break;
        }
    }
    let mut hi = None;
    for j in peak_idx + 1..values.len() {
        if values[j] < half {
            let f = (values[j - 1] - half) / (values[j - 1] - values[j]);
            hi = Some((j - 1) as f64 + f);
            break;
        }
    }
    Some((lo?, hi?))
}

/// Gaussian control pulse, parameterized relative to the signal duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    /// Pulse area θ in units of π.
    pub area: f64,
    /// Delay of the control center after the signal center, in signal
    /// durations.
    pub delay: f64,
    /// Intensity FWHM in signal durations.
    pub duration: f64,
}

impl ControlPulse {
    pub fn new(area: f64, delay: f64, duration: f64) -> Result<Self> {
        let pulse = Self { area, delay, duration };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area >= 0.0 && self.area.is_finite()) {
            return Err(Error::param("area", format!("must be >= 0, got {}", self.area)));
        }
        if !self.delay.is_finite() {
            return Err(Error::param("delay", "must be finite"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::param("duration", format!("must be > 0, got {}", self.duration)));
        }
        Ok(())
    }

    pub fn with_area(self, area: f64) -> Self {
        Self { area, ..self }
    }

    /// Intensity FWHM in normalized time.
    pub fn intensity_fwhm(&self, signal_tau_gamma: f64) -> f64 {
        self.duration * signal_tau_gamma
    }

    /// Rabi-frequency FWHM in normalized time.
    pub fn amplitude_fwhm(&self, signal_tau_gamma: f64) -> f64 {
        std::f64::consts::SQRT_2 * self.intensity_fwhm(signal_tau_gamma)
    }

    /// Analytic peak Rabi frequency for which ∫Ω dτ = θπ on an infinite line.
    pub fn analytic_peak(&self, signal_tau_gamma: f64) -> f64 {
        self.area * PI * (4.0 * LN_2 / PI).sqrt() / self.amplitude_fwhm(signal_tau_gamma)
    }

    /// Rabi profile whose trapezoidal area on `grid` is exactly θπ.
    pub fn profile(&self, signal_tau_gamma: f64, signal_center: f64, grid: &TimeGrid) -> RabiProfile {
        let shape = RabiProfile {
            peak: 1.0,
            center: signal_center + self.delay * signal_tau_gamma,
            amplitude_fwhm: self.amplitude_fwhm(signal_tau_gamma),
        };
        let unit_area = trapezoid(&grid.times().map(|t| shape.at(t)).collect::<Vec<_>>(), grid.dt());
        let peak = if self.area == 0.0 || unit_area <= 0.0 {
            0.0
        } else {
            self.area * PI / unit_area
        };
        RabiProfile { peak, ..shape }
    }
}

/// Real Gaussian Rabi frequency Ω(τ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiProfile {
    pub peak: f64,
    pub center: f64,
    pub amplitude_fwhm: f64,
}

impl RabiProfile {
    pub fn zero() -> Self {
        Self {
            peak: 0.0,
            center: 0.0,
            amplitude_fwhm: 1.0,
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        if self.peak == 0.0 {
            return 0.0;
        }
        let x = (t - self.center) / self.amplitude_fwhm;
        self.peak * (-4.0 * LN_2 * x * x).exp()
    }

    /// Times beyond which Ω is below e⁻¹¹ of its peak.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.center - 2.0 * self.amplitude_fwhm,
            self.center + 2.0 * self.amplitude_fwhm,
        )
    }
}

/// Dimensionless memory configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Resonant optical depth.
    pub d: f64,
    /// Signal intensity FWHM times γ.
    pub tau_gamma: f64,
    /// Detuning Δ/γ.
    pub detuning: f64,
    /// Spin-wave decay rate γ_B/γ.
    #[serde(default)]
    pub gamma_b: f64,
}

impl MemoryParams {
    pub fn new(d: f64, tau_gamma: f64, detuning: f64, gamma_b: f64) -> Result<Self> {
        let m = Self {
            d,
            tau_gamma,
            detuning,
            gamma_b,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::param("d", format!("must be > 0, got {}", self.d)));
        }
        if !(self.tau_gamma > 0.0 && self.tau_gamma.is_finite()) {
            return Err(Error::param(
                "tau_gamma",
                format!("must be > 0, got {}", self.tau_gamma),
            ));
        }
        if !self.detuning.is_finite() {
            return Err(Error::param("detuning", "must be finite"));
        }
        if !(self.gamma_b >= 0.0 && self.gamma_b.is_finite()) {
            return Err(Error::param("gamma_b", format!("must be >= 0, got {}", self.gamma_b)));
        }
        Ok(())
    }

    pub fn with_detuning(self, detuning: f64) -> Self {
        Self { detuning, ..self }
    }

    /// Normalized complex decay rate γ̄ = 1 − iΔ/γ.
    pub fn gamma_bar(&self) -> Complex64 {
        Complex64::new(1.0, -self.detuning)
    }
}

/// Transform-limited Gaussian signal centered 25% into the grid.
pub fn gaussian_signal(tau_gamma: f64, grid: &TimeGrid) -> Result<TemporalField> {
    let center = grid.t_start() + 0.25 * grid.span();
    gaussian_signal_at(tau_gamma, center, grid)
}

/// Unit-energy Gaussian signal with intensity FWHM `tau_gamma` centered at
/// `center`.
pub fn gaussian_signal_at(tau_gamma: f64, center: f64, grid: &TimeGrid) -> Result<TemporalField> {
    if !(tau_gamma > 0.0 && tau_gamma.is_finite()) {
        return Err(Error::param("tau_gamma", format!("must be > 0, got {tau_gamma}")));
    }
    let lo = center - 4.0 * tau_gamma;
    let hi = center + 4.0 * tau_gamma;
    if lo < grid.t_start() || hi > grid.t_end() {
        return Err(Error::Window(format!(
            "signal needs [{lo}, {hi}], grid is [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let raw: Vec<Complex64> = grid
        .times()
        .map(|t| {
            let x = (t - center) / tau_gamma;
            Complex64::new((-2.0 * LN_2 * x * x).exp(), 0.0)
        })
        .collect();
    let field = TemporalField::new(*grid, raw)?;
    let norm = field.energy().sqrt();
    Ok(field.scaled(1.0 / norm))
}

/// Sampled Rabi frequency Ω(τ) of a control pulse.
pub fn control_envelope(
    pulse: &ControlPulse,
    signal_tau_gamma: f64,
    signal_center: f64,
    grid: &TimeGrid,
) -> Result<TemporalField> {
    pulse.validate()?;
    if !(signal_tau_gamma > 0.0) {
        return Err(Error::param("signal_tau_gamma", "must be > 0"));
    }
    let profile = pulse.profile(signal_tau_gamma, signal_center, grid);
    let (lo, hi) = profile.extent();
    if pulse.area > 0.0 && (lo < grid.t_start() || hi > grid.t_end()) {
        return Err(Error::Window(format!(
            "control needs [{lo}, {hi}], grid is [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let samples = grid.times().map(|t| Complex64::new(profile.at(t), 0.0)).collect();
    TemporalField::new(*grid, samples)
}
