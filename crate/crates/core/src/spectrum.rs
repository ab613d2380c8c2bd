//! Fourier pair between [`TemporalField`] and [`SpectralField`].
//!
//! Synthesis convention: A(τ) = (1/√2π) ∫ dω |A(ω)| e^{i[ωτ + φ(ω)]}.
//! On a grid of N points with spacing dt the angular frequencies are
//! ω_k = (k − ⌊N/2⌋)·2π/(N dt), so the spectrum is strictly increasing and
//! centered on zero.

use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::{TemporalField, TimeGrid};

/// Amplitude/phase spectrum on (possibly non-uniform) angular frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    omega: Vec<f64>,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
}

impl SpectralField {
    pub fn new(omega: Vec<f64>, amplitude: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        if omega.len() != amplitude.len() || omega.len() != phase.len() {
            return Err(Error::param("spectrum", "omega, amplitude and phase lengths differ"));
        }
        if omega.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                found: omega.len(),
            });
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("omega", "must be strictly increasing"));
        }
        if amplitude.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::param("amplitude", "must be finite and non-negative"));
        }
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("phase", "must be finite"));
        }
        Ok(Self {
            omega,
            amplitude,
            phase,
        })
    }

    pub fn from_complex(omega: Vec<f64>, values: &[Complex64]) -> Result<Self> {
        let amplitude = values.iter().map(|v| v.norm()).collect();
        let phase = values.iter().map(|v| v.arg()).collect();
        Self::new(omega, amplitude, phase)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn complex(&self) -> Vec<Complex64> {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a * a).collect()
    }

    /// ∫|A(ω)|² dω by the trapezoidal rule on the (possibly non-uniform) grid.
    pub fn energy(&self) -> f64 {
        let weights = trapezoid_weights(&self.omega);
        self.amplitude.iter().zip(&weights).map(|(a, w)| a * a * w).sum()
    }

    pub fn with_flat_phase(&self) -> Self {
        Self {
            phase: vec![0.0; self.len()],
            ..self.clone()
        }
    }

    pub fn with_phase(&self, phase: Vec<f64>) -> Result<Self> {
        Self::new(self.omega.clone(), self.amplitude.clone(), phase)
    }

    /// Intensity-weighted mean frequency.
    pub fn centroid(&self) -> Option<f64> {
        let weights = trapezoid_weights(&self.omega);
        let (mut m0, mut m1) = (0.0, 0.0);
        for ((w, a), o) in weights.iter().zip(&self.amplitude).zip(&self.omega) {
            m0 += w * a * a;
            m1 += w * a * a * o;
        }
        (m0 > 0.0).then(|| m1 / m0)
    }

    /// Shifts and scales the frequency axis: ω → (ω − offset)·scale. The
    /// amplitude is rescaled so ∫|A|²dω is unchanged.
    pub fn rescaled(&self, offset: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::param("scale", "must be > 0"));
        }
        let k = scale.recip().sqrt();
        Self::new(
            self.omega.iter().map(|o| (o - offset) * scale).collect(),
            self.amplitude.iter().map(|a| a * k).collect(),
            self.phase.clone(),
        )
    }

    /// Full width at half maximum of |A(ω)|².
    pub fn intensity_fwhm(&self) -> Option<f64> {
        let (lo, hi) = crate::field::half_max_crossings(&self.intensity())?;
        Some(interp_index(&self.omega, hi) - interp_index(&self.omega, lo))
    }
}

fn interp_index(xs: &[f64], idx: f64) -> f64 {
    let j = (idx.floor() as usize).min(xs.len() - 2);
    let f = idx - j as f64;
    xs[j] * (1.0 - f) + xs[j + 1] * f
}

pub(crate) fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for j in 0..n.saturating_sub(1) {
        let h = 0.5 * (x[j + 1] - x[j]);
        w[j] += h;
        w[j + 1] += h;
    }
    w
}

/// Angular frequencies conjugate to `grid`.
pub fn fft_frequencies(grid: &TimeGrid) -> Vec<f64> {
    let n = grid.len();
    let d_omega = 2.0 * PI / (n as f64 * grid.dt());
    let m = (n / 2) as f64;
    (0..n).map(|k| (k as f64 - m) * d_omega).collect()
}

fn check_uniform(grid: &TimeGrid) -> Result<()> {
    let dt = grid.dt();
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonUniformGrid);
    }
    Ok(())
}

/// Forward transform onto [`fft_frequencies`].
pub fn to_spectrum(field: &TemporalField) -> Result<SpectralField> {
    let grid = field.grid();
    check_uniform(grid)?;
    let n = grid.len();
    let m = n / 2;
    let dt = grid.dt();
    let t0 = grid.t_start();
    let omega = fft_frequencies(grid);

    // Σ_j A_j e^{-iω_k τ_j} = e^{-iω_k t0} · FFT[A_j e^{2πi m j/N}]_k
    let mut buf: Vec<Complex64> = field
        .samples()
        .iter()
        .enumerate()
        .map(|(j, a)| a * Complex64::from_polar(1.0, 2.0 * PI * ((m * j) % n) as f64 / n as f64))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = dt / (2.0 * PI).sqrt();
    let values: Vec<Complex64> = buf
        .iter()
        .zip(&omega)
        .map(|(b, &w)| b * Complex64::from_polar(scale, -w * t0))
        .collect();
    SpectralField::from_complex(omega, &values)
}

/// Inverse transform. Uses the FFT when `spec` lies on the grid's conjugate
/// frequencies, otherwise direct trapezoidal quadrature over ω.
pub fn to_time(spec: &SpectralField, grid: &TimeGrid) -> Result<TemporalField> {
    check_uniform(grid)?;
    let conjugate = fft_frequencies(grid);
    let d_omega = conjugate[1] - conjugate[0];
    let on_fft_grid = spec.len() == grid.len()
        && spec
            .omega()
            .iter()
            .zip(&conjugate)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * d_omega);
    let samples = if on_fft_grid {
        inverse_fft(spec, grid)
    } else {
        direct_synthesis(spec, grid)
    };
    TemporalField::new(*grid, samples)
}

fn inverse_fft(spec: &SpectralField, grid: &TimeGrid) -> Vec<Complex64> {
    let n = grid.len();
    let m = n / 2;
    let t0 = grid.t_start();
    let d_omega = 2.0 * PI / (n as f64 * grid.dt());
    let mut buf: Vec<Complex64> = spec
        .complex()
        .iter()
        .zip(spec.omega())
        .map(|(a, &w)| a * Complex64::from_polar(1.0, w * t0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = d_omega / (2.0 * PI).sqrt();
    buf.iter()
        .enumerate()
        .map(|(j, b)| b * Complex64::from_polar(scale, -2.0 * PI * ((m * j) % n) as f64 / n as f64))
        .collect()
}

fn direct_synthesis(spec: &SpectralField, grid: &TimeGrid) -> Vec<Complex64> {
    let weights = trapezoid_weights(spec.omega());
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    let dt = grid.dt();
    let t0 = grid.t_start();
    for ((a, &w), &wt) in spec.complex().iter().zip(spec.omega()).zip(&weights) {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let step = Complex64::from_polar(1.0, w * dt);
        let mut rot = a * wt * Complex64::from_polar(1.0, w * t0);
        // Re-anchor the recurrence periodically to bound rounding drift.
        for (j, o) in out.iter_mut().enumerate() {
            if j % 256 == 0 {
                rot = a * wt * Complex64::from_polar(1.0, w * grid.at(j));
            }
            *o += rot;
            rot *= step;
        }
    }
    let scale = 1.0 / (2.0 * PI).sqrt();
    out.iter().map(|o| o * scale).collect()
}

/// Builds a unit-energy temporal signal from a spectrum, optionally
/// discarding its phase first.
pub fn signal_from_spectrum(spec: &SpectralField, flat_phase: bool, grid: &TimeGrid) -> Result<TemporalField> {
    if spec.energy() <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let spec = if flat_phase {
        spec.with_flat_phase()
    } else {
        spec.clone()
    };
    let field = to_time(&spec, grid)?;
    let energy = field.energy();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok(field.scaled(energy.sqrt().recip()))
}

/// Unit of the abscissa column in a spectrum CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisUnit {
    RadPerSecond,
    Nanometer,
    Gigahertz,
}

impl AxisUnit {
    /// Detects the unit from a header such as `wavelength_nm`,
    /// `frequency[GHz]` or `omega_rad/s`.
    pub fn from_header(header: &str) -> Option<Self> {
        let h = header.to_ascii_lowercase();
        if h.contains("rad/s") || h.contains("rad_per_s") {
            Some(Self::RadPerSecond)
        } else if h.contains("ghz") {
            Some(Self::Gigahertz)
        } else if h.contains("nm") {
            Some(Self::Nanometer)
        } else {
            None
        }
    }

    /// Converts an abscissa value to angular frequency in rad/s.
    pub fn to_angular(self, x: f64) -> f64 {
        const C: f64 = 299_792_458.0;
        match self {
            Self::RadPerSecond => x,
            Self::Gigahertz => 2.0 * PI * x * 1e9,
            Self::Nanometer => 2.0 * PI * C / (x * 1e-9),
        }
    }

    /// |dx/dω| used to carry an amplitude density from x to ω.
    fn jacobian(self, x: f64) -> f64 {
        const C: f64 = 299_792_458.0;
        match self {
            Self::RadPerSecond => 1.0,
            Self::Gigahertz => 1.0 / (2.0 * PI * 1e9),
            Self::Nanometer => {
                let lambda = x * 1e-9;
                lambda * lambda / (2.0 * PI * C) * 1e9
            }
        }
    }
}

/// Reads a CSV whose first column is a unit-bearing axis. Returns the unit
/// and the raw numeric rows; unit conversion is left to the caller.
pub(crate) fn read_axis_csv<R: Read>(
    reader: R,
    min_columns: usize,
    max_columns: usize,
) -> Result<(AxisUnit, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < min_columns || headers.len() > max_columns {
        return Err(Error::Csv(format!(
            "expected {min_columns}..={max_columns} columns, header has {}",
            headers.len()
        )));
    }
    let unit = AxisUnit::from_header(&headers[0]).ok_or_else(|| {
        Error::Csv(format!(
            "first column header `{}` must declare its unit (rad/s, nm or GHz)",
            &headers[0]
        ))
    })?;
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!("row {} has {} columns", line + 2, record.len())));
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: {e}", line + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((unit, rows))
}

/// Reads a spectrum CSV (`axis, amplitude[, phase]`) into a [`SpectralField`]
/// on absolute angular frequency in rad/s.
pub fn read_spectrum_csv<R: Read>(reader: R) -> Result<SpectralField> {
    let (unit, rows) = read_axis_csv(reader, 2, 3)?;
    let mut points: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            let omega = unit.to_angular(r[0]);
            let amp = r[1].abs() * unit.jacobian(r[0]).sqrt();
            let phase = r.get(2).copied().unwrap_or(0.0);
            (omega, amp, phase)
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    SpectralField::new(
        points.iter().map(|p| p.0).collect(),
        points.iter().map(|p| p.1).collect(),
        points.iter().map(|p| p.2).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian_signal_at;

    fn grid() -> TimeGrid {
        TimeGrid::new(-5.0, 5.0, 1024).unwrap()
    }

    fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn gaussian_time_bandwidth() {
        let g = grid();
        let a = gaussian_signal_at(0.5, 0.3, &g).unwrap();
        let spec = to_spectrum(&a).unwrap();
        let fwhm = spec.intensity_fwhm().unwrap();
        let expected = 4.0 * std::f64::consts::LN_2 / 0.5;
        assert!((fwhm / expected - 1.0).abs() < 0.01, "{fwhm} vs {expected}");
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let g = grid();
        let mut samples = vec![Complex64::new(0.0, 0.0); g.len()];
        samples[300] = Complex64::new(1.0, 0.0);
        let spec = to_spectrum(&TemporalField::new(g, samples).unwrap()).unwrap();
        let a0 = spec.amplitude()[0];
        assert!(spec.amplitude().iter().all(|a| (a - a0).abs() < 1e-12));
    }

    #[test]
    fn round_trip() {
        let g = TimeGrid::new(-3.0, 7.0, 1000).unwrap();
        let samples: Vec<Complex64> = g
            .times()
            .map(|t| Complex64::new((-t * t).exp() * (1.0 + 0.3 * t), 0.2 * (-(t - 1.0).powi(2)).exp()))
            .collect();
        let a = TemporalField::new(g, samples).unwrap();
        let back = to_time(&to_spectrum(&a).unwrap(), &g).unwrap();
        assert!(rel_l2(back.samples(), a.samples()) < 1e-10);
    }

    #[test]
    fn direct_synthesis_matches_fft() {
        let g = grid();
        let a = gaussian_signal_at(0.7, -0.4, &g).unwrap();
        let spec = to_spectrum(&a).unwrap();
        let fft = inverse_fft(&spec, &g);
        let direct = direct_synthesis(&spec, &g);
        // Trapezoid weights halve the two edge samples, which are ~0 here.
        assert!(rel_l2(&direct, &fft) < 1e-9);
    }

    #[test]
    fn shifted_gaussian_has_linear_phase() {
        let g = grid();
        let a = gaussian_signal_at(0.5, 1.0, &g).unwrap();
        let spec = to_spectrum(&a).unwrap();
        // A(τ - 1) ↔ A(ω) e^{-iω}
        let k = (0..spec.len())
            .min_by(|&a, &b| (spec.omega()[a] - 2.0).abs().total_cmp(&(spec.omega()[b] - 2.0).abs()))
            .unwrap();
        let w = spec.omega()[k];
        let expected = Complex64::from_polar(1.0, -w).arg();
        assert!((spec.phase()[k] - expected).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_spectrum() {
        assert!(SpectralField::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(SpectralField::new(vec![0.0, 1.0], vec![-1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn flat_phase_discards_chirp() {
        let g = grid();
        let omega: Vec<f64> = (0..401).map(|k| -10.0 + 0.05 * k as f64).collect();
        let amp: Vec<f64> = omega.iter().map(|w| (-w * w / 8.0).exp()).collect();
        let chirp: Vec<f64> = omega.iter().map(|w| 0.3 * w * w).collect();
        let plain = SpectralField::new(omega.clone(), amp.clone(), vec![0.0; 401]).unwrap();
        let chirped = SpectralField::new(omega, amp, chirp).unwrap();
        let a = signal_from_spectrum(&plain, true, &g).unwrap();
        let b = signal_from_spectrum(&chirped, true, &g).unwrap();
        assert_eq!(a, b);
        assert!((a.energy() - 1.0).abs() < 1e-12);
        // Transform limit: the chirped version is longer.
        let c = signal_from_spectrum(&chirped, false, &g).unwrap();
        assert!(c.intensity_fwhm().unwrap() > a.intensity_fwhm().unwrap());
    }

    #[test]
    fn zero_spectrum_is_rejected() {
        let spec = SpectralField::new(vec![0.0, 1.0, 2.0], vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert!(matches!(
            signal_from_spectrum(&spec, true, &grid()),
            Err(Error::ZeroEnergy)
        ));
    }

    #[test]
    fn csv_units() {
        assert_eq!(AxisUnit::from_header("wavelength_nm"), Some(AxisUnit::Nanometer));
        assert_eq!(AxisUnit::from_header("frequency[GHz]"), Some(AxisUnit::Gigahertz));
        assert_eq!(AxisUnit::from_header("omega rad/s"), Some(AxisUnit::RadPerSecond));
        assert_eq!(AxisUnit::from_header("x"), None);
        let csv = "wavelength_nm,amplitude\n553.6,0.5\n553.5,1.0\n553.4,0.5\n";
        let spec = read_spectrum_csv(csv.as_bytes()).unwrap();
        assert_eq!(spec.len(), 3);
        assert!(spec.omega()[0] < spec.omega()[2]);
        assert!(read_spectrum_csv("x,amplitude\n1,2\n".as_bytes()).is_err());
        assert!(read_spectrum_csv("frequency_GHz\n1\n".as_bytes()).is_err());
    }
}
