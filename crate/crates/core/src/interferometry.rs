//! Spectral interferometry: the two-pulse interference forward model,
//! per-sample phase reconstruction against a known reference, temporal
//! phase analysis, and the phase-diffusion visibility model.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{TemporalField, TimeGrid};
use crate::fit::{levenberg_marquardt, scaled_starts, sorted_pairs, FitResult, Visibility};
use crate::spectrum::{read_axis_csv, to_time, SpectralField};

/// Minimum samples per fringe period for a resolvable interferogram.
pub const MIN_SAMPLES_PER_FRINGE: f64 = 4.0;
/// Support is where both arm magnitudes exceed this fraction of their peak.
pub const SUPPORT_FLOOR: f64 = 0.05;
pub const MIN_SUPPORT: usize = 10;
/// Reconstructions with more clamped samples than this are low-confidence.
pub const MAX_CLAMP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram {
    omega: Vec<f64>,
    s: Vec<f64>,
    delta_tau: f64,
}

impl Interferogram {
    pub fn new(omega: Vec<f64>, s: Vec<f64>, delta_tau: f64) -> Result<Self> {
        if omega.len() != s.len() {
            return Err(Error::GridMismatch);
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
        if let Some(v) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param("s", format!("must be finite and non-negative, got {v}")));
        }
        if !delta_tau.is_finite() {
            return Err(Error::param("delta_tau", "must be finite"));
        }
        let ig = Self { omega, s, delta_tau };
        let spf = ig.samples_per_fringe();
        if spf < MIN_SAMPLES_PER_FRINGE {
            return Err(Error::UnresolvableFringes {
                samples_per_fringe: spf,
            });
        }
        Ok(ig)
    }

    /// Reads `axis, counts` with a unit-bearing axis header; ω in rad/s.
    pub fn from_csv<R: Read>(reader: R, delta_tau: f64) -> Result<Self> {
        let (omega, s) = read_counts_csv(reader)?;
        Self::new(omega, s, delta_tau)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn delta_tau(&self) -> f64 {
        self.delta_tau
    }

    /// Fringe period 2π/|Δτ| over the widest sample spacing.
    pub fn samples_per_fringe(&self) -> f64 {
        let widest = self.omega.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        if self.delta_tau == 0.0 {
            f64::INFINITY
        } else {
            2.0 * PI / self.delta_tau.abs() / widest
        }
    }
}

/// Reads a two-column `axis, counts` CSV (no density conversion), sorted
/// by angular frequency in rad/s.
pub fn read_counts_csv<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let (unit, rows) = read_axis_csv(reader, 2, 2)?;
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (unit.to_angular(r[0]), r[1])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts.into_iter().unzip())
}

/// S(ω) = |A₁|² + |A₂|² + 2|A₁||A₂|·sin(ωΔτ + φ₂ − φ₁).
pub fn forward_interferogram(a1: &SpectralField, a2: &SpectralField, delta_tau: f64) -> Result<Interferogram> {
    forward_interferogram_with_visibility(a1, a2, delta_tau, 1.0)
}

/// As [`forward_interferogram`] with the fringe term scaled by `visibility`.
pub fn forward_interferogram_with_visibility(
    a1: &SpectralField,
    a2: &SpectralField,
    delta_tau: f64,
    visibility: f64,
) -> Result<Interferogram> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::param(
            "visibility",
            format!("must lie in [0, 1], got {visibility}"),
        ));
    }
    if a1.omega() != a2.omega() {
        return Err(Error::GridMismatch);
    }
    let s = (0..a1.len())
        .map(|k| {
            let (m1, m2) = (a1.amplitude()[k], a2.amplitude()[k]);
            let psi = a1.omega()[k] * delta_tau + a2.phase()[k] - a1.phase()[k];
            (m1 * m1 + m2 * m2 + 2.0 * visibility * m1 * m2 * psi.sin()).max(0.0)
        })
        .collect();
    Interferogram::new(a1.omega().to_vec(), s, delta_tau)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReconstruction {
    pub omega: Vec<f64>,
    /// |A₂| as supplied.
    pub magnitude: Vec<f64>,
    /// φ₂ = φ_dif + φ₁ on support, `None` elsewhere.
    pub phase: Vec<Option<f64>>,
    pub phi_dif: Vec<Option<f64>>,
    /// Amount by which |sin_term| exceeded 1 before clamping.
    pub excess: Vec<f64>,
    pub clamp_fraction: f64,
    pub low_confidence: bool,
}

impl PhaseReconstruction {
    pub fn in_support(&self) -> Vec<bool> {
        self.phase.iter().map(Option::is_some).collect()
    }

    pub fn support_len(&self) -> usize {
        self.phase.iter().filter(|p| p.is_some()).count()
    }

    /// The reconstructed A₂ restricted to the support.
    pub fn to_spectral_field(&self) -> Result<SpectralField> {
        let (mut w, mut a, mut p) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..self.omega.len() {
            if let Some(ph) = self.phase[k] {
                w.push(self.omega[k]);
                a.push(self.magnitude[k]);
                p.push(ph);
            }
        }
        SpectralField::new(w, a, p)
    }

    /// CSV with columns `omega, magnitude, phase_rad, in_support`, one row
    /// per support sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega", "magnitude", "phase_rad", "in_support"])?;
        for k in 0..self.omega.len() {
            if let Some(ph) = self.phase[k] {
                w.write_record([
                    self.omega[k].to_string(),
                    self.magnitude[k].to_string(),
                    ph.to_string(),
                    "true".to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Recovers the phase of A₂ from an interferogram, both arm magnitudes and
/// the reference phase φ₁.
pub fn reconstruct_phase(
    ig: &Interferogram,
    a1_mag: &[f64],
    a2_mag: &[f64],
    phi1: &[f64],
) -> Result<PhaseReconstruction> {
    let n = ig.omega.len();
    if a1_mag.len() != n || a2_mag.len() != n || phi1.len() != n {
        return Err(Error::GridMismatch);
    }
    let peak1 = a1_mag.iter().cloned().fold(0.0, f64::max);
    let peak2 = a2_mag.iter().cloned().fold(0.0, f64::max);
    let support: Vec<usize> = (0..n)
        .filter(|&k| {
            peak1 > 0.0 && peak2 > 0.0 && a1_mag[k] > SUPPORT_FLOOR * peak1 && a2_mag[k] > SUPPORT_FLOOR * peak2
        })
        .collect();
    if support.len() < MIN_SUPPORT {
        return Err(Error::SupportTooSmall {
            found: support.len(),
            needed: MIN_SUPPORT,
        });
    }

    let mut excess = vec![0.0; n];
    let mut clamped = 0usize;
    // Principal arcsine of the fringe term and the carrier ωΔτ per support sample.
    let mut principal = Vec::with_capacity(support.len());
    for &k in &support {
        let (m1, m2) = (a1_mag[k], a2_mag[k]);
        let raw = (ig.s[k] - m1 * m1 - m2 * m2) / (2.0 * m1 * m2);
        if raw.abs() > 1.0 {
            excess[k] = raw.abs() - 1.0;
            clamped += 1;
        }
        principal.push((raw.clamp(-1.0, 1.0).asin(), ig.omega[k] * ig.delta_tau));
    }

    let start = (0..support.len())
        .max_by(|&i, &j| {
            let (ki, kj) = (support[i], support[j]);
            (a1_mag[ki] * a2_mag[ki]).total_cmp(&(a1_mag[kj] * a2_mag[kj]))
        })
        .expect("non-empty support");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for upper in [false, true] {
        let (score, phi) = unwrap_from(&principal, start, upper);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, phi));
        }
    }
    let phi_support = best.expect("two candidates").1;

    let mut phase = vec![None; n];
    let mut phi_dif = vec![None; n];
    for (i, &k) in support.iter().enumerate() {
        phi_dif[k] = Some(phi_support[i]);
        phase[k] = Some(phi_support[i] + phi1[k]);
    }
    let clamp_fraction = clamped as f64 / support.len() as f64;
    Ok(PhaseReconstruction {
        omega: ig.omega.clone(),
        magnitude: a2_mag.to_vec(),
        phase,
        phi_dif,
        excess,
        clamp_fraction,
        low_confidence: clamp_fraction > MAX_CLAMP_FRACTION,
    })
}

/// Candidate φ_dif values at one sample: both arcsine branches with the
/// carrier removed, shifted by multiples of 2π towards `target`.
fn nearest_candidate(asin: f64, carrier: f64, target: f64) -> f64 {
    [asin - carrier, PI - asin - carrier]
        .into_iter()
        .map(|c| c + 2.0 * PI * ((target - c) / (2.0 * PI)).round())
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .expect("two branches")
}

/// Walks outwards from `start`, choosing at each sample the branch closest
/// to the linear extrapolation of the two previous samples. Returns the
/// total prediction miss and the unwrapped φ_dif.
fn unwrap_from(principal: &[(f64, f64)], start: usize, upper: bool) -> (f64, Vec<f64>) {
    let n = principal.len();
    let mut phi = vec![0.0; n];
    let (a0, c0) = principal[start];
    let first = if upper { PI - a0 - c0 } else { a0 - c0 };
    phi[start] = first - 2.0 * PI * (first / (2.0 * PI)).round();
    let mut score = 0.0;
    for dir in [1isize, -1] {
        let mut prev: Option<f64> = None;
        let mut cur = phi[start];
        let mut i = start as isize + dir;
        while i >= 0 && (i as usize) < n {
            let target = prev.map_or(cur, |p| 2.0 * cur - p);
            let (a, c) = principal[i as usize];
            let v = nearest_candidate(a, c, target);
            score += (v - target).abs();
            phi[i as usize] = v;
            prev = Some(cur);
            cur = v;
            i += dir;
        }
    }
    (score, phi)
}

/// RMS difference of two phase curves after removing the best common
/// offset of 2π·n.
pub fn phase_rms_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let mean = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    let shift = 2.0 * PI * (mean / (2.0 * PI)).round();
    (a.iter().zip(b).map(|(x, y)| (x - y - shift).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Temporal field with a quadratic fit c₀ + c₁τ + c₂τ² of its phase over
/// the intensity FWHM window.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalPhase {
    pub field: TemporalField,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub window: (f64, f64),
}

pub fn reconstruct_time_domain(a2: &SpectralField, grid: &TimeGrid) -> Result<TemporalPhase> {
    let field = to_time(a2, grid)?;
    let intensity = field.intensity();
    let (peak_idx, peak) = intensity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("grid has samples");
    if !(peak > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let mut lo = peak_idx;
    while lo > 0 && intensity[lo - 1] >= 0.5 * peak {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < intensity.len() && intensity[hi + 1] >= 0.5 * peak {
        hi += 1;
    }
    if hi - lo + 1 < 3 {
        return Err(Error::param(
            "grid",
            format!("FWHM window holds {} samples, need at least 3", hi - lo + 1),
        ));
    }
    let samples = field.samples();
    // Unwrap outward from the peak.
    let mut phase = vec![0.0; hi - lo + 1];
    phase[peak_idx - lo] = samples[peak_idx].arg();
    for j in peak_idx + 1..=hi {
        let prev = phase[j - 1 - lo];
        phase[j - lo] = prev + (samples[j] * samples[j - 1].conj()).arg();
    }
    for j in (lo..peak_idx).rev() {
        let next = phase[j + 1 - lo];
        phase[j - lo] = next + (samples[j] * samples[j + 1].conj()).arg();
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for j in lo..=hi {
        let t = grid.at(j);
        let row = Vector3::new(1.0, t, t * t);
        ata += row * row.transpose();
        atb += row * phase[j - lo];
    }
    let c = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::RankDeficient("temporal phase window".into()))?;
    Ok(TemporalPhase {
        field,
        c0: c[0],
        c1: c[1],
        c2: c[2],
        window: (grid.at(lo), grid.at(hi)),
    })
}

/// Phase spread σ(t) = f₁·t^f₂ behind the time-averaged visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityModel {
    pub f1: f64,
    pub f2: f64,
}

impl VisibilityModel {
    pub fn new(f1: f64, f2: f64) -> Result<Self> {
        if !(f1 >= 0.0) || !f1.is_finite() {
            return Err(Error::param("f1", format!("must be finite and >= 0, got {f1}")));
        }
        if !f2.is_finite() {
            return Err(Error::param("f2", "must be finite"));
        }
        Ok(Self { f1, f2 })
    }

    pub fn sigma(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.f1 * t.powf(self.f2)
        } else {
            0.0
        }
    }
}

/// V̄(t) = exp(−2σ(t)²).
pub fn visibility_closed_form(model: &VisibilityModel, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be >= 0, got {t}")));
    }
    Ok((-2.0 * model.sigma(t).powi(2)).exp())
}

/// Visibility (Ī_max − Ī_min)/(Ī_max + Ī_min) for a Gaussian phase
/// distribution of width `sigma`, by Simpson quadrature of the fringe
/// maximum cos²φ and minimum sin²φ.
pub fn visibility_quadrature(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", format!("must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(1.0);
    }
    if !sigma.is_finite() {
        return Ok(0.0);
    }
    const N: usize = 8000;
    let half = 10.0 * sigma;
    let h = 2.0 * half / N as f64;
    let (mut i_max, mut i_min) = (0.0, 0.0);
    for j in 0..=N {
        let phi = -half + j as f64 * h;
        let w = if j == 0 || j == N {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p = (-0.5 * (phi / sigma).powi(2)).exp();
        i_max += w * p * (phi + PI / 2.0).sin().powi(2);
        i_min += w * p * phi.sin().powi(2);
    }
    Ok((i_max - i_min) / (i_max + i_min))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityFit {
    pub model: VisibilityModel,
    pub fit: FitResult,
}

/// Least-squares fit of V̄(t) = exp(−2(f₁t^f₂)²).
pub fn fit_visibility(times: &[f64], visibilities: &[f64]) -> Result<VisibilityFit> {
    let (t, v) = sorted_pairs(times, visibilities)?;
    if t.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            found: t.len(),
        });
    }
    if let Some(x) = t.iter().find(|x| **x < 0.0) {
        return Err(Error::param("times", format!("must be >= 0, got {x}")));
    }
    if let Some(x) = v.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
        return Err(Error::param("visibilities", format!("must lie in (0, 1], got {x}")));
    }
    if v.iter().all(|x| *x == 1.0) {
        // No decay: f1 = 0 and f2 is unidentifiable.
        let fit = FitResult {
            model: "visibility".into(),
            param_names: vec!["f1".into(), "f2".into()],
            params: vec![0.0, 0.0],
            std_errs: vec![0.0, f64::NAN],
            residual_norm: 0.0,
            converged: true,
            iterations: 0,
        };
        return Ok(VisibilityFit {
            model: VisibilityModel { f1: 0.0, f2: 0.0 },
            fit,
        });
    }
    let guess = visibility_guess(&t, &v);
    let mut fit = levenberg_marquardt(&Visibility, &t, &v, &scaled_starts(&guess, &[0, 1]))?.require_converged()?;
    fit.params[0] = fit.params[0].abs();
    Ok(VisibilityFit {
        model: VisibilityModel::new(fit.params[0], fit.params[1])?,
        fit,
    })
}

/// Linearization ln(−ln V̄/2)/2 = ln f₁ + f₂ ln t over points with V̄ < 1.
fn visibility_guess(t: &[f64], v: &[f64]) -> [f64; 2] {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(ti, vi)| **ti > 0.0 && **vi < 1.0)
        .map(|(ti, vi)| (ti.ln(), 0.5 * (-vi.ln() / 2.0).ln()))
        .collect();
    match crate::fit::fit_line(
        &pts.iter().map(|p| p.0).collect::<Vec<_>>(),
        &pts.iter().map(|p| p.1).collect::<Vec<_>>(),
    ) {
        Ok(line) if line.params[1].is_finite() => [line.params[0].exp(), line.params[1]],
        _ => {
            let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len().max(1) as f64;
            [mean.exp(), 0.5]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::to_spectrum;
    use num_complex::Complex64;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    fn gaussian_field(omega: &[f64], center: f64, width: f64, scale: f64, phase: impl Fn(f64) -> f64) -> SpectralField {
        SpectralField::new(
            omega.to_vec(),
            omega
                .iter()
                .map(|w| scale * (-(w - center).powi(2) / (2.0 * width * width)).exp())
                .collect(),
            omega.iter().map(|&w| phase(w)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_arm_gives_its_spectrum() {
        let w = grid(401, -10.0, 10.0);
        let a1 = gaussian_field(&w, 0.0, 3.0, 1.0, |_| 0.0);
        let a2 = gaussian_field(&w, 0.0, 3.0, 0.0, |_| 0.0);
        let ig = forward_interferogram(&a1, &a2, 5.0).unwrap();
        for (s, a) in ig.s().iter().zip(a1.amplitude()) {
            assert!((s - a * a).abs() < 1e-15);
        }
    }

    #[test]
    fn full_fringes() {
        let dt = 2.0;
        let w = vec![-PI / 4.0 - 0.1, -PI / 4.0, 0.0, PI / 4.0, PI / 4.0 + 0.1];
        let a = SpectralField::new(w.clone(), vec![0.7; 5], vec![0.3; 5]).unwrap();
        let ig = forward_interferogram(&a, &a, dt).unwrap();
        assert!((ig.s()[3] - 4.0 * 0.49).abs() < 1e-12);
        assert!(ig.s()[1].abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = gaussian_field(&grid(101, -5.0, 5.0), 0.0, 1.0, 1.0, |_| 0.0);
        let b = gaussian_field(&grid(101, -5.0, 5.1), 0.0, 1.0, 1.0, |_| 0.0);
        assert!(matches!(forward_interferogram(&a, &b, 1.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn unresolvable_fringes_rejected() {
        let w = grid(101, -5.0, 5.0);
        // Period 2π/20 ≈ 0.31 over a 0.1 spacing: ~3 samples per fringe.
        match Interferogram::new(w, vec![1.0; 101], 20.0) {
            Err(Error::UnresolvableFringes { samples_per_fringe }) => assert!(samples_per_fringe < 4.0),
            other => panic!("{other:?}"),
        }
    }

    fn round_trip(a1: &SpectralField, a2: &SpectralField, dt: f64) -> (PhaseReconstruction, f64) {
        let ig = forward_interferogram(a1, a2, dt).unwrap();
        let rec = reconstruct_phase(&ig, a1.amplitude(), a2.amplitude(), a1.phase()).unwrap();
        let (mut got, mut want) = (Vec::new(), Vec::new());
        for k in 0..a2.len() {
            if let Some(p) = rec.phase[k] {
                got.push(p);
                want.push(a2.phase()[k]);
            }
        }
        let err = phase_rms_error(&got, &want);
        (rec, err)
    }

    #[test]
    fn quadratic_phase_round_trip() {
        let w = grid(2001, -10.0, 10.0);
        let a1 = gaussian_field(&w, 0.0, 3.0, 1.0, |x| 0.2 * x);
        let a2 = gaussian_field(&w, 0.5, 2.5, 0.8, |x| 0.5 * (x - 0.5).powi(2));
        let (rec, err) = round_trip(&a1, &a2, 20.0);
        assert!(err < 1e-2, "rms {err}");
        assert_eq!(rec.clamp_fraction, 0.0);
        assert!(!rec.low_confidence);
    }

    #[test]
    fn zero_difference_returns_reference_phase() {
        let w = grid(1001, -8.0, 8.0);
        let a1 = gaussian_field(&w, 0.0, 2.0, 1.0, |x| 0.1 * x * x);
        let (rec, err) = round_trip(&a1, &a1, 12.0);
        assert!(err < 1e-6, "rms {err}");
        for d in rec.phi_dif.iter().flatten() {
            assert!((d - 2.0 * PI * (d / (2.0 * PI)).round()).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_amplitudes_still_exact() {
        let w = grid(1501, -9.0, 9.0);
        let a1 = gaussian_field(&w, 0.0, 2.5, 1.0, |_| 0.0);
        let a2 = gaussian_field(&w, 0.0, 2.5, 0.25, |x| (0.7 * x).sin());
        let (_, err) = round_trip(&a1, &a2, -15.0);
        assert!(err < 1e-6, "rms {err}");
    }

    #[test]
    fn support_rules() {
        let w = grid(401, -10.0, 10.0);
        let a1 = gaussian_field(&w, 0.0, 3.0, 1.0, |_| 0.0);
        let zero = vec![0.0; 401];
        let ig = Interferogram::new(w.clone(), a1.intensity(), 5.0).unwrap();
        assert!(matches!(
            reconstruct_phase(&ig, a1.amplitude(), &zero, a1.phase()),
            Err(Error::SupportTooSmall { found: 0, .. })
        ));
        let narrow = gaussian_field(&w, 0.0, 0.05, 1.0, |_| 0.0);
        assert!(matches!(
            reconstruct_phase(&ig, a1.amplitude(), narrow.amplitude(), a1.phase()),
            Err(Error::SupportTooSmall { .. })
        ));
    }

    #[test]
    fn inconsistent_data_is_flagged() {
        let w = grid(801, -8.0, 8.0);
        let a1 = gaussian_field(&w, 0.0, 3.0, 1.0, |_| 0.0);
        let ig = forward_interferogram(&a1, &a1, 10.0).unwrap();
        // Claimed magnitudes half the true ones: fringe term overshoots.
        let half: Vec<f64> = a1.amplitude().iter().map(|a| 0.5 * a).collect();
        let rec = reconstruct_phase(&ig, &half, &half, a1.phase()).unwrap();
        assert!(rec.clamp_fraction > MAX_CLAMP_FRACTION);
        assert!(rec.low_confidence);
        assert!(rec.excess.iter().any(|e| *e > 0.0));
    }

    #[test]
    fn csv_rows_match_support() {
        let w = grid(801, -8.0, 8.0);
        let a1 = gaussian_field(&w, 0.0, 2.0, 1.0, |_| 0.0);
        let (rec, _) = round_trip(&a1, &a1, 10.0);
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), rec.support_len() + 1);
        assert!(text.starts_with("omega,magnitude,phase_rad,in_support"));
    }

    fn conjugate_spectrum(tg: &TimeGrid, width: f64, shift: f64, beta: f64) -> SpectralField {
        let base = to_spectrum(&TemporalField::zeros(*tg)).unwrap();
        let w = base.omega().to_vec();
        let vals: Vec<Complex64> = w
            .iter()
            .map(|&x| {
                let u = x - shift;
                Complex64::from_polar((-u * u / (2.0 * width * width)).exp(), 0.5 * beta * u * u)
            })
            .collect();
        SpectralField::from_complex(w, &vals).unwrap()
    }

    #[test]
    fn transform_limited_has_flat_temporal_phase() {
        let tg = TimeGrid::new(-20.0, 20.0, 2048).unwrap();
        let r = reconstruct_time_domain(&conjugate_spectrum(&tg, 2.0, 0.0, 0.0), &tg).unwrap();
        assert!(r.c1.abs() < 1e-3 && r.c2.abs() < 1e-3, "{} {}", r.c1, r.c2);
    }

    #[test]
    fn spectral_shift_gives_linear_phase() {
        let tg = TimeGrid::new(-20.0, 20.0, 2048).unwrap();
        let r = reconstruct_time_domain(&conjugate_spectrum(&tg, 2.0, 1.5, 0.0), &tg).unwrap();
        assert!((r.c1 - 1.5).abs() < 0.015, "{}", r.c1);
    }

    #[test]
    fn chirp_matches_gaussian_algebra() {
        let tg = TimeGrid::new(-20.0, 20.0, 2048).unwrap();
        let (sigma, beta): (f64, f64) = (2.0, 0.8);
        let r = reconstruct_time_domain(&conjugate_spectrum(&tg, sigma, 0.0, beta), &tg).unwrap();
        let expected = -beta / (2.0 * (sigma.powi(-4) + beta * beta));
        assert!(((r.c2 - expected) / expected).abs() < 0.02, "{} vs {expected}", r.c2);
    }

    #[test]
    fn visibility_closed_form_values() {
        let m = VisibilityModel::new(0.06, 0.3).unwrap();
        assert_eq!(visibility_closed_form(&m, 0.0).unwrap(), 1.0);
        assert!((visibility_closed_form(&m, 1.0).unwrap() - (-2.0 * 0.0036f64).exp()).abs() < 1e-15);
        assert!((visibility_closed_form(&m, 1.0).unwrap() - 0.99283).abs() < 5e-6);
        let mut last = 1.0;
        for k in 1..50 {
            let v = visibility_closed_form(&m, k as f64 * 10.0).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(visibility_closed_form(&m, -1.0).is_err());
        assert!(VisibilityModel::new(-0.1, 0.3).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for k in 0..=60 {
            let s = 0.05 * k as f64;
            let q = visibility_quadrature(s).unwrap();
            assert!((q - (-2.0 * s * s).exp()).abs() < 1e-6, "sigma {s}");
        }
        assert!(visibility_quadrature(1e3).unwrap().abs() < 1e-6);
        assert_eq!(visibility_quadrature(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn visibility_fit_edge_cases() {
        let r = fit_visibility(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.model.f1, 0.0);
        assert!(matches!(
            fit_visibility(&[1.0, 2.0], &[0.9, 0.8]),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(fit_visibility(&[1.0, 2.0, 3.0], &[0.9, 1.2, 0.8]).is_err());
    }

    #[test]
    fn visibility_fit_exact() {
        let m = VisibilityModel::new(0.06, 0.3).unwrap();
        let t: Vec<f64> = (0..12).map(|k| 10f64.powf(k as f64 / 3.0)).collect();
        let v: Vec<f64> = t.iter().map(|&x| visibility_closed_form(&m, x).unwrap()).collect();
        let r = fit_visibility(&t, &v).unwrap();
        assert!(((r.model.f1 - 0.06) / 0.06).abs() < 1e-6);
        assert!(((r.model.f2 - 0.3) / 0.3).abs() < 1e-6);
    }
}
