//! Protocol presets, the asymptotic efficiency bound, adiabaticity and
//! control pulse-area scans.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ControlPulse, MemoryParams};
use crate::solver::{simulate, GridPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Absorb-then-transfer.
    Att,
    /// Autler-Townes splitting.
    Ats,
    /// Electromagnetically induced transparency.
    Eit,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Att, Protocol::Ats, Protocol::Eit];

    pub fn preset(self) -> RegimePreset {
        let (d, tau_gamma, area, delay, duration) = match self {
            Protocol::Att => (5.0, 0.1, 1.0789, 0.76176, 0.52137),
            Protocol::Ats => (7.5, 0.4, 2.63177, -0.23817, 1.23829),
            Protocol::Eit => (50.0, 1.5, 10.05845, -0.54359, 1.33658),
        };
        RegimePreset {
            name: self,
            memory: MemoryParams {
                d,
                tau_gamma,
                detuning: 0.0,
                gamma_b: 0.0,
            },
            control: ControlPulse { area, delay, duration },
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Att => "ATT",
            Protocol::Ats => "ATS",
            Protocol::Eit => "EIT",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ATT" => Ok(Protocol::Att),
            "ATS" => Ok(Protocol::Ats),
            "EIT" => Ok(Protocol::Eit),
            _ => Err(Error::param("protocol", format!("expected ATT, ATS or EIT, got `{s}`"))),
        }
    }
}

/// A memory regime M = (d, τγ) together with its optimal Gaussian control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePreset {
    pub name: Protocol,
    pub memory: MemoryParams,
    pub control: ControlPulse,
}

pub fn regime_presets() -> Vec<RegimePreset> {
    Protocol::ALL.iter().map(|p| p.preset()).collect()
}

/// Asymptotic optimal storage efficiency max(0, 1 − 2.9/d).
pub fn eta_opt(d: f64) -> Result<f64> {
    if !(d > 0.0) || d.is_nan() {
        return Err(Error::param("d", format!("must be > 0, got {d}")));
    }
    Ok((1.0 - 2.9 / d).max(0.0))
}

/// Free-space memory adiabaticity χ = d·τγ.
pub fn adiabaticity(memory: &MemoryParams) -> f64 {
    memory.d * memory.tau_gamma
}

/// Vertex of the parabola through three points.
pub fn quadratic_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let d01 = (y[1] - y[0]) / (x1 - x0);
    let d12 = (y[2] - y[1]) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a.is_finite()) || a == 0.0 {
        return None;
    }
    let b = d01 - a * (x0 + x1);
    let xv = -b / (2.0 * a);
    let yv = y[0] + (xv - x0) * (d01 + a * (xv - x1));
    Some((xv, yv))
}

/// One point of a pulse-area scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaPoint {
    pub theta_over_pi: f64,
    pub eta_store: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaSweep {
    pub points: Vec<AreaPoint>,
    /// (θ/π, η_store) of the first local maximum, interpolated.
    pub first_max: Option<(f64, f64)>,
    /// (θ/π, η_store) of the first sampled local minimum after it.
    pub next_min: Option<(f64, f64)>,
}

impl AreaSweep {
    pub fn is_partial(&self) -> bool {
        self.points.iter().any(|p| p.eta_store.is_none())
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.eta_store.is_none()).count()
    }
}

/// Storage efficiency as a function of control pulse area (in units of π).
/// Points run in parallel; output order follows `areas`.
pub fn sweep_pulse_area(
    memory: &MemoryParams,
    control_template: &ControlPulse,
    areas: &[f64],
    grid: &GridPolicy,
) -> Result<AreaSweep> {
    if areas.is_empty() {
        return Err(Error::param("areas", "must not be empty"));
    }
    if let Some(a) = areas.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::param("areas", format!("must be non-negative, got {a}")));
    }
    memory.validate()?;
    let points: Vec<AreaPoint> = areas
        .par_iter()
        .map(|&area| {
            let pulse = control_template.with_area(area);
            match simulate(memory, &pulse, false, grid) {
                Ok(r) => AreaPoint {
                    theta_over_pi: area,
                    eta_store: Some(r.eta_store),
                    error: None,
                },
                Err(e) => AreaPoint {
                    theta_over_pi: area,
                    eta_store: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let (first_max, next_min) = first_extrema(&points);
    Ok(AreaSweep {
        points,
        first_max,
        next_min,
    })
}

/// Scans the successful points in order of increasing area.
fn first_extrema(points: &[AreaPoint]) -> (Option<(f64, f64)>, Option<(f64, f64)>) {
    let mut curve: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.eta_store.map(|e| (p.theta_over_pi, e)))
        .collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    curve.dedup_by(|a, b| a.0 == b.0);
    let n = curve.len();
    let peak = (1..n.saturating_sub(1)).find(|&k| curve[k].1 >= curve[k - 1].1 && curve[k].1 > curve[k + 1].1);
    let Some(k) = peak else {
        return (None, None);
    };
    let xs = [curve[k - 1].0, curve[k].0, curve[k + 1].0];
    let ys = [curve[k - 1].1, curve[k].1, curve[k + 1].1];
    let first_max = quadratic_vertex(xs, ys).unwrap_or(curve[k]);
    let next_min = (k + 1..n.saturating_sub(1))
        .find(|&j| curve[j].1 <= curve[j - 1].1 && curve[j].1 < curve[j + 1].1)
        .map(|j| curve[j]);
    (Some(first_max), next_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_opt_values() {
        assert!((eta_opt(29.0).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(eta_opt(2.9).unwrap(), 0.0);
        assert_eq!(eta_opt(1.0).unwrap(), 0.0);
        assert!((eta_opt(1e12).unwrap() - 1.0).abs() < 1e-11);
        assert!(eta_opt(0.0).is_err());
        assert!(eta_opt(-3.0).is_err());
    }

    #[test]
    fn presets_carry_published_values() {
        let att = Protocol::Att.preset();
        assert_eq!((att.memory.d, att.memory.tau_gamma), (5.0, 0.1));
        assert_eq!(att.control.area, 1.0789);
        let ats = Protocol::Ats.preset();
        assert_eq!((ats.memory.d, ats.memory.tau_gamma), (7.5, 0.4));
        assert_eq!(ats.control.delay, -0.23817);
        let eit = Protocol::Eit.preset();
        assert_eq!((eit.memory.d, eit.memory.tau_gamma), (50.0, 1.5));
        assert_eq!(eit.control.area, 10.05845);
        assert_eq!(eit.control.duration, 1.33658);
        assert_eq!(regime_presets().len(), 3);
    }

    #[test]
    fn adiabaticity_values() {
        assert!((adiabaticity(&Protocol::Att.preset().memory) - 0.5).abs() < 1e-15);
        assert!((adiabaticity(&Protocol::Ats.preset().memory) - 3.0).abs() < 1e-12);
        assert!((adiabaticity(&Protocol::Eit.preset().memory) - 75.0).abs() < 1e-12);
        let m = Protocol::Att.preset().memory;
        let bigger = MemoryParams { d: 6.0, ..m };
        assert!(adiabaticity(&bigger) > adiabaticity(&m));
    }

    #[test]
    fn vertex_is_exact_on_parabolas() {
        let f = |x: f64| -2.0 * (x - 1.3).powi(2) + 0.7;
        let (xv, yv) = quadratic_vertex([0.5, 1.0, 2.0], [f(0.5), f(1.0), f(2.0)]).unwrap();
        assert!((xv - 1.3).abs() < 1e-12 && (yv - 0.7).abs() < 1e-12);
        assert!(quadratic_vertex([0.0, 1.0, 2.0], [1.0, 1.0, 1.0]).is_none());
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.to_string().parse::<Protocol>().unwrap(), p);
        }
        assert!("raman".parse::<Protocol>().is_err());
    }

    #[test]
    fn sweep_rejects_bad_areas() {
        let p = Protocol::Att.preset();
        assert!(sweep_pulse_area(&p.memory, &p.control, &[], &GridPolicy::Default).is_err());
        assert!(sweep_pulse_area(&p.memory, &p.control, &[1.0, -0.5], &GridPolicy::Default).is_err());
    }

    #[test]
    fn zero_area_stores_nothing() {
        let p = Protocol::Att.preset();
        let s = sweep_pulse_area(&p.memory, &p.control, &[0.0], &GridPolicy::Default).unwrap();
        assert!(s.points[0].eta_store.unwrap() < 1e-6);
    }

    #[test]
    fn reordering_areas_permutes_output() {
        let p = Protocol::Att.preset();
        let a = sweep_pulse_area(&p.memory, &p.control, &[0.5, 1.0, 1.5], &GridPolicy::Default).unwrap();
        let b = sweep_pulse_area(&p.memory, &p.control, &[1.5, 0.5, 1.0], &GridPolicy::Default).unwrap();
        assert_eq!(a.points[0], b.points[1]);
        assert_eq!(a.points[1], b.points[2]);
        assert_eq!(a.points[2], b.points[0]);
        assert_eq!(a.first_max, b.first_max);
    }
}
