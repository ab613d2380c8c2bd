//! Detuning sweeps and near-off-resonant memory (NORM) identification.
//!
//! A protocol shows NORM behaviour when its total efficiency peaks away
//! from resonance. The predicted criterion compares the adiabaticity χ′ of
//! the regime a control pulse is optimal for with the adiabaticity χ of the
//! memory it is applied to: NORM occurs when χ′ < χ.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ControlPulse, MemoryParams};
use crate::protocols::{adiabaticity, quadratic_vertex, Protocol};
use crate::solver::{simulate, GridPolicy};

/// Optima closer to resonance than this (in units of γ) count as resonant.
pub const NORM_THRESHOLD: f64 = 0.5;

/// Efficiencies within this of the maximum are treated as equal when
/// locating the optimum. Matches the solver's self-convergence tolerance.
pub const FLAT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningPoint {
    pub detuning: f64,
    pub eta_store: Option<f64>,
    pub eta_tot: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningSweep {
    /// Regime; its `detuning` field is ignored.
    pub memory: MemoryParams,
    pub control: ControlPulse,
    pub points: Vec<DetuningPoint>,
}

impl DetuningSweep {
    pub fn detunings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.detuning).collect()
    }

    /// (Δ, η_tot) for every point that solved.
    pub fn total_curve(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.eta_tot.map(|e| (p.detuning, e)))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

/// `n` evenly spaced detunings over [−range, range].
pub fn linspace_detunings(range: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| -range + 2.0 * range * k as f64 / (n - 1) as f64)
        .collect()
}

/// [−10, 10] in 41 points, or [−30, 30] in 61 points for strongly adiabatic
/// (χ ≥ 10) regimes whose curves are broader.
pub fn default_detunings(memory: &MemoryParams) -> Vec<f64> {
    if adiabaticity(memory) >= 10.0 {
        linspace_detunings(30.0, 61)
    } else {
        linspace_detunings(10.0, 41)
    }
}

/// Storage-and-retrieval efficiency at each detuning. Failed points are
/// recorded and the sweep continues.
pub fn sweep_detuning(
    memory: &MemoryParams,
    control: &ControlPulse,
    detunings: &[f64],
    grid: &GridPolicy,
) -> Result<DetuningSweep> {
    if detunings.is_empty() {
        return Err(Error::param("detunings", "must not be empty"));
    }
    if detunings.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("detunings", "must be strictly increasing"));
    }
    memory.validate()?;
    control.validate()?;
    let points = detunings
        .par_iter()
        .map(|&detuning| run_point(&memory.with_detuning(detuning), control, grid))
        .collect();
    Ok(DetuningSweep {
        memory: *memory,
        control: *control,
        points,
    })
}

fn run_point(memory: &MemoryParams, control: &ControlPulse, grid: &GridPolicy) -> DetuningPoint {
    match simulate(memory, control, true, grid) {
        Ok(r) => DetuningPoint {
            detuning: memory.detuning,
            eta_store: Some(r.eta_store),
            eta_tot: Some(r.eta_tot),
            error: None,
        },
        Err(e) => DetuningPoint {
            detuning: memory.detuning,
            eta_store: None,
            eta_tot: None,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalDetuning {
    /// Quadratically interpolated argmax of η_tot.
    pub delta_opt: f64,
    pub eta_max: f64,
    /// Contiguous detuning interval around the optimum over which η_tot
    /// stays within [`FLAT_TOLERANCE`] of `eta_max`.
    pub flat_interval: (f64, f64),
    /// The flat interval is wider than twice [`NORM_THRESHOLD`], so the
    /// optimum location is not resolved.
    pub degenerate: bool,
}

impl OptimalDetuning {
    /// True when no detuning within [`NORM_THRESHOLD`] of resonance is as
    /// efficient as the optimum.
    pub fn is_off_resonant(&self) -> bool {
        let (lo, hi) = self.flat_interval;
        lo > NORM_THRESHOLD || hi < -NORM_THRESHOLD
    }
}

pub fn optimal_detuning(sweep: &DetuningSweep) -> Result<OptimalDetuning> {
    optimal_detuning_of(&sweep.total_curve())
}

/// Locates the maximum of a sampled curve `(x, y)` sorted by x.
pub fn optimal_detuning_of(curve: &[(f64, f64)]) -> Result<OptimalDetuning> {
    const MIN_POINTS: usize = 5;
    if curve.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            found: curve.len(),
        });
    }
    let n = curve.len();
    let y_max = curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    // Among tied maxima prefer the one nearest resonance, so symmetric
    // curves resolve deterministically.
    let k = (0..n)
        .filter(|&k| curve[k].1 == y_max)
        .min_by(|&a, &b| curve[a].0.abs().total_cmp(&curve[b].0.abs()))
        .expect("non-empty");
    let (mut delta_opt, mut eta_max) = curve[k];
    if k > 0 && k + 1 < n {
        let xs = [curve[k - 1].0, curve[k].0, curve[k + 1].0];
        let ys = [curve[k - 1].1, curve[k].1, curve[k + 1].1];
        if let Some((xv, yv)) = quadratic_vertex(xs, ys) {
            if xv >= xs[0] && xv <= xs[2] && yv >= eta_max {
                delta_opt = xv;
                eta_max = yv;
            }
        }
    }
    let floor = eta_max - FLAT_TOLERANCE;
    let mut lo = k;
    while lo > 0 && curve[lo - 1].1 >= floor {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < n && curve[hi + 1].1 >= floor {
        hi += 1;
    }
    let flat_interval = (curve[lo].0.min(delta_opt), curve[hi].0.max(delta_opt));
    Ok(OptimalDetuning {
        delta_opt,
        eta_max,
        flat_interval,
        degenerate: flat_interval.1 - flat_interval.0 > 2.0 * NORM_THRESHOLD,
    })
}

/// The preset whose optimal control equals `control`, if any.
pub fn matching_preset(control: &ControlPulse) -> Option<Protocol> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    Protocol::ALL.into_iter().find(|p| {
        let c = p.preset().control;
        close(c.area, control.area) && close(c.delay, control.delay) && close(c.duration, control.duration)
    })
}

/// Effective adiabaticity χ′ of a preset control.
pub fn control_adiabaticity(control: &ControlPulse) -> Result<f64> {
    matching_preset(control)
        .map(|p| adiabaticity(&p.preset().memory))
        .ok_or(Error::UndefinedAdiabaticity)
}

/// Predicts NORM operation: χ′ < χ.
pub fn norm_predicate(memory: &MemoryParams, control: &ControlPulse) -> Result<bool> {
    Ok(control_adiabaticity(control)? < adiabaticity(memory))
}

/// One protocol applied in one regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixCell {
    pub protocol: Protocol,
    pub regime: Protocol,
    pub chi_control: f64,
    pub chi_memory: f64,
    pub predicted_norm: bool,
    pub optimum: Option<OptimalDetuning>,
    pub sweep: DetuningSweep,
}

impl MatrixCell {
    pub fn observed_norm(&self) -> Option<bool> {
        self.optimum.map(|o| o.is_off_resonant())
    }
}

/// All nine protocol × regime detuning sweeps, protocol-major. Every
/// point of every sweep is scheduled on the rayon pool at once.
pub fn fig6_matrix(grid: &GridPolicy) -> Vec<MatrixCell> {
    let pairs: Vec<(Protocol, Protocol)> = Protocol::ALL
        .iter()
        .flat_map(|&p| Protocol::ALL.iter().map(move |&r| (p, r)))
        .collect();
    let jobs: Vec<(usize, f64)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(i, (_, r))| default_detunings(&r.preset().memory).into_iter().map(move |d| (i, d)))
        .collect();
    let results: Vec<(usize, DetuningPoint)> = jobs
        .par_iter()
        .map(|&(i, d)| {
            let (p, r) = pairs[i];
            let memory = r.preset().memory.with_detuning(d);
            (i, run_point(&memory, &p.preset().control, grid))
        })
        .collect();
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(protocol, regime))| {
            let memory = regime.preset().memory;
            let control = protocol.preset().control;
            let points: Vec<DetuningPoint> = results
                .iter()
                .filter(|(j, _)| *j == i)
                .map(|(_, p)| p.clone())
                .collect();
            let sweep = DetuningSweep {
                memory,
                control,
                points,
            };
            let chi_control = adiabaticity(&protocol.preset().memory);
            let chi_memory = adiabaticity(&memory);
            MatrixCell {
                protocol,
                regime,
                chi_control,
                chi_memory,
                predicted_norm: chi_control < chi_memory,
                optimum: optimal_detuning(&sweep).ok(),
                sweep,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_curve_peaks_on_resonance() {
        let curve: Vec<(f64, f64)> = linspace_detunings(5.0, 11)
            .into_iter()
            .map(|x| (x, 1.0 / (1.0 + x * x)))
            .collect();
        let o = optimal_detuning_of(&curve).unwrap();
        assert!(o.delta_opt.abs() < 1e-12);
        assert!(!o.is_off_resonant());
    }

    #[test]
    fn parabola_vertex_is_exact() {
        let curve: Vec<(f64, f64)> = (-6..=10)
            .map(|x| {
                let x = x as f64;
                (x, 0.8 - 0.01 * (x - 3.0).powi(2))
            })
            .collect();
        let o = optimal_detuning_of(&curve).unwrap();
        assert!((o.delta_opt - 3.0).abs() < 1e-9);
        assert!((o.eta_max - 0.8).abs() < 1e-12);
        assert!(o.is_off_resonant());
        assert!(!o.degenerate);
    }

    #[test]
    fn off_grid_vertex() {
        let curve: Vec<(f64, f64)> = (-5..=5)
            .map(|x| {
                let x = x as f64;
                (x, 0.5 - 0.02 * (x + 2.4).powi(2))
            })
            .collect();
        let o = optimal_detuning_of(&curve).unwrap();
        assert!((o.delta_opt + 2.4).abs() < 1e-9);
    }

    #[test]
    fn flat_curve_is_degenerate() {
        let curve: Vec<(f64, f64)> = linspace_detunings(4.0, 9).into_iter().map(|x| (x, 0.3)).collect();
        let o = optimal_detuning_of(&curve).unwrap();
        assert!(o.degenerate);
        assert_eq!(o.flat_interval, (-4.0, 4.0));
        assert!(!o.is_off_resonant());
    }

    #[test]
    fn shallow_off_resonant_bump_is_not_norm() {
        // 3e-4 bump at ±4 on an otherwise flat curve.
        let curve: Vec<(f64, f64)> = linspace_detunings(10.0, 41)
            .into_iter()
            .map(|x| (x, 0.0927 + 3e-4 * (-(x.abs() - 4.0).powi(2) / 8.0).exp()))
            .collect();
        let o = optimal_detuning_of(&curve).unwrap();
        assert!(o.delta_opt.abs() > 3.0);
        assert!(o.degenerate);
        assert!(!o.is_off_resonant());
    }

    #[test]
    fn too_few_points() {
        let curve = [(0.0, 1.0), (1.0, 2.0), (2.0, 1.0), (3.0, 0.5)];
        assert!(matches!(optimal_detuning_of(&curve), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn predicate_follows_adiabaticity() {
        let att = Protocol::Att.preset();
        let ats = Protocol::Ats.preset();
        let eit = Protocol::Eit.preset();
        assert!(norm_predicate(&ats.memory, &att.control).unwrap());
        assert!(!norm_predicate(&att.memory, &att.control).unwrap());
        assert!(!norm_predicate(&att.memory, &eit.control).unwrap());
        assert!(norm_predicate(&eit.memory, &ats.control).unwrap());
        let custom = ControlPulse::new(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            norm_predicate(&att.memory, &custom),
            Err(Error::UndefinedAdiabaticity)
        ));
    }

    #[test]
    fn sweep_validates_detunings() {
        let p = Protocol::Att.preset();
        assert!(sweep_detuning(&p.memory, &p.control, &[], &GridPolicy::Default).is_err());
        assert!(sweep_detuning(&p.memory, &p.control, &[1.0, 0.0], &GridPolicy::Default).is_err());
    }

    #[test]
    fn default_ranges() {
        assert_eq!(default_detunings(&Protocol::Att.preset().memory).len(), 41);
        assert_eq!(default_detunings(&Protocol::Ats.preset().memory).len(), 41);
        let eit = default_detunings(&Protocol::Eit.preset().memory);
        assert_eq!((eit.len(), eit[0], eit[60]), (61, -30.0, 30.0));
    }
}
