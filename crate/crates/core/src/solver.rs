//! Maxwell-Bloch integration for storage, retrieval and transmission.
//!
//! In the comoving frame the equations are
//!
//! ```text
//! ∂_z A = −√d P
//! ∂_τ P = −γ̄ P + √d A − i(Ω/2) B
//! ∂_τ B = −γ_B B − i(Ω*/2) P
//! ```
//!
//! with γ̄ = 1 − iΔ/γ. P and B live at the centers of `n_z` cells spanning
//! z ∈ [0, 1] and A lives on the cell faces. A is marched across each cell
//! from the face value and the cell polarization, with P driven by the
//! face-averaged field, so the discrete light-atom energy exchange is exact
//! and the ledger closes to time-quadrature accuracy. (P, B) are advanced
//! with classical RK4 in τ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{trapezoid, ControlPulse, MemoryParams, RabiProfile, TemporalField, TimeGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spatial and temporal discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_z: usize,
    pub t_span: TimeGrid,
}

impl GridConfig {
    pub const MIN_NZ: usize = 32;
    pub const MIN_NT: usize = 512;
    pub const DEFAULT_NZ: usize = 200;
    pub const DEFAULT_NT: usize = 4096;

    pub fn new(n_z: usize, t_span: TimeGrid) -> Result<Self> {
        let g = Self { n_z, t_span };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_z < Self::MIN_NZ {
            return Err(Error::param(
                "n_z",
                format!("need >= {}, got {}", Self::MIN_NZ, self.n_z),
            ));
        }
        if self.t_span.len() < Self::MIN_NT {
            return Err(Error::param(
                "n_t",
                format!("need >= {}, got {}", Self::MIN_NT, self.t_span.len()),
            ));
        }
        Ok(())
    }

    pub fn n_t(&self) -> usize {
        self.t_span.len()
    }

    /// Default grid for a run whose signal is centered at τ = 0.
    ///
    /// The window covers [−8, 8] signal durations around the signal, the
    /// storage and retrieval pulses with five intensity FWHM of margin, and
    /// ten decay times after the last pulse so the polarization has emptied
    /// (energy e⁻²⁰) by the end of the grid.
    /// `n_t` starts at [`Self::DEFAULT_NT`] and grows until the signal,
    /// the control pulses, the peak Rabi frequency and the detuning are
    /// all resolved.
    pub fn for_run(
        memory: &MemoryParams,
        storage: &ControlPulse,
        retrieval: Option<&ControlPulse>,
        retrieval_delay: f64,
    ) -> Result<Self> {
        memory.validate()?;
        let tau = memory.tau_gamma;
        let mut lo = -8.0 * tau;
        let mut hi = 8.0 * tau;
        let mut min_width = tau;
        let mut max_rabi: f64 = 0.0;
        let mut pulses = vec![(*storage, 0.0)];
        if let Some(r) = retrieval {
            pulses.push((*r, retrieval_delay));
            hi = hi.max(retrieval_delay + 8.0 * tau);
        }
        for (pulse, shift) in pulses {
            pulse.validate()?;
            if pulse.area == 0.0 {
                continue;
            }
            let center = pulse.delay * tau + shift;
            let margin = 5.0 * pulse.intensity_fwhm(tau);
            lo = lo.min(center - margin);
            hi = hi.max(center + margin);
            min_width = min_width.min(pulse.amplitude_fwhm(tau));
            max_rabi = max_rabi.max(pulse.analytic_peak(tau));
        }
        hi += 10.0;
        let span = hi - lo;
        let dt_required = [
            min_width / 20.0,
            0.25 / max_rabi.max(1e-12),
            0.1 / memory.detuning.abs().max(1.0),
            0.5 / memory.d,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        let mut n_t = Self::DEFAULT_NT;
        while span / (n_t - 1) as f64 > dt_required {
            n_t *= 2;
        }
        let n_z = Self::DEFAULT_NZ;
        Self::new(n_z, TimeGrid::new(lo, hi, n_t)?)
    }

    /// Same window with every resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let n_t = (self.t_span.len() - 1) * factor + 1;
        Self::new(
            self.n_z * factor,
            TimeGrid::new(self.t_span.t_start(), self.t_span.t_end(), n_t)?,
        )
    }
}

/// How a sweep chooses the grid for each point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GridPolicy {
    /// [`GridConfig::for_run`] per point.
    #[default]
    Default,
    /// Default grid refined by an integer factor.
    Refined(usize),
    Fixed(GridConfig),
}

impl GridPolicy {
    pub fn resolve(
        &self,
        memory: &MemoryParams,
        storage: &ControlPulse,
        retrieval: Option<&ControlPulse>,
        retrieval_delay: f64,
    ) -> Result<GridConfig> {
        match self {
            GridPolicy::Default => GridConfig::for_run(memory, storage, retrieval, retrieval_delay),
            GridPolicy::Refined(k) => GridConfig::for_run(memory, storage, retrieval, retrieval_delay)?.refined(*k),
            GridPolicy::Fixed(g) => Ok(*g),
        }
    }
}

/// Stores a unit-energy Gaussian signal centered at τ = 0 and, when
/// `retrieve` is set, reads it out with an identical pulse after
/// [`default_retrieval_delay`].
pub fn simulate(
    memory: &MemoryParams,
    control: &ControlPulse,
    retrieve: bool,
    policy: &GridPolicy,
) -> Result<SolveResult> {
    let delay = if retrieve {
        default_retrieval_delay(memory, control)
    } else {
        0.0
    };
    let retrieval = retrieve.then_some(control);
    let grid = policy.resolve(memory, control, retrieval, delay)?;
    let signal = crate::field::gaussian_signal_at(memory.tau_gamma, 0.0, &grid.t_span)?;
    solve(memory, &signal, control, retrieval, delay, &grid)
}

/// Time between the storage and retrieval pulses that lets the residual
/// polarization decay (energy e⁻²⁰) before the retrieval window opens.
pub fn default_retrieval_delay(memory: &MemoryParams, storage: &ControlPulse) -> f64 {
    4.0 * storage.amplitude_fwhm(memory.tau_gamma) + 10.0
}

/// Normalized energy bookkeeping of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub e_in: f64,
    pub e_out: f64,
    pub e_pol_final: f64,
    pub e_spin_final: f64,
    pub e_pol_decay: f64,
    pub e_spin_decay: f64,
}

impl EnergyLedger {
    /// |e_in − Σ outputs| / e_in.
    pub fn closure(&self) -> f64 {
        let out = self.e_out + self.e_pol_final + self.e_spin_final + self.e_pol_decay + self.e_spin_decay;
        (self.e_in - out).abs() / self.e_in
    }
}

/// Field samples kept on a decimated (z, τ) lattice for dumping.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    /// z of each recorded cell center.
    pub z: Vec<f64>,
    pub tau: Vec<f64>,
    /// Indexed `[tau][z]`; A is averaged over the two faces of each cell.
    pub a: Vec<Vec<Complex64>>,
    pub p: Vec<Vec<Complex64>>,
    pub b: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// A(z = 1, τ).
    pub transmitted: TemporalField,
    /// B(z) at the final time, on cell centers.
    pub spin_wave: Vec<Complex64>,
    /// B(z) at the storage-efficiency time.
    pub stored_spin_wave: Vec<Complex64>,
    pub z: Vec<f64>,
    pub eta_store: f64,
    pub eta_ret: f64,
    pub eta_tot: f64,
    pub ledger: EnergyLedger,
    /// End of the storage window: midpoint between the storage and retrieval
    /// pulses, or the end of the grid when there is no retrieval pulse.
    pub tau_mid: f64,
    /// ∫|P|²dz at every grid time.
    pub pol_energy: Vec<f64>,
    /// ∫|B|²dz at every grid time.
    pub spin_energy: Vec<f64>,
    pub fields: Option<FieldRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// Keep every `z_stride`-th cell and `t_stride`-th time step.
    pub record: Option<(usize, usize)>,
}

/// Integrates a storage (and optional retrieval) run with default options.
pub fn solve(
    memory: &MemoryParams,
    signal: &TemporalField,
    storage_pulse: &ControlPulse,
    retrieval_pulse: Option<&ControlPulse>,
    retrieval_delay: f64,
    grid: &GridConfig,
) -> Result<SolveResult> {
    solve_with(
        memory,
        signal,
        storage_pulse,
        retrieval_pulse,
        retrieval_delay,
        grid,
        &SolveOptions::default(),
    )
}

pub fn solve_with(
    memory: &MemoryParams,
    signal: &TemporalField,
    storage_pulse: &ControlPulse,
    retrieval_pulse: Option<&ControlPulse>,
    retrieval_delay: f64,
    grid: &GridConfig,
    options: &SolveOptions,
) -> Result<SolveResult> {
    memory.validate()?;
    grid.validate()?;
    storage_pulse.validate()?;
    if let Some(r) = retrieval_pulse {
        r.validate()?;
    }
    if !(retrieval_delay >= 0.0) {
        return Err(Error::param(
            "retrieval_delay",
            format!("must be >= 0, got {retrieval_delay}"),
        ));
    }
    let tgrid = grid.t_span;
    let a_in = resample(signal, &tgrid);
    let e_in = trapezoid(&a_in.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>(), tgrid.dt());
    if !(e_in > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let tau = memory.tau_gamma;
    let center = signal.centroid().ok_or(Error::ZeroEnergy)?;
    check_margin("signal", center, 4.0 * tau, &tgrid)?;

    let storage = storage_pulse.profile(tau, center, &tgrid);
    if storage_pulse.area > 0.0 {
        check_margin(
            "storage pulse",
            storage.center,
            4.0 * storage_pulse.intensity_fwhm(tau),
            &tgrid,
        )?;
    }
    let retrieval = match retrieval_pulse {
        Some(r) => {
            let profile = r.profile(tau, center + retrieval_delay, &tgrid);
            if r.area > 0.0 {
                check_margin("retrieval pulse", profile.center, 4.0 * r.intensity_fwhm(tau), &tgrid)?;
            }
            Some(profile)
        }
        None => None,
    };
    let tau_mid = match &retrieval {
        Some(r) => {
            let store_end = if storage.peak > 0.0 {
                storage.extent().1
            } else {
                center + 4.0 * tau
            };
            let retrieve_start = r.extent().0;
            if retrieve_start <= store_end {
                return Err(Error::param(
                    "retrieval_delay",
                    format!("retrieval pulse starts at {retrieve_start:.4} before storage ends at {store_end:.4}"),
                ));
            }
            0.5 * (store_end + retrieve_start)
        }
        None => tgrid.t_end(),
    };

    let mut sim = Integrator::new(memory, grid.n_z, storage, retrieval.unwrap_or_else(RabiProfile::zero));
    sim.run(&a_in, &tgrid, tau_mid, options).map(|mut result| {
        result.ledger.e_in = e_in;
        let e_store: f64 = result.stored_spin_wave.iter().map(|b| b.norm_sqr()).sum::<f64>() * sim.dz;
        result.eta_store = e_store / e_in;
        result.eta_tot = if retrieval_pulse.is_some() {
            energy_after(&result.transmitted, tau_mid) / e_in
        } else {
            0.0
        };
        result.eta_ret = if result.eta_store > 0.0 {
            result.eta_tot / result.eta_store
        } else {
            0.0
        };
        result
    })
}

fn check_margin(what: &str, center: f64, half_width: f64, grid: &TimeGrid) -> Result<()> {
    if center - half_width < grid.t_start() || center + half_width > grid.t_end() {
        return Err(Error::Window(format!(
            "{what} needs [{:.4}, {:.4}], grid is [{:.4}, {:.4}]",
            center - half_width,
            center + half_width,
            grid.t_start(),
            grid.t_end()
        )));
    }
    Ok(())
}

/// Trapezoidal ∫|A|²dτ over τ ≥ `from`, with linear weighting of the
/// partial interval.
pub(crate) fn energy_after(field: &TemporalField, from: f64) -> f64 {
    let grid = field.grid();
    let dt = grid.dt();
    let s = field.samples();
    let mut total = 0.0;
    for j in 0..s.len() - 1 {
        let (t0, t1) = (grid.at(j), grid.at(j + 1));
        if t1 <= from {
            continue;
        }
        let seg = 0.5 * (s[j].norm_sqr() + s[j + 1].norm_sqr()) * dt;
        if t0 >= from {
            total += seg;
        } else {
            total += seg * (t1 - from) / dt;
        }
    }
    total
}

/// Four-point Lagrange resampling onto `grid`, zero outside the source.
fn resample(field: &TemporalField, grid: &TimeGrid) -> Vec<Complex64> {
    if field.grid() == grid {
        return field.samples().to_vec();
    }
    grid.times().map(|t| cubic_at(field, t)).collect()
}

fn cubic_at(field: &TemporalField, t: f64) -> Complex64 {
    let g = field.grid();
    let s = field.samples();
    if !g.contains(t) {
        return ZERO;
    }
    let x = (t - g.t_start()) / g.dt();
    let j = x.floor() as isize;
    let f = x - j as f64;
    let get = |k: isize| -> Complex64 {
        if k < 0 || k as usize >= s.len() {
            ZERO
        } else {
            s[k as usize]
        }
    };
    let w = [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ];
    get(j - 1) * w[0] + get(j) * w[1] + get(j + 1) * w[2] + get(j + 2) * w[3]
}

/// Signal at τ_j + dt/2 by four-point interpolation.
fn midpoints(a: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    (0..n)
        .map(|j| {
            if j + 1 >= n {
                ZERO
            } else if j == 0 || j + 2 >= n {
                0.5 * (a[j] + a[j + 1])
            } else {
                (9.0 * (a[j] + a[j + 1]) - a[j - 1] - a[j + 2]) / 16.0
            }
        })
        .collect()
}

struct Integrator {
    sqrt_d: f64,
    gamma_bar: Complex64,
    gamma_b: f64,
    n_z: usize,
    dz: f64,
    storage: RabiProfile,
    retrieval: RabiProfile,
}

/// Derivative buffers for one RK4 stage.
struct Stage {
    dp: Vec<Complex64>,
    db: Vec<Complex64>,
}

impl Integrator {
    fn new(memory: &MemoryParams, n_z: usize, storage: RabiProfile, retrieval: RabiProfile) -> Self {
        Self {
            sqrt_d: memory.d.sqrt(),
            gamma_bar: memory.gamma_bar(),
            gamma_b: memory.gamma_b,
            n_z,
            dz: 1.0 / n_z as f64,
            storage,
            retrieval,
        }
    }

    fn rabi(&self, t: f64) -> f64 {
        self.storage.at(t) + self.retrieval.at(t)
    }

    /// Time derivative of (P, B); returns A at z = 1.
    fn rhs(&self, a_in: Complex64, rabi: f64, p: &[Complex64], b: &[Complex64], out: &mut Stage) -> Complex64 {
        let half_rabi = I * (0.5 * rabi);
        let step = self.sqrt_d * self.dz;
        let mut a_face = a_in;
        for i in 0..self.n_z {
            let pi = p[i];
            let a_mean = a_face - 0.5 * step * pi;
            a_face -= step * pi;
            out.dp[i] = -self.gamma_bar * pi + self.sqrt_d * a_mean - half_rabi * b[i];
            out.db[i] = -self.gamma_b * b[i] - half_rabi * pi;
        }
        a_face
    }

    /// A on the faces for the current state.
    fn faces(&self, a_in: Complex64, p: &[Complex64]) -> Vec<Complex64> {
        let step = self.sqrt_d * self.dz;
        let mut faces = Vec::with_capacity(self.n_z + 1);
        let mut a = a_in;
        faces.push(a);
        for &pi in p {
            a -= step * pi;
            faces.push(a);
        }
        faces
    }

    fn output(&self, a_in: Complex64, p: &[Complex64]) -> Complex64 {
        let step = self.sqrt_d * self.dz;
        p.iter().fold(a_in, |a, &pi| a - step * pi)
    }

    fn run(
        &mut self,
        a_in: &[Complex64],
        grid: &TimeGrid,
        tau_mid: f64,
        options: &SolveOptions,
    ) -> Result<SolveResult> {
        let n = self.n_z;
        let n_t = grid.len();
        let dt = grid.dt();
        let a_mid = midpoints(a_in);
        let sq = |v: &[Complex64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>() * self.dz;

        let mut p = vec![ZERO; n];
        let mut b = vec![ZERO; n];
        let mut tmp_p = vec![ZERO; n];
        let mut tmp_b = vec![ZERO; n];
        let mut stages: Vec<Stage> = (0..4)
            .map(|_| Stage {
                dp: vec![ZERO; n],
                db: vec![ZERO; n],
            })
            .collect();

        let mut out = vec![ZERO; n_t];
        let mut pol_energy = vec![0.0; n_t];
        let mut spin_energy = vec![0.0; n_t];
        out[0] = self.output(a_in[0], &p);

        let mid_index = (0..n_t).find(|&j| grid.at(j) >= tau_mid).unwrap_or(n_t - 1);
        let mut stored = if mid_index == 0 { Some(b.clone()) } else { None };

        let z: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * self.dz).collect();
        let mut record = options.record.map(|(zs, ts)| {
            let zs = zs.max(1);
            let ts = ts.max(1);
            (
                zs,
                ts,
                FieldRecord {
                    z: z.iter().step_by(zs).copied().collect(),
                    tau: Vec::new(),
                    a: Vec::new(),
                    p: Vec::new(),
                    b: Vec::new(),
                },
            )
        });
        let mut snapshot = |j: usize, p: &[Complex64], b: &[Complex64], a_in: Complex64, this: &Self| {
            if let Some((zs, ts, rec)) = record.as_mut() {
                if j.is_multiple_of(*ts) || j + 1 == n_t {
                    let faces = this.faces(a_in, p);
                    rec.tau.push(grid.at(j));
                    rec.a
                        .push((0..n).step_by(*zs).map(|i| 0.5 * (faces[i] + faces[i + 1])).collect());
                    rec.p.push(p.iter().step_by(*zs).copied().collect());
                    rec.b.push(b.iter().step_by(*zs).copied().collect());
                }
            }
        };
        snapshot(0, &p, &b, a_in[0], self);

        let e_in_bound = {
            let total: f64 = a_in.iter().map(|a| a.norm_sqr()).sum::<f64>() * dt;
            10.0 * total + 1e-300
        };

        for j in 0..n_t - 1 {
            let t = grid.at(j);
            let t_half = t + 0.5 * dt;
            let t_next = grid.at(j + 1);
            let (r0, r1, r2) = (self.rabi(t), self.rabi(t_half), self.rabi(t_next));

            let [s1, s2, s3, s4] = &mut stages[..] else {
                unreachable!()
            };
            self.rhs(a_in[j], r0, &p, &b, s1);
            for i in 0..n {
                tmp_p[i] = p[i] + 0.5 * dt * s1.dp[i];
                tmp_b[i] = b[i] + 0.5 * dt * s1.db[i];
            }
            self.rhs(a_mid[j], r1, &tmp_p, &tmp_b, s2);
            for i in 0..n {
                tmp_p[i] = p[i] + 0.5 * dt * s2.dp[i];
                tmp_b[i] = b[i] + 0.5 * dt * s2.db[i];
            }
            self.rhs(a_mid[j], r1, &tmp_p, &tmp_b, s3);
            for i in 0..n {
                tmp_p[i] = p[i] + dt * s3.dp[i];
                tmp_b[i] = b[i] + dt * s3.db[i];
            }
            self.rhs(a_in[j + 1], r2, &tmp_p, &tmp_b, s4);
            let w = dt / 6.0;
            for i in 0..n {
                p[i] += w * (s1.dp[i] + 2.0 * s2.dp[i] + 2.0 * s3.dp[i] + s4.dp[i]);
                b[i] += w * (s1.db[i] + 2.0 * s2.db[i] + 2.0 * s3.db[i] + s4.db[i]);
            }

            let ep = sq(&p);
            let eb = sq(&b);
            if !(ep + eb).is_finite() || ep + eb > e_in_bound {
                let z_index = p
                    .iter()
                    .zip(&b)
                    .position(|(x, y)| !(x.norm_sqr() + y.norm_sqr()).is_finite())
                    .unwrap_or(0);
                return Err(Error::Divergence {
                    z_index,
                    tau_index: j + 1,
                    tau: t_next,
                });
            }
            pol_energy[j + 1] = ep;
            spin_energy[j + 1] = eb;
            out[j + 1] = self.output(a_in[j + 1], &p);
            if j + 1 == mid_index {
                stored = Some(b.clone());
            }
            snapshot(j + 1, &p, &b, a_in[j + 1], self);
        }

        let transmitted = TemporalField::new(*grid, out)?;
        let e_out = transmitted.energy();
        let ledger = EnergyLedger {
            e_in: 0.0,
            e_out,
            e_pol_final: pol_energy[n_t - 1],
            e_spin_final: spin_energy[n_t - 1],
            e_pol_decay: 2.0 * trapezoid(&pol_energy, dt),
            e_spin_decay: 2.0 * self.gamma_b * trapezoid(&spin_energy, dt),
        };
        Ok(SolveResult {
            transmitted,
            stored_spin_wave: stored.unwrap_or_else(|| b.clone()),
            spin_wave: b,
            z,
            eta_store: 0.0,
            eta_ret: 0.0,
            eta_tot: 0.0,
            ledger,
            tau_mid,
            pol_energy,
            spin_energy,
            fields: record.map(|(_, _, r)| r),
        })
    }
}

/// Linear-response transfer function exp(−d / (1 + i(ω − Δ/γ))).
pub fn transmission_spectrum_linear(memory: &MemoryParams, omega: &[f64]) -> Vec<Complex64> {
    omega
        .iter()
        .map(|&w| (-memory.d / Complex64::new(1.0, w - memory.detuning)).exp())
        .collect()
}

/// Photon-counting estimates of the storage and total efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonCounting {
    pub eta_store_pc: f64,
    pub eta_tot_pc: f64,
}

/// Splits the transmitted energy at `storage_window_end`: light before it
/// is leaked signal, light after it is retrieved signal.
pub fn photon_counting_efficiency(result: &SolveResult, storage_window_end: f64) -> Result<PhotonCounting> {
    let grid = result.transmitted.grid();
    if !grid.contains(storage_window_end) {
        return Err(Error::Window(format!(
            "window end {storage_window_end} outside [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let e_in = result.ledger.e_in;
    let after = energy_after(&result.transmitted, storage_window_end);
    let before = result.ledger.e_out - after;
    Ok(PhotonCounting {
        eta_store_pc: 1.0 - before / e_in,
        eta_tot_pc: after / e_in,
    })
}

/// Writes the recorded fields as CSV: z, τ, Re A, Im A, Re P, Im P, Re B, Im B.
pub fn write_field_dump<W: std::io::Write>(record: &FieldRecord, mut w: W) -> std::io::Result<()> {
    writeln!(w, "z,tau,re_a,im_a,re_p,im_p,re_b,im_b")?;
    for (k, &t) in record.tau.iter().enumerate() {
        for (i, &z) in record.z.iter().enumerate() {
            let (a, p, b) = (record.a[k][i], record.p[k][i], record.b[k][i]);
            writeln!(
                w,
                "{z:.8e},{t:.8e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                a.re, a.im, p.re, p.im, b.re, b.im
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian_signal_at;
    use crate::spectrum::to_spectrum;

    fn att() -> (MemoryParams, ControlPulse) {
        (
            MemoryParams::new(5.0, 0.1, 0.0, 0.0).unwrap(),
            ControlPulse::new(1.0789, 0.76176, 0.52137).unwrap(),
        )
    }

    fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn linear_transmission_values() {
        let m = MemoryParams::new(5.0, 0.1, 0.0, 0.0).unwrap();
        let h = transmission_spectrum_linear(&m, &[0.0]);
        assert!((h[0].norm_sqr() - (-10.0f64).exp()).abs() < 1e-12);
        let thin = MemoryParams::new(1e-12, 0.1, 0.0, 0.0).unwrap();
        assert!(transmission_spectrum_linear(&thin, &[-3.0, 0.0, 7.0])
            .iter()
            .all(|h| (h - 1.0).norm() < 1e-11));
        let det = MemoryParams::new(3.0, 0.1, 2.0, 0.0).unwrap();
        let h = transmission_spectrum_linear(&det, &[2.0 - 1.3, 2.0 + 1.3]);
        assert!((h[0].norm_sqr() - h[1].norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn no_control_matches_linear_oracle() {
        let (m, c) = att();
        let c = c.with_area(0.0);
        let grid = GridConfig::for_run(&m, &c, None, 0.0).unwrap();
        let signal = gaussian_signal_at(m.tau_gamma, 0.0, &grid.t_span).unwrap();
        let r = solve(&m, &signal, &c, None, 0.0, &grid).unwrap();
        assert!(r.eta_store < 1e-6);
        let s_in = to_spectrum(&signal).unwrap().complex();
        let s_out = to_spectrum(&r.transmitted).unwrap();
        let h = transmission_spectrum_linear(&m, s_out.omega());
        let expected: Vec<Complex64> = s_in.iter().zip(&h).map(|(a, h)| a * h).collect();
        let err = rel_l2(&s_out.complex(), &expected);
        assert!(err < 1e-3, "relative L2 {err}");
    }

    #[test]
    fn ledger_closes_for_att() {
        let (m, c) = att();
        let delay = default_retrieval_delay(&m, &c);
        let grid = GridConfig::for_run(&m, &c, Some(&c), delay).unwrap();
        let signal = gaussian_signal_at(m.tau_gamma, 0.0, &grid.t_span).unwrap();
        let r = solve(&m, &signal, &c, Some(&c), delay, &grid).unwrap();
        assert!(r.ledger.closure() < 1e-3, "{:?}", r.ledger);
        assert!(r.eta_store > 0.3 && r.eta_store <= 1.0);
        assert!(r.eta_tot <= r.eta_store);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (m, c) = att();
        let grid = GridConfig::for_run(&m, &c, None, 0.0).unwrap();
        let signal = gaussian_signal_at(m.tau_gamma, 0.0, &grid.t_span).unwrap();
        assert!(solve(&m, &signal, &c, None, -1.0, &grid).is_err());
        let zero = TemporalField::zeros(grid.t_span);
        assert!(matches!(solve(&m, &zero, &c, None, 0.0, &grid), Err(Error::ZeroEnergy)));
        // Retrieval pulse overlapping the storage pulse.
        assert!(solve(&m, &signal, &c, Some(&c), 0.01, &grid).is_err());
        // Signal outside the window.
        let short = GridConfig::new(64, TimeGrid::new(-0.2, 0.2, 1024).unwrap()).unwrap();
        let off = gaussian_signal_at(0.02, 0.1, &short.t_span).unwrap();
        let wide = MemoryParams::new(5.0, 0.1, 0.0, 0.0).unwrap();
        assert!(matches!(
            solve(&wide, &off, &c, None, 0.0, &short),
            Err(Error::Window(_))
        ));
        assert!(GridConfig::new(16, grid.t_span).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let (m, c) = att();
        // Grossly under-resolved: Ω·dt far outside the RK4 stability region.
        let c = c.with_area(400.0);
        let grid = GridConfig::new(32, TimeGrid::new(-2.0, 4.0, 512).unwrap()).unwrap();
        let signal = gaussian_signal_at(m.tau_gamma, 0.0, &grid.t_span).unwrap();
        let err = solve(&m, &signal, &c, None, 0.0, &grid).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn photon_counting_window_checked() {
        let (m, c) = att();
        let grid = GridConfig::for_run(&m, &c, None, 0.0).unwrap();
        let signal = gaussian_signal_at(m.tau_gamma, 0.0, &grid.t_span).unwrap();
        let r = solve(&m, &signal, &c, None, 0.0, &grid).unwrap();
        assert!(photon_counting_efficiency(&r, grid.t_span.t_end() + 1.0).is_err());
        let pc = photon_counting_efficiency(&r, grid.t_span.t_end()).unwrap();
        assert!(pc.eta_tot_pc.abs() < 1e-15);
    }

    #[test]
    fn field_dump_shape() {
        let (m, c) = att();
        let grid = GridConfig::new(40, TimeGrid::new(-1.0, 1.0, 600).unwrap()).unwrap();
        let signal = gaussian_signal_at(m.tau_gamma, 0.0, &grid.t_span).unwrap();
        let opts = SolveOptions {
            record: Some((10, 100)),
        };
        let r = solve_with(&m, &signal, &c, None, 0.0, &grid, &opts).unwrap();
        let rec = r.fields.unwrap();
        assert_eq!(rec.z.len(), 4);
        assert_eq!(rec.tau.len(), 7);
        let mut buf = Vec::new();
        write_field_dump(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 7);
        assert!(text.starts_with("z,tau,re_a,im_a,re_p,im_p,re_b,im_b"));
    }
}
