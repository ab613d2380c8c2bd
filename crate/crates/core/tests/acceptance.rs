//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use qmem::characterization::{
    collision_kinetics, figures_of_merit, fit_frequency_response, fit_lifetime, fit_lifetime_vs_pressure,
    fit_linewidth_vs_pressure, fit_snr_linear, snr_to_fidelity, DecayScan, LifetimeModel, ATOMIC_MASS_UNIT,
};
use qmem::fit::{fit_inverse, fit_line, levenberg_marquardt, scaled_starts, InverseOffset, Model};
use qmem::interferometry::{
    fit_visibility, forward_interferogram, phase_rms_error, reconstruct_phase, visibility_closed_form,
    visibility_quadrature, VisibilityModel,
};
use qmem::norm::{fig6_matrix, NORM_THRESHOLD};
use qmem::protocols::{eta_opt, sweep_pulse_area, Protocol};
use qmem::solver::{simulate, transmission_spectrum_linear, GridPolicy};
use qmem::*;

/// Largest ledger closure over every solve run by this suite.
static WORST_CLOSURE: Mutex<(f64, usize)> = Mutex::new((0.0, 0));

fn record_closure(c: f64) {
    let mut w = WORST_CLOSURE.lock().unwrap();
    w.0 = w.0.max(c);
    w.1 += 1;
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("efficiency bound", criterion_1),
        ("linear-absorption oracle", criterion_2),
        ("energy ledger closure", criterion_3),
        ("pulse-area scan", criterion_4),
        ("detuning matrix", criterion_5),
        ("interferometry round trip", criterion_6),
        ("fit engine recovery", criterion_7),
        ("figures of merit", criterion_8),
        ("collision kinetics", criterion_9),
    ];
    let mut failed = 0;
    // Criterion 3 aggregates the solves of 1, 2, 4 and 5, so run it last.
    let order = [0usize, 1, 3, 4, 5, 6, 7, 8, 2];
    let mut lines = vec![String::new(); 9];
    for &i in &order {
        let (name, run) = criteria[i];
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        let line = format!(
            "ACCEPTANCE {} {} ({name}, {:.1?}): {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed(),
            o.detail
        );
        println!("{line}");
        lines[i] = line;
    }
    println!("---");
    for l in &lines {
        println!("{}", l.split(':').next().unwrap_or(""));
    }
    if failed > 0 {
        println!("{failed} of 9 acceptance criteria failed");
        std::process::exit(1);
    }
}

fn criterion_1() -> Outcome {
    let exact = eta_opt(29.0).unwrap();
    let formula_ok = (exact - 0.9).abs() <= 1e-15;
    let mut rng = StdRng::seed_from_u64(20240601);
    let draws: Vec<(f64, f64, f64, f64, usize)> = (0..200)
        .map(|_| {
            (
                rng.random_range(1.0..=60.0),
                rng.random_range(0.05..=2.0),
                rng.random_range(0.0..=12.0),
                rng.random_range(-30.0..=30.0),
                rng.random_range(0..3usize),
            )
        })
        .collect();
    let start = Instant::now();
    let results: Vec<Result<(f64, f64, f64)>> = draws
        .par_iter()
        .map(|&(d, tau, area, detuning, preset)| {
            let memory = MemoryParams::new(d, tau, detuning, 0.0)?;
            let control = Protocol::ALL[preset].preset().control.with_area(area);
            let r = simulate(&memory, &control, false, &GridPolicy::Default)?;
            record_closure(r.ledger.closure());
            Ok((d, r.eta_store, eta_opt(d)?))
        })
        .collect();
    let elapsed = start.elapsed();
    let errors = results.iter().filter(|r| r.is_err()).count();
    let ok: Vec<(f64, f64, f64)> = results.into_iter().flatten().collect();
    let violations: Vec<&(f64, f64, f64)> = ok.iter().filter(|(_, e, b)| *e > b + 0.01).collect();
    let worst = violations
        .iter()
        .max_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)))
        .map(|(d, e, b)| format!("; worst d={d:.2}: eta_store={e:.4} vs bound {b:.4}"))
        .unwrap_or_default();
    // Exact optimal storage efficiency as a cross-check of the solver. It
    // increases with d, so its value at the next half-integer bounds it.
    let table: Vec<f64> = (2..=120)
        .into_par_iter()
        .map(|k| optimal_storage_eigenvalue(0.5 * k as f64))
        .collect();
    let exact_bound = |d: f64| table[((2.0 * d).ceil() as usize).clamp(2, 120) - 2];
    let exact_violations = ok.iter().filter(|(d, e, _)| *e > exact_bound(*d) + 0.01).count();
    let pass = formula_ok && errors == 0 && violations.is_empty() && elapsed <= Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "eta_opt(29)={exact}; {} draws, {errors} solver errors, {} exceed 1-2.9/d+0.01{worst}; \
             {exact_violations} exceed the exact optimal-storage eigenvalue+0.01 (eigenvalue at d=5: {:.4}); {elapsed:.1?}",
            ok.len(),
            violations.len(),
            table[8]
        ),
    )
}

/// Largest eigenvalue of k(z,z') = (d/2)e^{−d(z+z')/2}I₀(d√(zz')) on [0,1],
/// the optimal storage efficiency at optical depth d.
fn optimal_storage_eigenvalue(d: f64) -> f64 {
    const N: usize = 400;
    let h = 1.0 / N as f64;
    let z: Vec<f64> = (0..N).map(|i| (i as f64 + 0.5) * h).collect();
    let mut k = vec![0.0; N * N];
    for i in 0..N {
        for j in 0..N {
            let x = d * (z[i] * z[j]).sqrt();
            k[i * N + j] = 0.5 * d * h * (bessel_i0_log(x) - 0.5 * d * (z[i] + z[j])).exp();
        }
    }
    let mut v = vec![1.0; N];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..N).map(|i| (0..N).map(|j| k[i * N + j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let next = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
        if (next - lambda).abs() < 1e-13 {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// ln I₀(x) from its power series, summed in log-space-safe scaled form.
fn bessel_i0_log(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..400 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum.ln()
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for d in [1.0, 5.0, 25.0, 50.0] {
        for detuning in [0.0, 5.0] {
            let memory = MemoryParams::new(d, 0.1, detuning, 0.0).unwrap();
            let control = ControlPulse::new(0.0, 0.0, 1.0).unwrap();
            let grid = GridConfig::for_run(&memory, &control, None, 0.0).unwrap();
            let signal = gaussian_signal_at(0.1, 0.0, &grid.t_span).unwrap();
            let r = solve(&memory, &signal, &control, None, 0.0, &grid).unwrap();
            record_closure(r.ledger.closure());
            let input = to_spectrum(&signal).unwrap();
            let output = to_spectrum(&r.transmitted).unwrap();
            let h = transmission_spectrum_linear(&memory, output.omega());
            let expected: Vec<_> = input.complex().iter().zip(&h).map(|(a, h)| a * h).collect();
            let got = output.complex();
            let num: f64 = got.iter().zip(&expected).map(|(a, b)| (a - b).norm_sqr()).sum();
            let den: f64 = expected.iter().map(|b| b.norm_sqr()).sum();
            let err = (num / den).sqrt();
            worst = worst.max(err);
            parts.push(format!("d={d} D={detuning}: {err:.1e}"));
        }
    }
    outcome(worst < 1e-3, format!("relative L2 {}", parts.join(", ")))
}

fn criterion_3() -> Outcome {
    let (worst, n) = *WORST_CLOSURE.lock().unwrap();
    outcome(
        n > 0 && worst < 1e-3,
        format!("worst closure {worst:.2e} over {n} solves"),
    )
}

fn criterion_4() -> Outcome {
    let p = Protocol::Att.preset();
    let areas: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
    let scan = sweep_pulse_area(&p.memory, &p.control, &areas, &GridPolicy::Default).unwrap();
    let max = scan.first_max;
    let min = scan.next_min;
    let pass = match (max, min) {
        (Some((t, e)), Some((tm, em))) => (t - 1.0).abs() <= 0.15 && tm > t && em < e && !scan.is_partial(),
        _ => false,
    };
    outcome(
        pass,
        format!("first maximum {max:?} (theta/pi, eta_store), next minimum {min:?}"),
    )
}

fn criterion_5() -> Outcome {
    let cells = fig6_matrix(&GridPolicy::Default);
    let complete = cells.iter().all(|c| c.sweep.failures() == 0 && c.optimum.is_some());
    let mut notes = Vec::new();
    let mut classification_ok = true;
    let mut matched_ok = true;
    for c in &cells {
        let o = c.optimum.unwrap();
        let observed = o.is_off_resonant();
        if observed != c.predicted_norm {
            classification_ok = false;
        }
        if c.protocol == c.regime && o.delta_opt.abs() > NORM_THRESHOLD {
            matched_ok = false;
        }
        notes.push(format!(
            "{} in {} D_opt={:.2} eta={:.4}{}{}",
            c.protocol,
            c.regime,
            o.delta_opt,
            o.eta_max,
            if o.degenerate { " (flat)" } else { "" },
            if observed { " NORM" } else { "" }
        ));
    }
    let best_in_own = Protocol::ALL.iter().all(|&p| {
        let own = cells
            .iter()
            .find(|c| c.protocol == p && c.regime == p)
            .unwrap()
            .optimum
            .unwrap()
            .eta_max;
        cells
            .iter()
            .filter(|c| c.protocol == p && c.regime != p)
            .all(|c| c.optimum.unwrap().eta_max < own)
    });
    outcome(
        complete && classification_ok && matched_ok && best_in_own,
        format!(
            "complete={complete} NORM set == chi'<chi set: {classification_ok}, matched on resonance: {matched_ok}, \
             each protocol best in own regime: {best_in_own}; {}",
            notes.join("; ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let w: Vec<f64> = (0..2001).map(|k| -10.0 + 0.01 * k as f64).collect();
    let gauss = |c: f64, s: f64, a: f64| -> Vec<f64> {
        w.iter().map(|x| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).collect()
    };
    let a1 = SpectralField::new(w.clone(), gauss(0.0, 3.0, 1.0), w.iter().map(|x| 0.1 * x).collect()).unwrap();
    let a2 = SpectralField::new(
        w.clone(),
        gauss(0.5, 2.5, 0.6),
        w.iter().map(|x| 0.5 * (x - 0.5).powi(2) + 0.3 * x).collect(),
    )
    .unwrap();
    let ig = forward_interferogram(&a1, &a2, 20.0).unwrap();
    let rec = reconstruct_phase(&ig, a1.amplitude(), a2.amplitude(), a1.phase()).unwrap();
    let (mut got, mut want) = (Vec::new(), Vec::new());
    for k in 0..w.len() {
        if let Some(p) = rec.phase[k] {
            got.push(p);
            want.push(a2.phase()[k]);
        }
    }
    let rms = phase_rms_error(&got, &want);
    let worst_vis = (0..=300)
        .map(|k| {
            let s = 0.01 * k as f64;
            (visibility_quadrature(s).unwrap() - (-2.0 * s * s).exp()).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        rms < 1e-2 && worst_vis < 1e-6,
        format!(
            "phase RMS {rms:.2e} rad over {} support samples; worst visibility quadrature error {worst_vis:.2e}",
            got.len()
        ),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn noisy(values: &[f64], level: f64, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = Normal::new(0.0, level).unwrap();
    values.iter().map(|v| v * (1.0 + n.sample(&mut rng))).collect()
}

fn criterion_7() -> Outcome {
    let mut exact: Vec<(&str, f64)> = Vec::new();
    let t: Vec<f64> = (0..16).map(|k| 0.2 * k as f64).collect();

    let y: Vec<f64> = t.iter().map(|x| 72.0 * (-x / 1.3f64).exp()).collect();
    let f = fit_lifetime(
        &DecayScan::new(t.clone(), y, 100.0, 900.0).unwrap(),
        LifetimeModel::Exponential,
    )
    .unwrap();
    exact.push(("exponential", rel(f.lifetime, 1.3).max(rel(f.fit.params[0], 72.0))));

    let y: Vec<f64> = t.iter().map(|x| 55.0 * (-(x / 0.9f64).powi(2)).exp()).collect();
    let f = fit_lifetime(
        &DecayScan::new(t.clone(), y, 10.0, 800.0).unwrap(),
        LifetimeModel::Gaussian,
    )
    .unwrap();
    exact.push(("gaussian decay", rel(f.lifetime, 0.9).max(rel(f.fit.params[0], 55.0))));

    let p = [5.0, 12.0, 30.0, 60.0, 120.0, 250.0];
    let tp: Vec<f64> = p.iter().map(|x| 42.0 / x).collect();
    let f = fit_lifetime_vs_pressure(&p, &tp, false).unwrap();
    exact.push(("inverse", rel(f.fit.params[0], 42.0)));
    let tp: Vec<f64> = p.iter().map(|x| 42.0 / (x + 7.0)).collect();
    let f = fit_lifetime_vs_pressure(&p, &tp, true).unwrap();
    exact.push((
        "inverse offset",
        rel(f.fit.params[0], 42.0).max(rel(f.fit.params[1], 7.0)),
    ));

    let g: Vec<f64> = p.iter().map(|x| 310.0 + 0.12 * x).collect();
    let f = fit_linewidth_vs_pressure(&p, &g).unwrap();
    exact.push(("linewidth line", rel(f.params[0], 310.0).max(rel(f.params[1], 0.12))));

    let n = [0.1, 0.3, 0.7, 1.5, 3.0];
    let s: Vec<f64> = n.iter().map(|x| 1800.0 * x).collect();
    exact.push(("snr line", rel(fit_snr_linear(&n, &s).unwrap().snr_at_one, 1800.0)));

    let vm = VisibilityModel::new(0.06, 0.3).unwrap();
    let tv: Vec<f64> = (0..12).map(|k| 10f64.powf(k as f64 / 3.0)).collect();
    let v: Vec<f64> = tv.iter().map(|x| visibility_closed_form(&vm, *x).unwrap()).collect();
    let f = fit_visibility(&tv, &v).unwrap();
    exact.push(("visibility", rel(f.model.f1, 0.06).max(rel(f.model.f2, 0.3))));

    let x: Vec<f64> = (-20..=20).map(|k| 0.5 * k as f64).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|d| 0.45 * (-(d - 5.0).powi(2) / (2.0 * 2.2f64.powi(2))).exp())
        .collect();
    let f = fit_frequency_response(&x, &y).unwrap();
    let fwhm = 2.0 * (2.0 * 2f64.ln()).sqrt() * 2.2;
    exact.push((
        "gaussian peak",
        rel(f.center, 5.0).max(rel(f.fwhm, fwhm)).max(rel(f.amplitude, 0.45)),
    ));

    // Generic engine entry points on a model without a dedicated wrapper.
    let xs: Vec<f64> = (1..10).map(|k| k as f64 * 3.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| InverseOffset.value(*x, &[9.0, 2.5])).collect();
    let r = levenberg_marquardt(&InverseOffset, &xs, &ys, &scaled_starts(&[5.0, 1.0], &[1])).unwrap();
    exact.push((
        "engine inverse offset",
        rel(r.params[0], 9.0).max(rel(r.params[1], 2.5)),
    ));
    let r = fit_inverse(&xs, &xs.iter().map(|x| 9.0 / x).collect::<Vec<_>>()).unwrap();
    exact.push(("closed-form inverse", rel(r.params[0], 9.0)));
    let r = fit_line(&xs, &xs.iter().map(|x| 2.0 - 0.5 * x).collect::<Vec<_>>()).unwrap();
    exact.push(("closed-form line", rel(r.params[0], 2.0).max(rel(r.params[1], -0.5))));

    let worst_exact = exact.iter().map(|e| e.1).fold(0.0, f64::max);
    let worst_name = exact
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|e| e.0)
        .unwrap_or("");

    // Noisy round trips: 3% lifetime noise, 1% linewidth and SNR noise.
    let tn: Vec<f64> = (0..25).map(|k| 0.15 * k as f64).collect();
    let yn: Vec<f64> = tn.iter().map(|x| 80.0 * (-x / 1.0f64).exp()).collect();
    let life = fit_lifetime(
        &DecayScan::new(tn, noisy(&yn, 0.03, 101), 100.0, 900.0).unwrap(),
        LifetimeModel::Auto,
    )
    .unwrap();
    let life_err = rel(life.lifetime, 1.0);

    let pn: Vec<f64> = (0..40).map(|k| 25.0 * k as f64).collect();
    let gn: Vec<f64> = pn.iter().map(|x| 300.0 + 0.1 * x).collect();
    let lw = fit_linewidth_vs_pressure(&pn, &noisy(&gn, 0.01, 202)).unwrap();
    let lw_err = pn
        .iter()
        .map(|x| rel(lw.params[0] + lw.params[1] * x, 300.0 + 0.1 * x))
        .fold(0.0, f64::max);

    let nn: Vec<f64> = (1..=20).map(|k| 0.15 * k as f64).collect();
    let sn: Vec<f64> = nn.iter().map(|x| 1800.0 * x).collect();
    let snr_err = rel(fit_snr_linear(&nn, &noisy(&sn, 0.01, 303)).unwrap().snr_at_one, 1800.0);

    let pass = worst_exact < 1e-6 && life_err < 0.02 && lw_err < 0.01 && snr_err < 0.01;
    outcome(
        pass,
        format!(
            "{} models, worst exact-recovery error {worst_exact:.1e} ({worst_name}); noisy lifetime {:.2}% (<2%), \
             linewidth curve {:.2}% (<1%), SNR at n=1 {:.2}% (<1%)",
            exact.len(),
            100.0 * life_err,
            100.0 * lw_err,
            100.0 * snr_err
        ),
    )
}

fn criterion_8() -> Outcome {
    let a = figures_of_merit(980.0 / 880e9, 880e9, 2e9, 50.0, 240e9, 0.12e9).unwrap();
    let b = figures_of_merit(0.25, 880e9, 2e9, 50.0, 240e9, 0.12e9).unwrap();
    let fidelity = snr_to_fidelity(1800.0).unwrap();
    let pass = rel(a.tbp, 980.0) <= 1e-6
        && rel(b.trp, 5e8) <= 1e-12
        && rel(a.cold_od, 1e5) <= 1e-12
        && (fidelity - 0.99944).abs() <= 5e-5;
    outcome(
        pass,
        format!(
            "TBP={} TRP={} cold OD={} F(1800)={fidelity:.6}",
            a.tbp, b.trp, a.cold_od
        ),
    )
}

fn criterion_9() -> Outcome {
    let k = collision_kinetics(
        100.0 * 100.0,
        1100.0,
        (268e-12, 188e-12),
        (137.327 * ATOMIC_MASS_UNIT, 39.948 * ATOMIC_MASS_UNIT),
    )
    .unwrap();
    let ns = k.collision_time * 1e9;
    outcome(
        (0.5..=10.0).contains(&ns),
        format!(
            "Ba-Ar at 100 mbar, 1100 K: collision time {ns:.3} ns, mean free path {:.3e} m, D {:.3e} m^2/s",
            k.mean_free_path, k.diffusion_coefficient
        ),
    )
}
