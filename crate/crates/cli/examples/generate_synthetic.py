"""Regenerates the synthetic example datasets in this directory.

Every file is model output plus seeded Gaussian noise. None of them is a
digitization of measured data; each carries a comment line saying how it
was made.
"""

import math

import numpy as np

rng = np.random.default_rng(20240601)
C = 299_792_458.0
F0_GHZ = C / 553.5e-9 / 1e9


def write(name, header, comment, rows):
    with open(name, "w") as f:
        f.write(f"# {comment}\n")
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(repr(float(v)) for v in r) + "\n")


# Storage efficiency against storage time at 400 mbar: 26% * exp(-t / 11 ns), 2% relative noise.
t = np.linspace(0.0, 40.0, 25)
eta = 26.0 * np.exp(-t / 11.0) * (1 + 0.02 * rng.standard_normal(t.size))
write("lifetime_synthetic.csv", ["storage_time_ns", "efficiency_pct"],
      "synthetic: 26 * exp(-t / 11 ns) with 2% relative Gaussian noise", zip(t, eta))

# Lifetime against buffer-gas pressure: 3000 / (P + 100) ns, 3% relative noise.
p = np.linspace(200.0, 1300.0, 12)
life = 3000.0 / (p + 100.0) * (1 + 0.03 * rng.standard_normal(p.size))
write("lifetime_vs_pressure_synthetic.csv", ["pressure_mbar", "lifetime_ns"],
      "synthetic: 3000 / (P + 100) ns with 3% relative Gaussian noise", zip(p, life))

# Excited-state linewidth against pressure: 300 GHz + 0.1 GHz/mbar * P over 0-1000 mbar, 1% noise.
p = np.linspace(0.0, 1000.0, 15)
gamma = (300.0 + 0.1 * p) * (1 + 0.01 * rng.standard_normal(p.size))
write("linewidth_synthetic.csv", ["pressure_mbar", "linewidth_ghz"],
      "synthetic: 300 GHz + 0.1 GHz/mbar * P with 1% relative Gaussian noise", zip(p, gamma))

# SNR against mean input photon number: 1800 * n, 2% noise.
n = np.linspace(0.2, 5.0, 13)
snr = 1800.0 * n * (1 + 0.02 * rng.standard_normal(n.size))
write("snr_synthetic.csv", ["mean_photon_number", "snr"],
      "synthetic: 1800 * n with 2% relative Gaussian noise", zip(n, snr))

# Time-averaged visibility: exp(-2 (0.06 t^0.3)^2), 0.2% absolute noise.
tt = np.logspace(-2, 3, 21)
vis = np.exp(-2 * (0.06 * tt**0.3) ** 2) + 0.002 * rng.standard_normal(tt.size)
vis = np.minimum(vis, 1.0)
write("visibility_synthetic.csv", ["integration_time_s", "visibility"],
      "synthetic: exp(-2 (0.06 t^0.3)^2) with 0.002 absolute Gaussian noise", zip(tt, vis))

# Total efficiency against detuning: 0.26 * Gaussian of 6 gamma FWHM centred at 1.5 gamma, 0.005 noise.
dd = np.linspace(-12.0, 12.0, 25)
sig = 6.0 / (2 * math.sqrt(2 * math.log(2)))
eff = 0.26 * np.exp(-((dd - 1.5) ** 2) / (2 * sig**2)) + 0.005 * rng.standard_normal(dd.size)
write("frequency_response_synthetic.csv", ["detuning_over_gamma", "efficiency"],
      "synthetic: 0.26 * exp(-(D - 1.5)^2 / (2 s^2)), FWHM 6, with 0.005 absolute Gaussian noise", zip(dd, eff))

# Signal spectrum: Gaussian intensity with 880 GHz FWHM at 553.5 nm, amplitude density per GHz.
f = F0_GHZ + np.arange(-3000.0, 3000.0 + 1e-9, 20.0)
amp = np.exp(-2 * math.log(2) * ((f - F0_GHZ) / 880.0) ** 2)
write("spectrum_880ghz.csv", ["frequency_GHz", "amplitude"],
      "synthetic: Gaussian intensity spectrum, 880 GHz FWHM, centred at 553.5 nm", zip(f, amp))

# Spectral-interferometry bundle: transform-limited reference arm, chirped
# signal arm, delay 2 ps, S = |A1|^2 + |A2|^2 + 2|A1||A2| sin(w dt + phi2 - phi1).
f = F0_GHZ + np.arange(-1500.0, 1500.0 + 1e-9, 10.0)
w = 2.0 * math.pi * f * 1e9
dw = 2.0 * math.pi * (f - F0_GHZ) * 1e-3  # rad/ps
a1 = np.exp(-2 * math.log(2) * ((f - F0_GHZ) / 880.0) ** 2)
a2 = 0.5 * np.exp(-2 * math.log(2) * ((f - F0_GHZ) / 700.0) ** 2)
phi2 = 0.3 + 0.02 * dw**2 + 0.002 * dw**3
dt = 2e-12
s = a1**2 + a2**2 + 2 * a1 * a2 * np.sin(w * dt + phi2)
comment = "synthetic: reference 880 GHz intensity FWHM with flat phase; signal 700 GHz intensity FWHM, phase 0.3 + 0.02 dw^2 + 0.002 dw^3 (dw in rad/ps); delay 2 ps"
write("interferometry/interferogram.csv", ["frequency_GHz", "counts"], comment, zip(f, s))
write("interferometry/reference.csv", ["frequency_GHz", "counts"], comment, zip(f, a1**2))
write("interferometry/signal.csv", ["frequency_GHz", "counts"], comment, zip(f, a2**2))
write("interferometry/truth_phase.csv", ["frequency_GHz", "phase_rad"], comment, zip(f, phi2))
