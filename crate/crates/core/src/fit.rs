//! Least-squares fitting: a damped Gauss-Newton (Levenberg-Marquardt)
//! engine with deterministic multi-start, and closed-form linear fits.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const REL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: String,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    /// From s²(JᵀJ)⁻¹; NaN when there are no residual degrees of freedom.
    pub std_errs: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn std_err(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errs[i])
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    /// Turns a non-converged result into [`Error::NoConvergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                residual_norm: self.residual_norm,
                best: self.params,
            })
        }
    }
}

/// A scalar model y = f(x; p) with an analytic gradient in p.
pub trait Model {
    fn name(&self) -> &'static str;
    fn param_names(&self) -> &'static [&'static str];
    fn value(&self, x: f64, p: &[f64]) -> f64;
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]);
}

/// η₀·exp(−k·t).
pub struct ExpDecay;

impl Model for ExpDecay {
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["amplitude", "rate"]
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (-p[1] * t).exp()
    }
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let e = (-p[1] * t).exp();
        out[0] = e;
        out[1] = -p[0] * t * e;
    }
}

/// η₀·exp(−(k·t)²).
pub struct GaussDecay;

impl Model for GaussDecay {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["amplitude", "rate"]
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (-(p[1] * t).powi(2)).exp()
    }
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let e = (-(p[1] * t).powi(2)).exp();
        out[0] = e;
        out[1] = -2.0 * p[0] * p[1] * t * t * e;
    }
}

/// a/(x + b).
pub struct InverseOffset;

impl Model for InverseOffset {
    fn name(&self) -> &'static str {
        "inverse_offset"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["a", "b"]
    }
    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] / (x + p[1])
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let u = 1.0 / (x + p[1]);
        out[0] = u;
        out[1] = -p[0] * u * u;
    }
}

/// exp(−2(f₁·t^f₂)²).
pub struct Visibility;

impl Model for Visibility {
    fn name(&self) -> &'static str {
        "visibility"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["f1", "f2"]
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        (-2.0 * (p[0] * pow_or_zero(t, p[1])).powi(2)).exp()
    }
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let tp = pow_or_zero(t, p[1]);
        let v = (-2.0 * (p[0] * tp).powi(2)).exp();
        out[0] = -4.0 * p[0] * tp * tp * v;
        out[1] = if t > 0.0 {
            -4.0 * p[0] * p[0] * tp * tp * t.ln() * v
        } else {
            0.0
        };
    }
}

fn pow_or_zero(t: f64, e: f64) -> f64 {
    if t > 0.0 {
        t.powf(e)
    } else {
        0.0
    }
}

/// A·exp(−(x − c)²/(2σ²)).
pub struct Gaussian;

impl Model for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian_peak"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["amplitude", "center", "sigma"]
    }
    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp()
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let u = x - p[1];
        let s2 = p[2] * p[2];
        let e = (-u * u / (2.0 * s2)).exp();
        out[0] = e;
        out[1] = p[0] * e * u / s2;
        out[2] = p[0] * e * u * u / (s2 * p[2]);
    }
}

/// Pairs sorted by (x, y), so results do not depend on input order.
pub(crate) fn sorted_pairs(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::param(
            "data",
            format!("x and y lengths differ ({} vs {})", x.len(), y.len()),
        ));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::param("data", format!("non-finite value {v}")));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(pairs.into_iter().unzip())
}

/// The guess itself, then each scaled by 0.5, 2, 0.2 and 5 in the selected
/// coordinates.
pub fn scaled_starts(guess: &[f64], scaled: &[usize]) -> Vec<Vec<f64>> {
    [1.0, 0.5, 2.0, 0.2, 5.0]
        .iter()
        .map(|&s| {
            let mut p = guess.to_vec();
            for &i in scaled {
                p[i] *= s;
            }
            p
        })
        .collect()
}

/// Nonlinear least squares from several starts. Returns the converged run
/// with the smallest residual, or the best non-converged run with
/// `converged = false` if none converged.
pub fn levenberg_marquardt<M: Model>(model: &M, x: &[f64], y: &[f64], starts: &[Vec<f64>]) -> Result<FitResult> {
    let m = model.param_names().len();
    if starts.is_empty() || starts.iter().any(|s| s.len() != m) {
        return Err(Error::param("starts", format!("need at least one start of length {m}")));
    }
    if x.len() < m {
        return Err(Error::TooFewPoints {
            needed: m,
            found: x.len(),
        });
    }
    let (x, y) = sorted_pairs(x, y)?;
    let mut best: Option<Run> = None;
    for start in starts {
        let run = lm_run(model, &x, &y, start);
        let better = match &best {
            None => true,
            Some(b) => (run.converged, -run.cost) > (b.converged, -b.cost),
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("at least one start");
    let std_errs = standard_errors(model, &x, &y, &run.p, run.cost);
    Ok(FitResult {
        model: model.name().to_string(),
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        params: run.p,
        std_errs,
        residual_norm: run.cost.sqrt(),
        converged: run.converged,
        iterations: run.iterations,
    })
}

struct Run {
    p: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn cost_of<M: Model>(model: &M, x: &[f64], y: &[f64], p: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - model.value(xi, p)).powi(2))
        .sum()
}

fn jacobian<M: Model>(model: &M, x: &[f64], p: &[f64]) -> DMatrix<f64> {
    let m = p.len();
    let mut jac = DMatrix::zeros(x.len(), m);
    let mut g = vec![0.0; m];
    for (i, &xi) in x.iter().enumerate() {
        model.gradient(xi, p, &mut g);
        for k in 0..m {
            jac[(i, k)] = g[k];
        }
    }
    jac
}

fn lm_run<M: Model>(model: &M, x: &[f64], y: &[f64], start: &[f64]) -> Run {
    let mut p = start.to_vec();
    let mut cost = cost_of(model, x, y, &p);
    if !cost.is_finite() {
        return Run {
            p,
            cost: f64::INFINITY,
            converged: false,
            iterations: 0,
        };
    }
    let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lambda = 1e-3;
    for it in 1..=MAX_ITERATIONS {
        if cost <= 1e-30 * scale {
            return Run {
                p,
                cost,
                converged: true,
                iterations: it - 1,
            };
        }
        let jac = jacobian(model, x, &p);
        let r = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(&xi, &yi)| yi - model.value(xi, &p)));
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * r;
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            let mut a = jtj.clone();
            for k in 0..p.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
            }
            if let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) {
                let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let c = cost_of(model, x, y, &trial);
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost;
                    p = trial;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    if rel < REL_TOLERANCE {
                        return Run {
                            p,
                            cost,
                            converged: true,
                            iterations: it,
                        };
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                // No descent direction left: a stationary point.
                return Run {
                    p,
                    cost,
                    converged: true,
                    iterations: it,
                };
            }
        }
    }
    Run {
        p,
        cost,
        converged: false,
        iterations: MAX_ITERATIONS,
    }
}

fn standard_errors<M: Model>(model: &M, x: &[f64], _y: &[f64], p: &[f64], cost: f64) -> Vec<f64> {
    let m = p.len();
    let dof = x.len().saturating_sub(m);
    if dof == 0 {
        return vec![f64::NAN; m];
    }
    let jac = jacobian(model, x, p);
    let s2 = cost / dof as f64;
    match (jac.transpose() * &jac).try_inverse() {
        Some(cov) => (0..m).map(|k| (s2 * cov[(k, k)]).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; m],
    }
}

/// Ordinary least-squares line y = intercept + slope·x.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let (x, y) = sorted_pairs(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 1e-14 * x.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient("all abscissae are identical".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let std_errs = if n > 2 {
        let s2 = rss / (nf - 2.0);
        let sx2: f64 = x.iter().map(|v| v * v).sum();
        vec![(s2 * sx2 / (nf * sxx)).sqrt(), (s2 / sxx).sqrt()]
    } else {
        vec![f64::NAN; 2]
    };
    Ok(FitResult {
        model: "linear".into(),
        param_names: vec!["intercept".into(), "slope".into()],
        params: vec![intercept, slope],
        std_errs,
        residual_norm: rss.sqrt(),
        converged: true,
        iterations: 0,
    })
}

/// Least-squares y = a/x, closed form.
pub fn fit_inverse(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let (x, y) = sorted_pairs(x, y)?;
    let n = x.len();
    if n < 1 {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    if let Some(v) = x.iter().find(|v| **v == 0.0) {
        return Err(Error::param("x", format!("must be non-zero, got {v}")));
    }
    let suu: f64 = x.iter().map(|v| v.powi(-2)).sum();
    let suy: f64 = x.iter().zip(&y).map(|(a, b)| b / a).sum();
    let a = suy / suu;
    let rss: f64 = x.iter().zip(&y).map(|(u, v)| (v - a / u).powi(2)).sum();
    let se = if n > 1 {
        (rss / (n as f64 - 1.0) / suu).sqrt()
    } else {
        f64::NAN
    };
    Ok(FitResult {
        model: "inverse".into(),
        param_names: vec!["a".into()],
        params: vec![a],
        std_errs: vec![se],
        residual_norm: rss.sqrt(),
        converged: true,
        iterations: 0,
    })
}
