//! Least-squares fits: fringe amplitude, coupling, power law, coherence time.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub parameters: Vec<Parameter>,
    /// Residual sum of squares (weighted when the fit was).
    pub rss: f64,
    /// Degrees of freedom; 0 for exactly determined problems.
    pub dof: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of a parameter the fit is known to produce.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map_or(f64::NAN, |p| p.value)
    }

    pub fn error(&self, name: &str) -> f64 {
        self.param(name).map_or(f64::NAN, |p| p.error)
    }

    fn new(names: &[&str], values: &[f64], errors: &[f64], rss: f64, dof: usize) -> Self {
        let parameters = names
            .iter()
            .zip(values.iter().zip(errors))
            .map(|(n, (&value, &error))| Parameter { name: n.to_string(), value, error })
            .collect();
        Self { parameters, rss, dof, warnings: Vec::new() }
    }
}

/// One fringe point: analysis phase, parity estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringePoint {
    pub phi: f64,
    pub value: f64,
    pub sigma: f64,
}

/// Linear least squares y ≈ X·β. Errors from the residual-scaled covariance.
fn linear_lsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64, usize)> {
    let (n, k) = x.shape();
    let sv = x.clone().svd(false, false).singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let column_scale = (0..k).map(|j| x.column(j).amax()).fold(0.0f64, f64::max) * (n as f64).sqrt();
    if !(hi > 0.0 && lo > 1e-10 * hi && hi > 1e-9 * column_scale.max(1.0)) {
        return Err(Error::Fit("design matrix is rank deficient".into()));
    }
    let inv = (x.transpose() * x).try_inverse().ok_or_else(|| Error::Fit("design matrix is rank deficient".into()))?;
    let beta = &inv * x.transpose() * y;
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    let dof = n - k;
    let s2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let errors = inv.diagonal().map(|v| (v * s2).max(0.0).sqrt());
    Ok((beta, errors, rss, dof))
}

fn distinct(values: impl Iterator<Item = f64>, tol: f64) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= tol * b.abs().max(1.0));
    v.len()
}

/// Fits A·sin(φ).
pub fn visibility_from_fringe(points: &[FringePoint]) -> Result<FitResult> {
    if distinct(points.iter().map(|p| p.phi), 1e-12) < 3 {
        return Err(Error::InsufficientData("fringe needs at least 3 distinct phases".into()));
    }
    let x = DMatrix::from_iterator(points.len(), 1, points.iter().map(|p| p.phi.sin()));
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.value));
    let (b, e, rss, dof) = linear_lsq(&x, &y)?;
    Ok(FitResult::new(&["amplitude"], &[b[0]], &[e[0]], rss, dof))
}

/// Fits a·sin(φ) + b·cos(φ); `amplitude` is √(a² + b²) and `phase` atan2(b, a).
pub fn fringe_free_phase(points: &[FringePoint]) -> Result<FitResult> {
    if distinct(points.iter().map(|p| p.phi), 1e-12) < 3 {
        return Err(Error::InsufficientData("fringe needs at least 3 distinct phases".into()));
    }
    let n = points.len();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { points[i].phi.sin() } else { points[i].phi.cos() });
    let y = DVector::from_iterator(n, points.iter().map(|p| p.value));
    let (b, e, rss, dof) = linear_lsq(&x, &y)?;
    let amp = b[0].hypot(b[1]);
    let amp_err = if amp > 0.0 { ((b[0] * e[0]).powi(2) + (b[1] * e[1]).powi(2)).sqrt() / amp } else { e[0].max(e[1]) };
    Ok(FitResult::new(&["sin", "cos", "amplitude", "phase"], &[b[0], b[1], amp, b[1].atan2(b[0])], &[e[0], e[1], amp_err, if amp > 0.0 { amp_err / amp } else { f64::INFINITY }], rss, dof))
}

/// ξ = arcsin(A/α)/(4T) with first-order error propagation.
pub fn fit_coupling_from_fringe(amplitude: f64, amplitude_error: f64, alpha: f64, t: f64) -> Result<FitResult> {
    if !(alpha > 0.0 && t > 0.0) {
        return Err(Error::invalid("coupling inversion", "alpha and T must be positive"));
    }
    let r = amplitude / alpha;
    if r.abs() > 1.0 {
        return Err(Error::Fit(format!("amplitude/alpha = {r} exceeds 1")));
    }
    let xi = r.asin() / (4.0 * t);
    let slope = 1.0 / (alpha * 4.0 * t * (1.0 - r * r).sqrt());
    Ok(FitResult::new(&["xi"], &[xi], &[amplitude_error * slope], 0.0, 0))
}

/// Damped Gauss–Newton on weighted residuals r_i = (y_i − f(x_i; p))/σ_i.
/// Returns parameters, their covariance (JᵀWJ)⁻¹ and the weighted RSS.
pub fn levenberg_marquardt<F>(
    model: F,
    xs: &[f64],
    ys: &[f64],
    sigmas: &[f64],
    start: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>, f64)>
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = xs.len();
    let k = start.len();
    let residuals = |p: &[f64]| -> DVector<f64> { DVector::from_fn(n, |i, _| (ys[i] - model(p, xs[i])) / sigmas[i]) };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(n, k);
        let mut q = p.to_vec();
        for c in 0..k {
            let h = 1e-7 * p[c].abs().max(1e-7);
            q[c] = p[c] + h;
            let up: Vec<f64> = xs.iter().map(|&x| model(&q, x)).collect();
            q[c] = p[c] - h;
            let down: Vec<f64> = xs.iter().map(|&x| model(&q, x)).collect();
            q[c] = p[c];
            for i in 0..n {
                j[(i, c)] = (up[i] - down[i]) / (2.0 * h * sigmas[i]);
            }
        }
        j
    };
    let mut p = start.to_vec();
    let mut r = residuals(&p);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::Fit("model is not finite at the starting point".into()));
    }
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let j = jacobian(&p);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for d in 0..k {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&trial);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct <= cost {
                let rel = (cost - ct) / cost.max(1e-300);
                let small_step = step.iter().zip(&trial).all(|(s, v)| s.abs() <= 1e-12 * v.abs().max(1e-12));
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !(rel < 1e-15 || small_step);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let j = jacobian(&p);
    let cov = (j.transpose() * &j)
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular curvature at the optimum".into()))?;
    Ok((p, cov, cost))
}

/// Standard errors: absolute when every σ was positive, otherwise scaled by the residual variance.
fn errors_from(cov: &DMatrix<f64>, rss: f64, dof: usize, absolute: bool) -> Vec<f64> {
    let s2 = if absolute {
        1.0
    } else if dof > 0 {
        rss / dof as f64
    } else {
        0.0
    };
    cov.diagonal().iter().map(|v| (v * s2).max(0.0).sqrt()).collect()
}

fn weights(sigmas: Option<&[f64]>, n: usize) -> Result<(Vec<f64>, bool)> {
    match sigmas {
        Some(s) if s.len() != n => Err(Error::invalid("sigmas", "length differs from data")),
        Some(s) if s.iter().all(|&v| v > 0.0 && v.is_finite()) => Ok((s.to_vec(), true)),
        _ => Ok((vec![1.0; n], false)),
    }
}

/// One-parameter fit of V(T) = α(T)·sin(4ξT). `points` are (T, V, σ_V),
/// `alphas` the contrast at each T.
pub fn fit_visibility_vs_time(points: &[(f64, f64, f64)], alphas: &[f64]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 time points".into()));
    }
    if alphas.len() != points.len() {
        return Err(Error::invalid("alphas", "one contrast per time point"));
    }
    let n = points.len();
    let sig: Vec<f64> = points.iter().map(|p| p.2).collect();
    let (sig, absolute) = weights(Some(&sig), n)?;
    let idx: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let model = |p: &[f64], i: f64| {
        let i = i as usize;
        alphas[i] * (4.0 * p[0] * points[i].0).sin()
    };
    let t_max = points.iter().map(|p| p.0).fold(0.0f64, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::invalid("time points", "need a positive T"));
    }
    // coarse scan over one period of the longest point, then refine
    let cost = |xi: f64| -> f64 { (0..n).map(|i| ((ys[i] - model(&[xi], i as f64)) / sig[i]).powi(2)).sum() };
    let best = (-1000..=1000)
        .map(|j| j as f64 / 1000.0 * std::f64::consts::PI / (4.0 * t_max))
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap_or(0.0);
    let (p, cov, rss) = levenberg_marquardt(model, &idx, &ys, &sig, &[if best == 0.0 { 1e-9 } else { best }])?;
    let dof = n - 1;
    let e = errors_from(&cov, rss, dof, absolute);
    Ok(FitResult::new(&["xi"], &[p[0]], &[e[0]], rss, dof))
}

/// log ξ = log C − n·log d. Non-positive ξ are dropped with a warning.
/// `sigmas` (on ξ) switch to weighted regression.
pub fn fit_power_law(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Result<FitResult> {
    if let Some(s) = sigmas {
        if s.len() != points.len() {
            return Err(Error::invalid("sigmas", "length differs from data"));
        }
    }
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for (i, &(d, xi)) in points.iter().enumerate() {
        if !(d > 0.0) {
            return Err(Error::invalid("distance", format!("non-positive d = {d}")));
        }
        if xi > 0.0 {
            let w = sigmas.map_or(1.0, |s| if s[i] > 0.0 { xi / s[i] } else { 1.0 });
            rows.push((d.ln(), xi.ln(), w));
        } else {
            warnings.push(format!("excluded d = {d:e} m with non-positive coupling {xi:e}"));
        }
    }
    if distinct(rows.iter().map(|r| r.0), 1e-12) < 3 {
        return Err(Error::InsufficientData("power law needs at least 3 distinct distances with positive coupling".into()));
    }
    let weighted = sigmas.is_some_and(|s| s.iter().all(|&v| v > 0.0));
    let m = rows.len();
    let x = DMatrix::from_fn(m, 2, |i, j| if j == 0 { rows[i].2 } else { rows[i].0 * rows[i].2 });
    let y = DVector::from_iterator(m, rows.iter().map(|r| r.1 * r.2));
    let (b, e, rss, dof) = linear_lsq(&x, &y)?;
    let e = if weighted {
        let inv = (x.transpose() * &x).try_inverse().ok_or_else(|| Error::Fit("singular".into()))?;
        DVector::from_fn(2, |i, _| inv[(i, i)].sqrt())
    } else {
        e
    };
    let mut fit = FitResult::new(&["n", "prefactor"], &[-b[1], b[0].exp()], &[e[1], b[0].exp() * e[0]], rss, dof);
    fit.warnings = warnings;
    Ok(fit)
}

/// A(T) = A₀·exp(−T/τ) on (T, A, σ_A) points. Two points are inverted
/// exactly; more are fitted. Non-decaying data give τ = ∞ with a warning.
pub fn fit_coherence_time(points: &[(f64, f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 time points".into()));
    }
    if distinct(points.iter().map(|p| p.0), 1e-12) < 2 {
        return Err(Error::InsufficientData("need at least 2 distinct times".into()));
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::Fit("amplitudes must be positive".into()));
    }
    let infinite = |a0: f64, a0_err: f64, rss: f64, dof: usize| {
        let mut f = FitResult::new(&["tau", "a0"], &[f64::INFINITY, a0], &[f64::INFINITY, a0_err], rss, dof);
        f.warnings.push("no decay resolved; tau is a lower bound only".into());
        f
    };
    if points.len() == 2 {
        let (mut p, mut q) = (points[0], points[1]);
        if q.0 < p.0 {
            std::mem::swap(&mut p, &mut q);
        }
        let ratio = (p.1 / q.1).ln();
        if ratio <= 0.0 {
            return Ok(infinite(p.1, p.2, 0.0, 0));
        }
        let dt = q.0 - p.0;
        let tau = dt / ratio;
        // ∂τ/∂A = ∓ dt/(ratio² A)
        let tau_err = dt / (ratio * ratio) * ((p.2 / p.1).powi(2) + (q.2 / q.1).powi(2)).sqrt();
        let a0 = p.1 * (p.0 / tau).exp();
        let a0_err = a0 * ((p.2 / p.1).powi(2) + (p.0 / tau * tau_err / tau).powi(2)).sqrt();
        return Ok(FitResult::new(&["tau", "a0"], &[tau, a0], &[tau_err, a0_err], 0.0, 0));
    }
    let n = points.len();
    let sig: Vec<f64> = points.iter().map(|p| p.2).collect();
    let (sig, absolute) = weights(Some(&sig), n)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    // start from the log-linear fit, parameterized by the decay rate
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    let y = DVector::from_iterator(n, ys.iter().map(|v| v.ln()));
    let (b, _, _, _) = linear_lsq(&x, &y)?;
    let model = |p: &[f64], t: f64| p[0] * (-p[1] * t).exp();
    let (p, cov, rss) = levenberg_marquardt(model, &xs, &ys, &sig, &[b[0].exp(), -b[1]])?;
    let dof = n - 2;
    let e = errors_from(&cov, rss, dof, absolute);
    if p[1] <= 0.0 {
        return Ok(infinite(p[0], e[0], rss, dof));
    }
    let tau = 1.0 / p[1];
    Ok(FitResult::new(&["tau", "a0"], &[tau, p[0]], &[e[1] * tau * tau, e[0]], rss, dof))
}
