//! Least-squares polynomial fits of a coordinate against time.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("design matrix is singular (duplicate or non-finite sample times)")]
    SingularDesign,
    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),
    #[error("expected a degree-{expected} fit, got degree {got}")]
    WrongDegree { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    #[default]
    Ols,
    /// Iteratively reweighted least squares with Huber weights.
    Huber,
}

const HUBER_K: f64 = 1.345;
const HUBER_ITERATIONS: usize = 20;

/// Polynomial `c0 + c1 t + c2 t²` (length degree + 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub degree: usize,
    pub coeffs: Vec<f64>,
    pub residual_rms: f64,
    pub n_samples: usize,
    pub t_span: f64,
}

impl PolyFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Second time derivative of a quadratic fit.
pub fn acceleration_of(fit: &PolyFit) -> Result<f64, FitError> {
    if fit.degree != 2 {
        return Err(FitError::WrongDegree { expected: 2, got: fit.degree });
    }
    Ok(2.0 * fit.coeffs[2])
}

/// Slope of a linear fit.
pub fn velocity_of(fit: &PolyFit) -> Result<f64, FitError> {
    if fit.degree != 1 {
        return Err(FitError::WrongDegree { expected: 1, got: fit.degree });
    }
    Ok(fit.coeffs[1])
}

/// Centred, scaled solution in τ = (t − mean)/scale, plus residuals.
struct CenteredFit {
    beta: Vec<f64>,
    mean: f64,
    scale: f64,
    residuals: Vec<f64>,
}

fn solve_centered(samples: &[(f64, f64)], degree: usize, weights: Option<&[f64]>) -> Result<CenteredFit, FitError> {
    let n = samples.len();
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / n as f64;
    let scale = samples.iter().map(|s| (s.0 - mean).abs()).fold(0.0, f64::max);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(FitError::SingularDesign);
    }
    let mut a = DMatrix::zeros(n, degree + 1);
    let mut b = DVector::zeros(n);
    for (i, &(t, x)) in samples.iter().enumerate() {
        let tau = (t - mean) / scale;
        let w = weights.map_or(1.0, |w| w[i].sqrt());
        let mut p = 1.0;
        for k in 0..=degree {
            a[(i, k)] = w * p;
            p *= tau;
        }
        b[i] = w * x;
    }
    let qr = a.qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * rmax) {
        return Err(FitError::SingularDesign);
    }
    let qtb = qr.q().transpose() * &b;
    let beta = r.solve_upper_triangular(&qtb).ok_or(FitError::SingularDesign)?;
    let beta: Vec<f64> = beta.iter().copied().collect();
    let residuals = samples
        .iter()
        .map(|&(t, x)| {
            let tau = (t - mean) / scale;
            x - beta.iter().rev().fold(0.0, |acc, c| acc * tau + c)
        })
        .collect();
    Ok(CenteredFit { beta, mean, scale, residuals })
}

/// Convert τ-coefficients back to plain time coefficients.
fn unshift(beta: &[f64], mean: f64, scale: f64) -> Vec<f64> {
    let m = mean;
    match beta.len() {
        2 => {
            let (b0, b1) = (beta[0], beta[1] / scale);
            vec![b0 - b1 * m, b1]
        }
        3 => {
            let (b0, b1, b2) = (beta[0], beta[1] / scale, beta[2] / (scale * scale));
            vec![b0 - b1 * m + b2 * m * m, b1 - 2.0 * b2 * m, b2]
        }
        _ => unreachable!("degree checked by caller"),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn check_input(samples: &[(f64, f64)], degree: usize) -> Result<(), FitError> {
    if !(1..=2).contains(&degree) {
        return Err(FitError::UnsupportedDegree(degree));
    }
    if samples.len() < degree + 2 {
        return Err(FitError::TooFewSamples { needed: degree + 2, got: samples.len() });
    }
    if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
        return Err(FitError::SingularDesign);
    }
    let mut ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ts.sort_by(f64::total_cmp);
    if ts.windows(2).any(|w| w[0] == w[1]) {
        return Err(FitError::SingularDesign);
    }
    Ok(())
}

/// Ordinary least-squares fit of degree 1 or 2.
pub fn fit_poly(samples: &[(f64, f64)], degree: usize) -> Result<PolyFit, FitError> {
    fit_poly_with(samples, degree, FitMethod::Ols)
}

pub fn fit_poly_with(samples: &[(f64, f64)], degree: usize, method: FitMethod) -> Result<PolyFit, FitError> {
    check_input(samples, degree)?;
    let mut fit = solve_centered(samples, degree, None)?;
    if method == FitMethod::Huber {
        for _ in 0..HUBER_ITERATIONS {
            let scale = median(fit.residuals.iter().map(|r| r.abs()).collect()) / 0.6745;
            if scale <= 0.0 {
                break;
            }
            let c = HUBER_K * scale;
            let w: Vec<f64> = fit.residuals.iter().map(|r| if r.abs() <= c { 1.0 } else { c / r.abs() }).collect();
            fit = solve_centered(samples, degree, Some(&w))?;
        }
    }
    let n = samples.len();
    let sse: f64 = fit.residuals.iter().map(|r| r * r).sum();
    let (tmin, tmax) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.0), hi.max(s.0)));
    Ok(PolyFit {
        degree,
        coeffs: unshift(&fit.beta, fit.mean, fit.scale),
        residual_rms: (sse / n as f64).sqrt(),
        n_samples: n,
        t_span: tmax - tmin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Share of the total variance additionally explained by the quadratic term.
    pub quad_over_linear_gain: f64,
    /// Largest time gap between consecutive samples (s).
    pub max_gap_s: f64,
    /// |2 c2| · t_span / |c1|: relative velocity change across the window.
    pub relative_velocity_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub diagnostics: FitDiagnostics,
    pub linear: PolyFit,
    pub quadratic: PolyFit,
    pub passed: bool,
}

pub const DEFAULT_TERMINAL_THRESHOLD: f64 = 0.05;

/// Decide whether a track is already moving at constant velocity.
pub fn terminal_regime_check(samples: &[(f64, f64)], threshold: f64) -> Result<RegimeCheck, FitError> {
    if samples.len() < 4 {
        return Err(FitError::TooFewSamples { needed: 4, got: samples.len() });
    }
    let linear = fit_poly(samples, 1)?;
    let quadratic = fit_poly(samples, 2)?;
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sst: f64 = samples.iter().map(|s| (s.1 - mean_x).powi(2)).sum();
    let sse1 = linear.residual_rms.powi(2) * n;
    let sse2 = quadratic.residual_rms.powi(2) * n;
    let gain = if sst > 0.0 { ((sse1 - sse2) / sst).max(0.0) } else { 0.0 };

    let mut ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ts.sort_by(f64::total_cmp);
    let max_gap = ts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    let slope = linear.coeffs[1];
    let dv = (2.0 * quadratic.coeffs[2]).abs() * quadratic.t_span;
    let rel = if slope != 0.0 { dv / slope.abs() } else { f64::INFINITY };
    let passed = rel < threshold && gain < threshold;
    Ok(RegimeCheck {
        diagnostics: FitDiagnostics { quad_over_linear_gain: gain, max_gap_s: max_gap, relative_velocity_change: rel },
        linear,
        quadratic,
        passed,
    })
}
