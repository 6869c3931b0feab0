//! Majorization machinery for l_p sidelobe minimization.
//!
//! Everything is kept in the normalized convention where the objective
//! `sum_k |r_k|^p` is divided by `t^p`, `t` being the current l_p sidelobe
//! norm. The division is a positive constant within one iteration, so the
//! minimizer of the surrogate is unchanged and large `p` cannot overflow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{lp_norm, CorrelationProfile, Correlator};
use crate::seqcore::UnimodularSequence;

/// Supporting quantities for one MM step at the current iterate.
#[derive(Debug, Clone)]
pub struct MajorizerParams {
    pub p: f64,
    /// l_p norm of the sidelobes of the current iterate.
    pub t: f64,
    /// Quadratic coefficient per sidelobe lag `k = 1..N-1` (index `k-1`).
    pub alpha: Vec<f64>,
    /// Linear coefficient per sidelobe lag; never positive.
    pub beta: Vec<f64>,
    /// Combined lag weights `alpha + beta / (2 |r_k|)`.
    pub w_hat: Vec<f64>,
    pub lambda_l: f64,
    pub lambda_u: f64,
    /// `F c~`, length 2N; real up to rounding.
    pub mu_tilde: Vec<Complex64>,
    /// `F [x; 0]`, length 2N.
    pub f: Vec<Complex64>,
    /// Non-negative sidelobe magnitudes `|r_k|`, `k = 1..N-1`.
    pub sidelobes: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [0, 1].
const GL_NODES: [(f64, f64); 8] = [
    (0.019_855_071_751_231_856, 0.050_614_268_145_188_13),
    (0.101_666_761_293_186_6, 0.111_190_517_226_687_24),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_64),
    (0.408_282_678_752_175_1, 0.181_341_891_689_180_99),
    (0.591_717_321_247_824_9, 0.181_341_891_689_180_99),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_64),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
    (0.980_144_928_248_768_2, 0.050_614_268_145_188_13),
];

/// Quadratic coefficient of the tangent majorizer of `s^p` touching at
/// `s = u t`, `u = |r| / t`, normalized by `t^p`:
/// `(1 + (p-1) u^p - p u^(p-1)) / (t - |r|)^2`.
///
/// Near `u = 1` the numerator cancels catastrophically, so the Taylor
/// remainder `p (p-1) / t^2 * int_0^1 (1-s) (u + s (1-u))^(p-2) ds` is used.
pub fn alpha_normalized(u: f64, t: f64, p: f64) -> f64 {
    if p * (1.0 - u) < 0.1 {
        alpha_quadrature(u, p) / (t * t)
    } else {
        alpha_direct(u, p) / (t * t)
    }
}

fn alpha_direct(u: f64, p: f64) -> f64 {
    let delta = 1.0 - u;
    (1.0 + (p - 1.0) * u.powf(p) - p * u.powf(p - 1.0)) / (delta * delta)
}

fn alpha_quadrature(u: f64, p: f64) -> f64 {
    let delta = 1.0 - u;
    let integral: f64 = GL_NODES
        .iter()
        .map(|&(s, w)| w * (1.0 - s) * (u + s * delta).powf(p - 2.0))
        .sum();
    p * (p - 1.0) * integral
}

/// Dimensionless majorizer coefficients `(A, B)` in
/// `A u^2 + B u + A u0^2 - (p-1) u0^p >= u^p` on `[0, 1]`, touching at `u0`.
pub fn majorizer_coeffs(u0: f64, p: f64) -> (f64, f64) {
    let a = alpha_normalized(u0, 1.0, p);
    // never positive; at p = 2 the exact zero comes out as rounding noise
    let b = (p * u0.powf(p - 1.0) - 2.0 * a * u0).min(0.0);
    (a, b)
}

/// Table of supporting parameters at `x`. Returns `Ok(None)` when every
/// sidelobe is zero (the iterate already has an impulse autocorrelation).
pub fn majorizer_params(corr: &Correlator, x: &UnimodularSequence, p: f64) -> Result<Option<MajorizerParams>> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::param(format!("p must be a finite real >= 2, got {p}")));
    }
    let n = x.len();
    if corr.n() != n {
        return Err(Error::dim(format!("correlator built for N = {}, sequence has {n}", corr.n())));
    }
    let f = corr.spectrum(&x.samples());
    let r_full = corr.circular_autocorr(&f);
    let sidelobes: Vec<f64> = (1..n).map(|k| r_full[k].norm()).collect();
    let t = lp_norm(&sidelobes, p);
    if !(t > 0.0) {
        return Ok(None);
    }

    let mut alpha = Vec::with_capacity(n - 1);
    let mut beta = Vec::with_capacity(n - 1);
    let mut w_hat = Vec::with_capacity(n - 1);
    for &mag in &sidelobes {
        let u = (mag / t).min(1.0);
        let a = alpha_normalized(u, t, p);
        alpha.push(a);
        beta.push((p / t * u.powf(p - 1.0) - 2.0 * a * t * u).min(0.0));
        w_hat.push(p / (2.0 * t * t) * u.powf(p - 2.0));
    }
    let lambda_l = alpha
        .iter()
        .enumerate()
        .map(|(i, a)| a * (n - 1 - i) as f64)
        .fold(0.0, f64::max);

    // c~ = r o [0, w_1..w_{N-1}, 0, w_{N-1}..w_1] in 0-based order
    let mut mu = r_full;
    mu[0] = Complex64::new(0.0, 0.0);
    mu[n] = Complex64::new(0.0, 0.0);
    for k in 1..n {
        mu[k] *= w_hat[k - 1];
        mu[2 * n - k] *= w_hat[k - 1];
    }
    corr.forward(&mut mu);

    let max_even = mu.iter().step_by(2).map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let max_odd = mu.iter().skip(1).step_by(2).map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let lambda_u = 0.5 * (max_even + max_odd);

    Ok(Some(MajorizerParams { p, t, alpha, beta, w_hat, lambda_l, lambda_u, mu_tilde: mu, f, sidelobes }))
}

/// `y = x - F^H_{1:N,:} (mu~ o f) / (2N (lambda_L N + lambda_u))`.
///
/// The bracketed product equals `R~ x` with `R~ = sum_k w_k r_{-k} U_k`, so
/// `arg(y)` is the unconstrained minimizer of the surrogate.
pub fn y_update(corr: &Correlator, x: &UnimodularSequence, params: &MajorizerParams) -> Result<Vec<Complex64>> {
    let n = x.len();
    let mut buf: Vec<Complex64> = params.mu_tilde.iter().zip(&params.f).map(|(m, f)| m * f).collect();
    corr.inverse(&mut buf);
    let denom = 2.0 * n as f64 * (params.lambda_l * n as f64 + params.lambda_u);
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Numerical(format!("non-positive step normalization {denom}")));
    }
    let y: Vec<Complex64> = x.samples().iter().zip(&buf).map(|(xi, b)| xi - b / denom).collect();
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite y-update".into()));
    }
    Ok(y)
}

/// Per-lag gap `majorizer(|r_test|) - |r_test|^p` in units of `t^p`, where
/// the majorizer is built at `r_prev` and `t` is the l_p sidelobe norm of
/// `r_prev`.
pub fn majorizer_gaps(r_prev: &CorrelationProfile, r_test: &CorrelationProfile, p: f64) -> Result<Vec<f64>> {
    if r_prev.n() != r_test.n() {
        return Err(Error::dim("profiles differ in length"));
    }
    let prev: Vec<f64> = r_prev.sidelobe_magnitudes().collect();
    let t = lp_norm(&prev, p);
    if !(t > 0.0) {
        return Err(Error::Degenerate("reference profile has no sidelobes".into()));
    }
    Ok(prev
        .iter()
        .zip(r_test.sidelobe_magnitudes())
        .map(|(&m0, m)| {
            let u0 = (m0 / t).min(1.0);
            let u = m / t;
            let (a, b) = majorizer_coeffs(u0, p);
            a * u * u + b * u + a * u0 * u0 - (p - 1.0) * u0.powf(p) - u.powf(p)
        })
        .collect())
}

/// True when the quadratic majorizer built at `r_prev` dominates
/// `|r_k|^p` at every sidelobe lag of `r_test`. Lags outside `[0, t]` fail.
pub fn check_majorizer(r_prev: &CorrelationProfile, r_test: &CorrelationProfile, p: f64) -> bool {
    let prev: Vec<f64> = r_prev.sidelobe_magnitudes().collect();
    let t = lp_norm(&prev, p);
    if r_test.sidelobe_magnitudes().any(|m| m > t * (1.0 + 1e-12)) {
        return false;
    }
    match majorizer_gaps(r_prev, r_test, p) {
        Ok(g) => g.iter().all(|&v| v >= -1e-12),
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_iters: usize,
    /// Relative objective decrease over `window` iterations below which the
    /// run is declared converged.
    pub rel_obj_tol: f64,
    /// Largest per-sample phase change (radians) below which the run is
    /// declared converged; `0` disables the test.
    pub abs_phase_tol: f64,
    pub window: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self { max_iters: 100_000, rel_obj_tol: 1e-10, abs_phase_tol: 0.0, window: 50 }
    }
}

impl StoppingRule {
    pub fn iterations(max_iters: usize) -> Self {
        Self { max_iters, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if !(self.rel_obj_tol >= 0.0) || !(self.abs_phase_tol >= 0.0) {
            return Err(Error::param("tolerances must be non-negative"));
        }
        if self.window == 0 {
            return Err(Error::param("window must be at least 1"));
        }
        Ok(())
    }

    /// Convergence test given the objective history (including the initial
    /// value) and the latest phase step.
    pub fn converged(&self, history: &[f64], phase_step: f64) -> bool {
        if self.abs_phase_tol > 0.0 && phase_step < self.abs_phase_tol {
            return true;
        }
        let len = history.len();
        if len <= self.window {
            return false;
        }
        let old = history[len - 1 - self.window];
        let new = history[len - 1];
        if old == 0.0 {
            return true;
        }
        ((old - new) / old).abs() < self.rel_obj_tol
    }
}
