//! Small dense least-squares solves for per-block phase polynomials.
//!
//! All fits run on the scaled monomial basis `(m / M)^q`, `m = 1..=M`. The raw
//! basis `m^q` with `M` in the hundreds and `Q` up to 6 spans fifteen orders of
//! magnitude across its columns; the scaled basis keeps every column in
//! `(0, 1]`. Coefficients are mapped back to the raw basis on return.

use nalgebra::{DMatrix, DVector};

/// Reciprocal condition number below which QR is abandoned for a truncated SVD.
const RCOND_QR: f64 = 1e-12;

/// Evaluates `sum_q a_q m^q` for `m = 1..=len`.
pub fn eval_poly(coeffs: &[f64], len: usize) -> Vec<f64> {
    let scale = len as f64;
    let scaled = to_scaled(coeffs, scale);
    (1..=len)
        .map(|m| {
            let t = m as f64 / scale;
            scaled.iter().rev().fold(0.0, |acc, &s| acc * t + s)
        })
        .collect()
}

fn to_scaled(coeffs: &[f64], scale: f64) -> Vec<f64> {
    let mut pow = 1.0;
    coeffs
        .iter()
        .map(|&a| {
            let s = a * pow;
            pow *= scale;
            s
        })
        .collect()
}

fn from_scaled(scaled: &[f64], scale: f64) -> Vec<f64> {
    let mut pow = 1.0;
    scaled
        .iter()
        .map(|&s| {
            let a = s / pow;
            pow *= scale;
            a
        })
        .collect()
}

/// Solves `min_a || diag(w) V a - b ||_2` where `V` is the monomial basis of
/// degree `degree` over `m = 1..=w.len()`.
///
/// Returns raw-basis coefficients, or `None` when the weighted system carries
/// no information (all weights vanish). Underdetermined systems (`len < degree + 1`)
/// return the minimum-norm solution in the scaled basis.
pub fn weighted_poly_lstsq(weights: &[f64], rhs: &[f64], degree: usize) -> Option<Vec<f64>> {
    let len = weights.len();
    debug_assert_eq!(len, rhs.len());
    let cols = degree + 1;
    let wmax = weights.iter().fold(0.0f64, |acc, w| acc.max(w.abs()));
    if len == 0 || !(wmax > 1e-300) || !wmax.is_finite() {
        return None;
    }
    let scale = len as f64;
    let a = DMatrix::from_fn(len, cols, |i, j| {
        weights[i] * ((i + 1) as f64 / scale).powi(j as i32)
    });
    let b = DVector::from_column_slice(rhs);

    let scaled = if len >= cols {
        solve_qr(&a, &b).or_else(|| solve_svd(a, &b))?
    } else {
        solve_svd(a, &b)?
    };
    if scaled.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(from_scaled(scaled.as_slice(), scale))
}

fn solve_qr(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let cols = a.ncols();
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..cols).map(|j| r[(j, j)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmax > 0.0) || dmin < RCOND_QR * dmax {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    let mut x = DVector::zeros(cols);
    for j in (0..cols).rev() {
        let mut acc = qtb[j];
        for k in j + 1..cols {
            acc -= r[(j, k)] * x[k];
        }
        x[j] = acc / r[(j, j)];
    }
    Some(x)
}

fn solve_svd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return None;
    }
    svd.solve(b, RCOND_QR * smax).ok()
}

/// Ordinary least-squares fit of a degree-`degree` polynomial in `m = 1..=len`.
/// Returns the coefficients and the residual 2-norm.
pub fn poly_fit(values: &[f64], degree: usize) -> Option<(Vec<f64>, f64)> {
    let ones = vec![1.0; values.len()];
    let coeffs = weighted_poly_lstsq(&ones, values, degree)?;
    let fitted = eval_poly(&coeffs, values.len());
    let residual = values
        .iter()
        .zip(&fitted)
        .map(|(v, f)| (v - f).powi(2))
        .sum::<f64>()
        .sqrt();
    Some((coeffs, residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_matches_direct_sum() {
        let a = [0.3, -1.2, 0.05, 1e-4];
        let v = eval_poly(&a, 7);
        for (i, got) in v.iter().enumerate() {
            let m = (i + 1) as f64;
            let want = a[0] + a[1] * m + a[2] * m * m + a[3] * m * m * m;
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn recovers_high_degree_on_long_block() {
        let a = [0.7, 1e-2, -3e-5, 2e-7, 1e-10, -2e-13, 1e-16];
        let vals = eval_poly(&a, 300);
        let (fit, res) = poly_fit(&vals, 6).unwrap();
        assert!(res < 1e-9, "residual {res}");
        let refit = eval_poly(&fit, 300);
        for (x, y) in vals.iter().zip(&refit) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn underdetermined_interpolates() {
        let vals = [0.1, -2.0, 3.3];
        let (fit, res) = poly_fit(&vals, 5).unwrap();
        assert_eq!(fit.len(), 6);
        assert!(res < 1e-10);
    }

    #[test]
    fn zero_weights_yield_none() {
        assert!(weighted_poly_lstsq(&[0.0; 4], &[1.0; 4], 1).is_none());
    }
}
