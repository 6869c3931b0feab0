//! Aperiodic correlations and sidelobe metrics.
//!
//! Lag convention: `r_k = sum_{n} x_n conj(x_{n+k})`, `r_{-k} = conj(r_k)`.
//! Profiles hold the non-negative lags `k = 0..N-1`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::UnimodularSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    lags: Vec<Complex64>,
}

impl CorrelationProfile {
    pub fn new(lags: Vec<Complex64>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::Degenerate("empty correlation profile".into()));
        }
        Ok(Self { lags })
    }

    /// Builds a real-valued profile, mostly useful in tests.
    pub fn from_real(lags: &[f64]) -> Result<Self> {
        Self::new(lags.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.lags.len()
    }

    pub fn lags(&self) -> &[Complex64] {
        &self.lags
    }

    pub fn mainlobe(&self) -> Complex64 {
        self.lags[0]
    }

    /// `|r_k|` for `k = 1..N-1`.
    pub fn sidelobe_magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.lags[1..].iter().map(|z| z.norm())
    }

    /// `r_k` for `k = -(N-1)..=N-1`.
    pub fn two_sided(&self) -> Vec<Complex64> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * n - 1);
        out.extend(self.lags[1..].iter().rev().map(|z| z.conj()));
        out.extend_from_slice(&self.lags);
        out
    }

    /// Long-form CSV `lag,re,im,abs,abs_db_rel_peak` over both signs of lag,
    /// the last column in dB relative to `|r_0|`.
    pub fn to_csv(&self) -> String {
        let n = self.n() as i64;
        let peak = self.mainlobe().norm();
        let mut s = String::from("lag,re,im,abs,abs_db_rel_peak\n");
        for (i, z) in self.two_sided().iter().enumerate() {
            let lag = i as i64 - (n - 1);
            let rel = 20.0 * (z.norm() / peak).log10();
            let _ = writeln!(s, "{lag},{:.12e},{:.12e},{:.12e},{}", z.re, z.im, z.norm(), fmt_db(rel));
        }
        s
    }
}

pub(crate) fn fmt_db(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

/// O(N^2) direct evaluation of the aperiodic autocorrelation. Reference oracle.
pub fn autocorr_direct(x: &UnimodularSequence) -> CorrelationProfile {
    let s = x.samples();
    let n = s.len();
    let lags = (0..n)
        .map(|k| (0..n - k).map(|i| s[i] * s[i + k].conj()).sum())
        .collect();
    CorrelationProfile { lags }
}

/// Cached forward/inverse 2N-point transforms for one sequence length.
#[derive(Clone)]
pub struct Correlator {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Correlator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Correlator").field("n", &self.n).finish()
    }
}

impl Correlator {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(2 * n), inv: planner.plan_fft_inverse(2 * n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `F [x; 0_N]` with `F_{m,n} = exp(-j 2 pi m n / 2N)`.
    pub fn spectrum(&self, samples: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.n, "sequence length does not match correlator");
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * self.n];
        buf[..self.n].copy_from_slice(samples);
        self.fwd.process(&mut buf);
        buf
    }

    /// In-place forward 2N-point transform.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// In-place unnormalized inverse 2N-point transform (`F^H`).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
    }

    /// The full 2N-length vector `(1/2N) F^H |f|^2`. Entry `m` holds `r_{-m}`
    /// (= conj `r_m`) for `m < N`, entry `N` is zero, and entry `2N - m` holds `r_m`.
    pub fn circular_autocorr(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let scale = 1.0 / (2 * self.n) as f64;
        let mut buf: Vec<Complex64> = spectrum.iter().map(|f| Complex64::new(f.norm_sqr(), 0.0)).collect();
        self.inv.process(&mut buf);
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }

    pub fn autocorr(&self, x: &UnimodularSequence) -> CorrelationProfile {
        let f = self.spectrum(&x.samples());
        let full = self.circular_autocorr(&f);
        CorrelationProfile { lags: (0..self.n).map(|k| full[k].conj()).collect() }
    }

    /// `sum_k |r_k|^p` over sidelobe lags without materializing the profile.
    pub fn sidelobe_power_sum(&self, x: &UnimodularSequence, p: f64) -> f64 {
        self.autocorr(x).sidelobe_magnitudes().map(|v| v.powf(p)).sum()
    }
}

/// Zero-padded 2N FFT autocorrelation.
pub fn autocorr_fft(x: &UnimodularSequence) -> CorrelationProfile {
    Correlator::new(x.len()).autocorr(x)
}

/// Two-sided aperiodic cross-correlation `c_k = sum_n x_n conj(y_{n+k})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    /// Lags `-(N-1)..=N-1`.
    pub lags: Vec<Complex64>,
    pub n: usize,
}

impl CrossCorrelation {
    pub fn at(&self, k: i64) -> Complex64 {
        self.lags[(k + self.n as i64 - 1) as usize]
    }

    /// `max_k |c_k| / N`.
    pub fn normalized_peak(&self) -> f64 {
        self.lags.iter().map(|z| z.norm()).fold(0.0, f64::max) / self.n as f64
    }
}

/// Cross-correlation of two sequences; the shorter one is zero-padded to the
/// longer length `N`, and normalization uses that `N`.
pub fn cross_correlation(x: &[Complex64], y: &[Complex64]) -> Result<CrossCorrelation> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Degenerate("empty input to cross-correlation".into()));
    }
    let n = x.len().max(y.len());
    let len = 2 * n;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut fx = vec![Complex64::new(0.0, 0.0); len];
    let mut fy = fx.clone();
    fx[..x.len()].copy_from_slice(x);
    fy[..y.len()].copy_from_slice(y);
    fwd.process(&mut fx);
    fwd.process(&mut fy);
    // IDFT(conj(FX) FY)[m] = sum_n conj(x_n) y_{n+m}; c_k = conj of that at m = k
    let mut prod: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
    inv.process(&mut prod);
    let scale = 1.0 / len as f64;
    let lags = (-(n as i64 - 1)..=(n as i64 - 1))
        .map(|k| prod[k.rem_euclid(len as i64) as usize].conj() * scale)
        .collect();
    Ok(CrossCorrelation { lags, n })
}

/// O(N^2) reference for [`cross_correlation`].
pub fn cross_correlation_direct(x: &[Complex64], y: &[Complex64]) -> Result<CrossCorrelation> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Degenerate("empty input to cross-correlation".into()));
    }
    let n = x.len().max(y.len());
    let get = |v: &[Complex64], i: i64| -> Complex64 {
        if i >= 0 && (i as usize) < v.len() {
            v[i as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let lags = (-(n as i64 - 1)..=(n as i64 - 1))
        .map(|k| (0..n as i64).map(|i| get(x, i) * get(y, i + k).conj()).sum())
        .collect();
    Ok(CrossCorrelation { lags, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidelobeMetrics {
    pub p: f64,
    pub isl: f64,
    pub psl: f64,
    pub lp: f64,
    pub isl_db: f64,
    pub psl_db: f64,
}

/// ISL, PSL and the l_p sidelobe norm (mainlobe excluded). dB values use
/// `10 log10`.
pub fn sidelobe_metrics(r: &CorrelationProfile, p: f64) -> Result<SidelobeMetrics> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::param(format!("p must be a finite real >= 2, got {p}")));
    }
    let mags: Vec<f64> = r.sidelobe_magnitudes().collect();
    let isl: f64 = mags.iter().map(|v| v * v).sum();
    let psl = mags.iter().cloned().fold(0.0, f64::max);
    Ok(SidelobeMetrics { p, isl, psl, lp: lp_norm(&mags, p), isl_db: 10.0 * isl.log10(), psl_db: 10.0 * psl.log10() })
}

/// `(sum |v|^p)^(1/p)` evaluated relative to the max so large `p` cannot overflow.
pub fn lp_norm(mags: &[f64], p: f64) -> f64 {
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let s: f64 = mags.iter().map(|v| (v / peak).powf(p)).sum();
    peak * s.powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRatios {
    /// `20 log10(PSL / max_k |r_k|)`; `-inf` for an impulse.
    pub pslr_db: f64,
    /// `20 log10(ISL / max_k |r_k|)`.
    pub islr_db: f64,
    /// `|r_k / r_0|`.
    pub level: Vec<f64>,
}

pub fn pslr_islr(r: &CorrelationProfile) -> Result<PeakRatios> {
    let r0 = r.mainlobe().norm();
    if r0 == 0.0 {
        return Err(Error::Degenerate("zero mainlobe".into()));
    }
    let mags: Vec<f64> = r.lags().iter().map(|z| z.norm()).collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    let psl = mags[1..].iter().cloned().fold(0.0, f64::max);
    let isl: f64 = mags[1..].iter().map(|v| v * v).sum();
    Ok(PeakRatios {
        pslr_db: 20.0 * (psl / peak).log10(),
        islr_db: 20.0 * (isl / peak).log10(),
        level: mags.iter().map(|v| v / r0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::random_unimodular;
    use std::f64::consts::PI;

    fn seq(phases: &[f64]) -> UnimodularSequence {
        UnimodularSequence::new(phases.to_vec()).unwrap()
    }

    fn max_dev(a: &CorrelationProfile, b: &CorrelationProfile) -> f64 {
        a.lags().iter().zip(b.lags()).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn direct_examples() {
        let r = autocorr_direct(&seq(&[0.0; 4]));
        let want = [4.0, 3.0, 2.0, 1.0];
        for (z, w) in r.lags().iter().zip(want) {
            assert!((z - Complex64::new(w, 0.0)).norm() < 1e-12);
        }
        let r = autocorr_direct(&seq(&[0.0, PI]));
        assert!((r.lags()[0].re - 2.0).abs() < 1e-12);
        assert!((r.lags()[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fft_matches_direct() {
        let x = seq(&[0.0; 4]);
        assert!(max_dev(&autocorr_fft(&x), &autocorr_direct(&x)) < 1e-12);
        let x = random_unimodular(64, 3).unwrap();
        assert!(max_dev(&autocorr_fft(&x), &autocorr_direct(&x)) < 1e-9 * 64.0);
    }

    #[test]
    fn fft_row3_layout() {
        let x = random_unimodular(9, 4).unwrap();
        let c = Correlator::new(9);
        let full = c.circular_autocorr(&c.spectrum(&x.samples()));
        let r = autocorr_direct(&x);
        assert!(full[9].norm() < 1e-12);
        for k in 1..9 {
            assert!((full[k] - r.lags()[k].conj()).norm() < 1e-12);
            assert!((full[18 - k] - r.lags()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn cross_examples() {
        let ones = vec![Complex64::new(1.0, 0.0); 2];
        let alt = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let c = cross_correlation(&ones, &alt).unwrap();
        for (k, want) in [(-1, 1.0), (0, 0.0), (1, -1.0)] {
            assert!((c.at(k) - Complex64::new(want, 0.0)).norm() < 1e-12, "lag {k}");
        }
        let x = random_unimodular(31, 8).unwrap().samples();
        let c = cross_correlation(&x, &x).unwrap();
        assert!((c.at(0).re - 31.0).abs() < 1e-9);
        assert!(cross_correlation(&[], &x).is_err());
    }

    #[test]
    fn cross_matches_direct_with_padding() {
        let x = random_unimodular(20, 1).unwrap().samples();
        let y = random_unimodular(13, 2).unwrap().samples();
        let a = cross_correlation(&x, &y).unwrap();
        let b = cross_correlation_direct(&x, &y).unwrap();
        for (u, v) in a.lags.iter().zip(&b.lags) {
            assert!((u - v).norm() < 1e-9);
        }
    }

    #[test]
    fn random_pair_peak_is_small() {
        let x = random_unimodular(100, 11).unwrap().samples();
        let y = random_unimodular(100, 12).unwrap().samples();
        let v = cross_correlation(&x, &y).unwrap().normalized_peak();
        assert!(v > 0.0 && v < 0.5, "{v}");
    }

    #[test]
    fn metrics_examples() {
        let r = CorrelationProfile::from_real(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        let m = sidelobe_metrics(&r, 2.0).unwrap();
        assert!((m.isl - 14.0).abs() < 1e-12);
        assert!((m.psl - 3.0).abs() < 1e-12);
        assert!((m.lp - 14f64.sqrt()).abs() < 1e-12);

        let r = CorrelationProfile::from_real(&[5.0, 0.0, 0.0]).unwrap();
        let m = sidelobe_metrics(&r, 10.0).unwrap();
        assert_eq!((m.isl, m.psl, m.lp), (0.0, 0.0, 0.0));

        assert!(sidelobe_metrics(&r, 1.5).is_err());
    }

    #[test]
    fn large_p_approaches_psl() {
        let r = autocorr_fft(&random_unimodular(100, 5).unwrap());
        let m = sidelobe_metrics(&r, 1000.0).unwrap();
        assert!(m.lp >= m.psl && m.lp <= 1.01 * m.psl, "{} vs {}", m.lp, m.psl);
    }

    #[test]
    fn pslr_examples() {
        let r = CorrelationProfile::from_real(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        let pr = pslr_islr(&r).unwrap();
        assert_eq!(pr.level, vec![1.0, 0.75, 0.5, 0.25]);
        assert!((pr.pslr_db - 20.0 * 0.75f64.log10()).abs() < 1e-12);
        assert!((pr.pslr_db + 2.4988).abs() < 1e-3);

        let r = CorrelationProfile::from_real(&[8.0, 0.0, 0.0]).unwrap();
        assert_eq!(pslr_islr(&r).unwrap().pslr_db, f64::NEG_INFINITY);
        assert!(pslr_islr(&CorrelationProfile::from_real(&[0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = CorrelationProfile::from_real(&[4.0, 3.0]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lag,re,im,abs,abs_db_rel_peak");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("-1,"));
        assert!(lines[2].ends_with(",0.000000"));
    }
}
