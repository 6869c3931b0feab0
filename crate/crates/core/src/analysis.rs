//! Ambiguity function, Doppler tolerance and cross-correlation statistics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{generate, CodeSpec};
use crate::designers::{design, DesignConfig};
use crate::error::{Error, Result};
use crate::metrics::{cross_correlation, fmt_db};
use crate::seqcore::{derive_seed, random_unimodular, UnimodularSequence};

/// `|AF(k, nu)| = |sum_n x_n conj(x_{n+k}) e^{j 2 pi nu n}| / N` on a grid of
/// integer delays `k = -(N-1)..=N-1` and Dopplers in cycles per chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySurface {
    pub delays: Vec<i64>,
    pub dopplers: Vec<f64>,
    /// One row per Doppler, one column per delay.
    pub magnitude: Vec<Vec<f64>>,
}

pub fn ambiguity(x: &UnimodularSequence, doppler_grid: &[f64]) -> Result<AmbiguitySurface> {
    if doppler_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("non-finite Doppler value"));
    }
    let n = x.len();
    let s = x.samples();
    let magnitude = doppler_grid
        .iter()
        .map(|&nu| {
            let shifted = doppler_shift(&s, nu);
            let c = cross_correlation(&shifted, &s)?;
            Ok(c.lags.iter().map(|z| z.norm() / n as f64).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let delays = (-(n as i64 - 1)..=(n as i64 - 1)).collect();
    Ok(AmbiguitySurface { delays, dopplers: doppler_grid.to_vec(), magnitude })
}

/// `steps + 1` evenly spaced points on `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![lo];
    }
    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}

fn doppler_shift(s: &[Complex64], nu: f64) -> Vec<Complex64> {
    s.iter().enumerate().map(|(i, z)| z * Complex64::from_polar(1.0, 2.0 * PI * nu * (i + 1) as f64)).collect()
}

impl AmbiguitySurface {
    /// Long-form `delay,doppler,mag_db` with magnitudes in `20 log10`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delay,doppler,mag_db\n");
        for (nu, row) in self.dopplers.iter().zip(&self.magnitude) {
            for (k, m) in self.delays.iter().zip(row) {
                let _ = writeln!(s, "{k},{nu:.6e},{}", fmt_db(20.0 * m.log10()));
            }
        }
        s
    }

    /// Largest magnitude in dB outside `|k| <= delay_excl` and
    /// `|nu| <= doppler_excl`.
    pub fn peak_outside_db(&self, delay_excl: i64, doppler_excl: f64) -> f64 {
        let mut peak = 0.0f64;
        for (nu, row) in self.dopplers.iter().zip(&self.magnitude) {
            for (k, m) in self.delays.iter().zip(row) {
                if k.abs() <= delay_excl && nu.abs() <= doppler_excl {
                    continue;
                }
                peak = peak.max(*m);
            }
        }
        20.0 * peak.log10()
    }

    /// Every Doppler cut stays at least 10 dB below the mainlobe away from the
    /// origin cell (one chip in delay, one Doppler bin `1/N` in Doppler).
    pub fn is_thumbtack(&self) -> bool {
        let n = (self.delays.len() + 1) / 2;
        self.peak_outside_db(1, 1.0 / n as f64) <= -10.0
    }

    /// Delay of the largest magnitude in each Doppler cut.
    pub fn ridge_locus(&self) -> Vec<i64> {
        self.magnitude
            .iter()
            .map(|row| {
                let (i, _) = row.iter().enumerate().fold((0, f64::MIN), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
                self.delays[i]
            })
            .collect()
    }

    /// The per-Doppler peak delay moves monotonically with Doppler and covers
    /// at least `min_span` delays across the grid.
    pub fn is_ridge(&self, min_span: i64) -> bool {
        let locus = self.ridge_locus();
        let up = locus.windows(2).all(|w| w[1] >= w[0]);
        let down = locus.windows(2).all(|w| w[1] <= w[0]);
        let span = locus.iter().max().zip(locus.iter().min()).map_or(0, |(a, b)| a - b);
        (up || down) && span >= min_span
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerProfile {
    pub nu_grid: Vec<f64>,
    /// `20 log10(peak(0) / peak(nu))`; positive values are losses.
    pub peak_loss_db: Vec<f64>,
    pub pslr_db: Vec<f64>,
    pub islr_db: Vec<f64>,
}

/// Matched-filter response of `x` to Doppler-shifted copies of itself for
/// `nu = 0, nu_max / steps, ..., nu_max`.
///
/// PSLR and ISLR follow the `20 log10(PSL / peak)` and `20 log10(ISL / peak)`
/// conventions, with the peak taken over both signs of lag and the sidelobes
/// being every other lag.
pub fn doppler_sweep(x: &UnimodularSequence, nu_max: f64, steps: usize) -> Result<DopplerProfile> {
    if !(nu_max > 0.0) || !nu_max.is_finite() {
        return Err(Error::param(format!("nu_max must be positive, got {nu_max}")));
    }
    if steps == 0 {
        return Err(Error::param("steps must be at least 1"));
    }
    let s = x.samples();
    let nu_grid = grid(0.0, nu_max, steps);
    let mut peaks = Vec::with_capacity(nu_grid.len());
    let mut pslr_db = Vec::with_capacity(nu_grid.len());
    let mut islr_db = Vec::with_capacity(nu_grid.len());
    for &nu in &nu_grid {
        let c = cross_correlation(&doppler_shift(&s, nu), &s)?;
        let mags: Vec<f64> = c.lags.iter().map(|z| z.norm()).collect();
        let (at, peak) = mags.iter().enumerate().fold((0, 0.0), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        let side = mags.iter().enumerate().filter(|(i, _)| *i != at).map(|(_, m)| *m);
        let psl = side.clone().fold(0.0, f64::max);
        let isl: f64 = side.map(|m| m * m).sum();
        peaks.push(peak);
        pslr_db.push(20.0 * (psl / peak).log10());
        islr_db.push(20.0 * (isl / peak).log10());
    }
    let p0 = peaks[0];
    let peak_loss_db = peaks.iter().map(|p| 20.0 * (p0 / p).log10()).collect();
    Ok(DopplerProfile { nu_grid, peak_loss_db, pslr_db, islr_db })
}

impl DopplerProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("nu,peak_loss_db,pslr_db,islr_db\n");
        for i in 0..self.nu_grid.len() {
            let _ = writeln!(
                s,
                "{:.6e},{},{},{}",
                self.nu_grid[i],
                fmt_db(self.peak_loss_db[i]),
                fmt_db(self.pslr_db[i]),
                fmt_db(self.islr_db[i])
            );
        }
        s
    }
}

/// Source of sequences for the Monte-Carlo interference study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    /// A designer run; the trial seed replaces `config.seed`.
    Design { config: DesignConfig },
    /// `phi_m = pi * rate * (m-1)^2 / n + phi_0`, `phi_0` uniform per trial.
    Chirp { n: usize, rate: f64 },
    Random { n: usize },
    Code { spec: CodeSpec },
    Fixed { phases: Vec<f64> },
}

impl GeneratorSpec {
    pub fn sample(&self, seed: u64) -> Result<UnimodularSequence> {
        match self {
            GeneratorSpec::Design { config } => {
                let mut cfg = config.clone();
                cfg.seed = seed;
                Ok(design(&cfg)?.x)
            }
            GeneratorSpec::Chirp { n, rate } => {
                if *n < 2 {
                    return Err(Error::TooShort(*n));
                }
                let phi0 = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..2.0 * PI);
                let nf = *n as f64;
                UnimodularSequence::new((0..*n).map(|m| PI * rate * (m * m) as f64 / nf + phi0).collect())
            }
            GeneratorSpec::Random { n } => random_unimodular(*n, seed),
            GeneratorSpec::Code { spec } => generate(spec),
            GeneratorSpec::Fixed { phases } => UnimodularSequence::new(phases.clone()),
        }
    }
}

/// Histogram bin width in dB.
pub const BIN_DB: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceStats {
    pub trials: usize,
    /// Per-trial `20 log10(max_k |c_k| / N)`.
    pub values_db: Vec<f64>,
    /// `(bin lower edge in dB, count)` in ascending order.
    pub histogram: Vec<(f64, usize)>,
    pub mean_db: f64,
    /// Midpoint of the most populated bin; ties go to the lower bin.
    pub center_db: f64,
}

/// Draws `trials` independent pairs `(a, b)` and records their normalized
/// peak cross-correlation. Trial `i` uses seeds derived from `(seed, i)`, so
/// results do not depend on scheduling.
pub fn interference_stats(
    gen_a: &GeneratorSpec,
    gen_b: &GeneratorSpec,
    trials: usize,
    seed: u64,
) -> Result<InterferenceStats> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let values_db = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let a = gen_a.sample(derive_seed(seed, "interference-a", i))?;
            let b = gen_b.sample(derive_seed(seed, "interference-b", i))?;
            let c = cross_correlation(&a.samples(), &b.samples())?;
            Ok(20.0 * c.normalized_peak().log10())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(values_db))
}

pub fn summarize(values_db: Vec<f64>) -> InterferenceStats {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for v in &values_db {
        *bins.entry((v / BIN_DB).floor() as i64).or_default() += 1;
    }
    let mut best = (i64::MIN, 0usize);
    for (&b, &c) in &bins {
        if c > best.1 {
            best = (b, c);
        }
    }
    let mean_db = values_db.iter().sum::<f64>() / values_db.len() as f64;
    InterferenceStats {
        trials: values_db.len(),
        histogram: bins.into_iter().map(|(b, c)| (b as f64 * BIN_DB, c)).collect(),
        mean_db,
        center_db: (best.0 as f64 + 0.5) * BIN_DB,
        values_db,
    }
}

impl InterferenceStats {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_db,count\n");
        for (b, c) in &self.histogram {
            let _ = writeln!(s, "{b:.2},{c}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::autocorr_direct;

    #[test]
    fn origin_is_unity_and_zero_doppler_is_autocorr() {
        let x = random_unimodular(37, 4).unwrap();
        let af = ambiguity(&x, &[0.0, 0.013]).unwrap();
        let zero = &af.magnitude[0];
        let n = 37usize;
        assert!((zero[n - 1] - 1.0).abs() < 1e-12);
        let r = autocorr_direct(&x);
        for k in 0..n {
            let want = r.lags()[k].norm() / n as f64;
            assert!((zero[n - 1 + k] - want).abs() < 1e-10);
            assert!((zero[n - 1 - k] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn af_symmetry() {
        let x = random_unimodular(29, 8).unwrap();
        let af = ambiguity(&x, &[-0.02, 0.02]).unwrap();
        let n = af.delays.len();
        for i in 0..n {
            assert!((af.magnitude[0][i] - af.magnitude[1][n - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_doppler_has_no_loss() {
        let x = random_unimodular(50, 1).unwrap();
        let d = doppler_sweep(&x, 0.01, 4).unwrap();
        assert_eq!(d.nu_grid.len(), 5);
        assert_eq!(d.peak_loss_db[0], 0.0);
        assert!(doppler_sweep(&x, 0.0, 4).is_err());
    }

    #[test]
    fn identical_fixed_sequences_correlate_at_zero_db() {
        let x = random_unimodular(20, 3).unwrap();
        let g = GeneratorSpec::Fixed { phases: x.phases().to_vec() };
        let s = interference_stats(&g, &g, 7, 0).unwrap();
        assert!(s.values_db.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(s.histogram.iter().map(|(_, c)| c).sum::<usize>(), 7);
    }

    #[test]
    fn mode_uses_bin_midpoint() {
        let s = summarize(vec![-1.0, -0.9, -0.8, 0.1]);
        assert_eq!(s.histogram, vec![(-1.0, 3), (0.0, 1)]);
        assert!((s.center_db + 0.875).abs() < 1e-12);
    }
}
