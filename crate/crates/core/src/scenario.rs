//! Complex-baseband automotive scenario: FMCW and PMCW victims with point
//! targets, co-channel interferers and thermal noise.
//!
//! Stop-and-hop: target ranges are frozen over a frame and motion enters
//! only through the Doppler phase progression. FMCW frames are sampled at the
//! de-chirped IF rate; the analog IF low-pass ahead of the ADC is modeled by
//! gating each interferer on its instantaneous beat frequency. PMCW frames are
//! sampled at the chip rate.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analysis::GeneratorSpec;
use crate::error::{Error, Result};
use crate::metrics::fmt_db;
use crate::seqcore::{derive_seed, UnimodularSequence};

pub const C: f64 = 299_792_458.0;
const BOLTZMANN: f64 = 1.380_649e-23;
const T0: f64 = 290.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range_m: f64,
    /// Positive when closing.
    pub speed_mps: f64,
    pub rcs_dbsm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VictimWaveform {
    Fmcw,
    Pmcw { code: GeneratorSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InterfererWaveform {
    Fmcw { bandwidth_hz: f64 },
    Pmcw { code: GeneratorSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    pub range_m: f64,
    pub speed_mps: f64,
    pub waveform: InterfererWaveform,
    /// Start of the interferer's first pulse relative to the victim's, before
    /// propagation. Drawn uniformly over one PRI when absent.
    #[serde(default)]
    pub start_offset_s: Option<f64>,
    /// Free-running interferer PRF; the victim's when absent.
    #[serde(default)]
    pub prf_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub carrier_hz: f64,
    /// Victim FMCW sweep bandwidth.
    pub bandwidth_hz: f64,
    pub pulse_s: f64,
    pub prf_hz: f64,
    pub pulses: usize,
    pub chip_s: f64,
    pub code_len: usize,
    pub tx_power_dbm: f64,
    pub antenna_gain_db: f64,
    pub noise_figure_db: f64,
    /// Complex ADC rate after de-chirping (FMCW only).
    pub if_sample_rate_hz: f64,
    /// Range extent kept in the range-Doppler map.
    pub max_range_m: f64,
    #[serde(default = "rect")]
    pub range_window: Window,
    #[serde(default = "hann")]
    pub doppler_window: Window,
    pub victim: VictimWaveform,
    pub targets: Vec<Target>,
    #[serde(default)]
    pub interferers: Vec<Interferer>,
    #[serde(default = "yes")]
    pub noise: bool,
    #[serde(default)]
    pub seed: u64,
}

fn rect() -> Window {
    Window::Rect
}

fn hann() -> Window {
    Window::Hann
}

fn yes() -> bool {
    true
}

impl ScenarioConfig {
    /// Full-scale sensor parameters with the 30 m / 20 km/h / 10 dBsm target.
    pub fn full_scale(victim: VictimWaveform) -> Self {
        Self {
            carrier_hz: 79e9,
            bandwidth_hz: 150e6,
            pulse_s: 60e-6,
            prf_hz: 16.66e3,
            pulses: 256,
            chip_s: 6.66e-9,
            code_len: 4500,
            tx_power_dbm: 12.0,
            antenna_gain_db: 10.0,
            noise_figure_db: 10.0,
            if_sample_rate_hz: 10e6,
            max_range_m: 300.0,
            range_window: Window::Rect,
            doppler_window: Window::Hann,
            victim,
            targets: vec![Target { range_m: 30.0, speed_mps: 20.0 / 3.6, rcs_dbsm: 10.0 }],
            interferers: Vec::new(),
            noise: true,
            seed: 0,
        }
    }

    /// One-tenth bandwidth, code length and IF rate, 64 pulses. Pulse timing
    /// is unchanged, so code and chirp time-bandwidth products keep their ratio.
    pub fn desk(victim: VictimWaveform) -> Self {
        Self {
            bandwidth_hz: 15e6,
            pulses: 64,
            chip_s: 66.6e-9,
            code_len: 450,
            if_sample_rate_hz: 1e6,
            ..Self::full_scale(victim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("pulse_s", self.pulse_s),
            ("prf_hz", self.prf_hz),
            ("chip_s", self.chip_s),
            ("if_sample_rate_hz", self.if_sample_rate_hz),
            ("max_range_m", self.max_range_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.pulses == 0 || self.code_len < 2 {
            return Err(Error::param("pulses must be >= 1 and code_len >= 2"));
        }
        if self.code_len as f64 * self.chip_s > self.pulse_s * (1.0 + 1e-9) {
            return Err(Error::param("code period exceeds pulse length"));
        }
        if self.prf_hz > 1.0 / self.pulse_s * (1.0 + 1e-9) {
            return Err(Error::param("PRF leaves no room for the pulse"));
        }
        let bins = self.range_bins();
        match &self.victim {
            VictimWaveform::Fmcw => {
                if 2 * bins > self.fmcw_samples() {
                    return Err(Error::param("IF sample rate too low for max_range_m"));
                }
            }
            VictimWaveform::Pmcw { .. } => {
                if self.code_len + bins > self.pmcw_samples() {
                    return Err(Error::param("receive window too short for max_range_m"));
                }
            }
        }
        for i in &self.interferers {
            if let InterfererWaveform::Fmcw { bandwidth_hz } = i.waveform {
                if !(bandwidth_hz > 0.0) {
                    return Err(Error::param("interferer bandwidth must be positive"));
                }
            }
            if matches!(self.victim, VictimWaveform::Fmcw) && matches!(i.waveform, InterfererWaveform::Pmcw { .. }) {
                return Err(Error::param("PMCW interference on an FMCW victim is not modeled"));
            }
        }
        Ok(())
    }

    pub fn pri_s(&self) -> f64 {
        1.0 / self.prf_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        C / self.carrier_hz
    }

    pub fn range_resolution_m(&self) -> f64 {
        match self.victim {
            VictimWaveform::Fmcw => C / (2.0 * self.bandwidth_hz),
            VictimWaveform::Pmcw { .. } => C * self.chip_s / 2.0,
        }
    }

    pub fn range_bins(&self) -> usize {
        ((self.max_range_m / self.range_resolution_m()).round() as usize).max(1)
    }

    /// IF samples per chirp.
    pub fn fmcw_samples(&self) -> usize {
        (self.if_sample_rate_hz * self.pulse_s).round() as usize
    }

    /// Chip-rate samples per PRI.
    pub fn pmcw_samples(&self) -> usize {
        (self.pri_s() / self.chip_s).round() as usize
    }

    fn slope(&self) -> f64 {
        self.bandwidth_hz / self.pulse_s
    }

    /// Range bin and fftshifted Doppler bin a target should land in.
    pub fn expected_cell(&self, target: &Target) -> (usize, usize) {
        let r = (target.range_m / self.range_resolution_m()).round() as usize;
        let fd = 2.0 * target.speed_mps / self.wavelength_m();
        let d = (fd * self.pulses as f64 * self.pri_s()).round() as i64 + (self.pulses / 2) as i64;
        (r, d.rem_euclid(self.pulses as i64) as usize)
    }

    fn tx_power_w(&self) -> f64 {
        1e-3 * 10f64.powf(self.tx_power_dbm / 10.0)
    }

    fn gain(&self) -> f64 {
        10f64.powf(self.antenna_gain_db / 10.0)
    }

    /// Received echo amplitude (sqrt W) from the radar equation.
    pub fn echo_amplitude(&self, t: &Target) -> f64 {
        let g = self.gain();
        let lam = self.wavelength_m();
        let sigma = 10f64.powf(t.rcs_dbsm / 10.0);
        (self.tx_power_w() * g * g * lam * lam * sigma / ((4.0 * PI).powi(3) * t.range_m.powi(4))).sqrt()
    }

    /// Direct-path interferer amplitude (sqrt W), one-way free space.
    pub fn interferer_amplitude(&self, i: &Interferer) -> f64 {
        let g = self.gain();
        let lam = self.wavelength_m();
        (self.tx_power_w() * g * g * lam * lam / ((4.0 * PI).powi(2) * i.range_m.powi(2))).sqrt()
    }

    /// Complex noise variance per sample.
    pub fn noise_power_w(&self) -> f64 {
        let bw = match self.victim {
            VictimWaveform::Fmcw => self.if_sample_rate_hz,
            VictimWaveform::Pmcw { .. } => 1.0 / self.chip_s,
        };
        BOLTZMANN * T0 * 10f64.powf(self.noise_figure_db / 10.0) * bw
    }

    pub fn victim_code(&self) -> Result<UnimodularSequence> {
        match &self.victim {
            VictimWaveform::Pmcw { code } => {
                let x = code.sample(derive_seed(self.seed, "victim-code", 0))?;
                if x.len() != self.code_len {
                    return Err(Error::dim(format!("code has {} chips, code_len is {}", x.len(), self.code_len)));
                }
                Ok(x)
            }
            VictimWaveform::Fmcw => Err(Error::param("FMCW victim has no code")),
        }
    }
}

/// Slow-time by fast-time samples, row-major by pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub pulses: usize,
    pub samples: usize,
    pub data: Vec<Complex64>,
}

impl Frame {
    fn zeros(pulses: usize, samples: usize) -> Self {
        Self { pulses, samples, data: vec![Complex64::new(0.0, 0.0); pulses * samples] }
    }

    pub fn pulse(&self, m: usize) -> &[Complex64] {
        &self.data[m * self.samples..(m + 1) * self.samples]
    }
}

fn chirp_phase(slope: f64, bandwidth: f64, u: f64) -> f64 {
    PI * slope * u * u - PI * bandwidth * u
}

/// Instantaneous frequency of the victim chirp at `t` seconds into the
/// pulse, measured from the lower band edge.
pub fn fmcw_inst_freq(cfg: &ScenarioConfig, t: f64) -> f64 {
    cfg.slope() * t
}

/// Victim transmit chirp at the IF sample rate, one row per pulse.
pub fn synth_fmcw(cfg: &ScenarioConfig) -> Result<Frame> {
    cfg.validate()?;
    let ns = cfg.fmcw_samples();
    let fs = cfg.if_sample_rate_hz;
    let mut f = Frame::zeros(cfg.pulses, ns);
    for m in 0..cfg.pulses {
        for n in 0..ns {
            let t = n as f64 / fs;
            f.data[m * ns + n] = Complex64::from_polar(1.0, chirp_phase(cfg.slope(), cfg.bandwidth_hz, t));
        }
    }
    Ok(f)
}

/// Victim transmit code at the chip rate; the rest of each PRI is idle.
pub fn synth_pmcw(cfg: &ScenarioConfig, code: &UnimodularSequence) -> Result<Frame> {
    cfg.validate()?;
    if code.len() != cfg.code_len {
        return Err(Error::dim(format!("code has {} chips, code_len is {}", code.len(), cfg.code_len)));
    }
    let np = cfg.pmcw_samples();
    let mut f = Frame::zeros(cfg.pulses, np);
    let s = code.samples();
    for m in 0..cfg.pulses {
        f.data[m * np..m * np + s.len()].copy_from_slice(&s);
    }
    Ok(f)
}

/// Baseband chirp sampled at `fs`, for spectrograms.
pub fn fmcw_tx_waveform(cfg: &ScenarioConfig, fs: f64) -> Vec<Complex64> {
    let n = (cfg.pulse_s * fs).round() as usize;
    (0..n).map(|i| Complex64::from_polar(1.0, chirp_phase(cfg.slope(), cfg.bandwidth_hz, i as f64 / fs))).collect()
}

struct Prepared {
    amp: f64,
    fd: f64,
    delay_s: f64,
    pri_s: f64,
    phase: f64,
    kind: PreparedKind,
}

enum PreparedKind {
    Fmcw { slope: f64, bandwidth: f64 },
    Pmcw { code: Vec<Complex64> },
}

fn prepare_interferers(cfg: &ScenarioConfig) -> Result<Vec<Prepared>> {
    let lam = cfg.wavelength_m();
    cfg.interferers
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "interferer", i as u64));
            let offset = match it.start_offset_s {
                Some(o) => o,
                None => Uniform::new(0.0, cfg.pri_s()).map_err(|e| Error::param(e.to_string()))?.sample(&mut rng),
            };
            let phase = Uniform::new(0.0, 2.0 * PI).map_err(|e| Error::param(e.to_string()))?.sample(&mut rng);
            let kind = match &it.waveform {
                InterfererWaveform::Fmcw { bandwidth_hz } => {
                    PreparedKind::Fmcw { slope: bandwidth_hz / cfg.pulse_s, bandwidth: *bandwidth_hz }
                }
                InterfererWaveform::Pmcw { code } => {
                    let x = code.sample(derive_seed(cfg.seed, "interferer-code", i as u64))?;
                    PreparedKind::Pmcw { code: x.samples() }
                }
            };
            Ok(Prepared {
                amp: cfg.interferer_amplitude(it),
                fd: it.speed_mps / lam,
                delay_s: offset + it.range_m / C,
                pri_s: 1.0 / it.prf_hz.unwrap_or(cfg.prf_hz),
                phase,
                kind,
            })
        })
        .collect()
}

/// Received victim frame: target echoes, interferers and noise. FMCW frames
/// are returned before mixing (see module docs for the IF filter model).
pub fn simulate(cfg: &ScenarioConfig) -> Result<Frame> {
    cfg.validate()?;
    let interferers = prepare_interferers(cfg)?;
    let lam = cfg.wavelength_m();
    let pri = cfg.pri_s();
    let mut frame = match &cfg.victim {
        VictimWaveform::Fmcw => {
            let ns = cfg.fmcw_samples();
            let fs = cfg.if_sample_rate_hz;
            let (s, b) = (cfg.slope(), cfg.bandwidth_hz);
            let mut f = Frame::zeros(cfg.pulses, ns);
            for m in 0..cfg.pulses {
                for n in 0..ns {
                    let t = n as f64 / fs;
                    let t_abs = m as f64 * pri + t;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for tg in &cfg.targets {
                        let tau = 2.0 * tg.range_m / C;
                        let fd = 2.0 * tg.speed_mps / lam;
                        let ph = chirp_phase(s, b, t - tau) - 2.0 * PI * cfg.carrier_hz * tau + 2.0 * PI * fd * t_abs;
                        acc += Complex64::from_polar(cfg.echo_amplitude(tg), ph);
                    }
                    for it in &interferers {
                        let PreparedKind::Fmcw { slope, bandwidth } = it.kind else { continue };
                        let u = (t_abs - it.delay_s).rem_euclid(it.pri_s);
                        if u >= cfg.pulse_s {
                            continue;
                        }
                        let beat = (slope * u - bandwidth / 2.0 + it.fd) - (s * t - b / 2.0);
                        if beat.abs() >= fs / 2.0 {
                            continue;
                        }
                        let ph = chirp_phase(slope, bandwidth, u) + it.phase + 2.0 * PI * it.fd * t_abs;
                        acc += Complex64::from_polar(it.amp, ph);
                    }
                    f.data[m * ns + n] = acc;
                }
            }
            f
        }
        VictimWaveform::Pmcw { .. } => {
            let code = cfg.victim_code()?.samples();
            let np = cfg.pmcw_samples();
            let chip = cfg.chip_s;
            let mut f = Frame::zeros(cfg.pulses, np);
            for tg in &cfg.targets {
                let tau = 2.0 * tg.range_m / C;
                let d = (tau / chip).round() as usize;
                let fd = 2.0 * tg.speed_mps / lam;
                let a = cfg.echo_amplitude(tg);
                let carrier = -2.0 * PI * cfg.carrier_hz * tau;
                for m in 0..cfg.pulses {
                    for (j, c) in code.iter().enumerate() {
                        let n = d + j;
                        if n >= np {
                            break;
                        }
                        let t_abs = (m * np + n) as f64 * chip;
                        f.data[m * np + n] += c * Complex64::from_polar(a, carrier + 2.0 * PI * fd * t_abs);
                    }
                }
            }
            for it in &interferers {
                let period = (it.pri_s / chip).round() as i64;
                let offset = (it.delay_s / chip).round() as i64;
                for m in 0..cfg.pulses {
                    for n in 0..np {
                        let idx = (m * np + n) as i64;
                        let t_abs = idx as f64 * chip;
                        let rot = Complex64::from_polar(it.amp, it.phase + 2.0 * PI * it.fd * t_abs);
                        let v = match &it.kind {
                            PreparedKind::Pmcw { code } => {
                                let j = (idx - offset).rem_euclid(period) as usize;
                                match code.get(j) {
                                    Some(c) => *c,
                                    None => continue,
                                }
                            }
                            PreparedKind::Fmcw { slope, bandwidth } => {
                                let u = (t_abs - it.delay_s).rem_euclid(it.pri_s);
                                if u >= cfg.pulse_s {
                                    continue;
                                }
                                Complex64::from_polar(1.0, chirp_phase(*slope, *bandwidth, u))
                            }
                        };
                        f.data[m * np + n] += v * rot;
                    }
                }
            }
            f
        }
    };
    if cfg.noise {
        let sigma = (cfg.noise_power_w() / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "noise", 0));
        for z in frame.data.iter_mut() {
            *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(frame)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeDopplerMap {
    /// `[range bin][Doppler bin]`, `10 log10` of power.
    pub power_db: Vec<Vec<f64>>,
    pub range_m: Vec<f64>,
    pub velocity_mps: Vec<f64>,
    pub processing: String,
}

impl RangeDopplerMap {
    pub fn shape(&self) -> (usize, usize) {
        (self.range_m.len(), self.velocity_mps.len())
    }

    pub fn peak_cell(&self) -> (usize, usize) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (r, row) in self.power_db.iter().enumerate() {
            for (d, &p) in row.iter().enumerate() {
                if p > best.2 {
                    best = (r, d, p);
                }
            }
        }
        (best.0, best.1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("range_m,velocity_mps,power_db\n");
        for (r, row) in self.range_m.iter().zip(&self.power_db) {
            for (v, p) in self.velocity_mps.iter().zip(row) {
                let _ = writeln!(s, "{r:.4},{v:.4},{}", fmt_db(*p));
            }
        }
        s
    }
}

/// Slow-time windowed FFT per range bin, fftshifted, in power dB.
fn doppler_process(cfg: &ScenarioConfig, profiles: Vec<Vec<Complex64>>, processing: String) -> RangeDopplerMap {
    let p = cfg.pulses;
    let bins = profiles[0].len();
    let w = cfg.doppler_window.coefficients(p);
    let fft = FftPlanner::new().plan_fft_forward(p);
    let mut power_db = Vec::with_capacity(bins);
    for r in 0..bins {
        let mut col: Vec<Complex64> = (0..p).map(|m| profiles[m][r] * w[m]).collect();
        fft.process(&mut col);
        let row = (0..p).map(|k| 10.0 * col[(k + p - p / 2) % p].norm_sqr().log10()).collect();
        power_db.push(row);
    }
    let res = cfg.range_resolution_m();
    let lam = cfg.wavelength_m();
    let velocity_mps = (0..p)
        .map(|k| (k as f64 - (p / 2) as f64) / (p as f64 * cfg.pri_s()) * lam / 2.0)
        .collect();
    RangeDopplerMap { power_db, range_m: (0..bins).map(|r| r as f64 * res).collect(), velocity_mps, processing }
}

/// De-chirp against the victim chirp, windowed range FFT, Doppler FFT.
pub fn process_fmcw(frame: &Frame, cfg: &ScenarioConfig) -> Result<RangeDopplerMap> {
    cfg.validate()?;
    let tx = synth_fmcw(cfg)?;
    if frame.pulses != tx.pulses || frame.samples != tx.samples {
        return Err(Error::dim("frame does not match the FMCW configuration"));
    }
    let ns = frame.samples;
    let bins = cfg.range_bins();
    let w = cfg.range_window.coefficients(ns);
    // rx conj(tx) puts a target at beat frequency -S tau; the inverse
    // transform maps it to a positive range bin
    let ifft = FftPlanner::new().plan_fft_inverse(ns);
    let profiles = (0..frame.pulses)
        .map(|m| {
            let mut v: Vec<Complex64> =
                frame.pulse(m).iter().zip(tx.pulse(m)).zip(&w).map(|((r, t), w)| r * t.conj() * w).collect();
            ifft.process(&mut v);
            v.truncate(bins);
            v
        })
        .collect();
    Ok(doppler_process(cfg, profiles, format!("fmcw dechirp; range {:?}; doppler {:?}", cfg.range_window, cfg.doppler_window)))
}

/// Per-pulse matched filter against `code`, Doppler FFT.
pub fn process_pmcw(frame: &Frame, cfg: &ScenarioConfig, code: &UnimodularSequence) -> Result<RangeDopplerMap> {
    cfg.validate()?;
    let l = code.len();
    let bins = cfg.range_bins();
    if frame.samples < l + bins {
        return Err(Error::dim("frame too short for matched filtering"));
    }
    let c: Vec<Complex64> = code.samples().iter().map(|z| z.conj()).collect();
    let profiles = (0..frame.pulses)
        .map(|m| {
            let rx = frame.pulse(m);
            (0..bins).map(|d| rx[d..d + l].iter().zip(&c).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    Ok(doppler_process(cfg, profiles, format!("pmcw matched filter; doppler {:?}", cfg.doppler_window)))
}

/// Simulates one frame and runs the victim's receiver on it.
pub fn run(cfg: &ScenarioConfig) -> Result<RangeDopplerMap> {
    let frame = simulate(cfg)?;
    match cfg.victim {
        VictimWaveform::Fmcw => process_fmcw(&frame, cfg),
        VictimWaveform::Pmcw { .. } => process_pmcw(&frame, cfg, &cfg.victim_code()?),
    }
}

/// Peak power within `guard` cells of `cell` over mean power outside, in dB.
pub fn estimate_sinr(map: &RangeDopplerMap, cell: (usize, usize), guard: (usize, usize)) -> Result<f64> {
    let (nr, nd) = map.shape();
    if cell.0 >= nr || cell.1 >= nd {
        return Err(Error::param(format!("cell {cell:?} outside map of {nr} x {nd}")));
    }
    let mut peak = 0.0f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, row) in map.power_db.iter().enumerate() {
        for (d, &p) in row.iter().enumerate() {
            let lin = 10f64.powf(p / 10.0);
            if r.abs_diff(cell.0) <= guard.0 && d.abs_diff(cell.1) <= guard.1 {
                peak = peak.max(lin);
            } else {
                sum += lin;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::param("guard window covers the whole map"));
    }
    Ok(10.0 * (peak / (sum / count as f64)).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// Frame start sample.
    pub times: Vec<usize>,
    /// Cycles per sample, ascending from -0.5.
    pub freqs: Vec<f64>,
    /// `[frame][frequency]` magnitude.
    pub magnitude: Vec<Vec<f64>>,
}

/// Hann-windowed STFT, zero-padded to four times the window.
pub fn spectrogram(w: &[Complex64], window: usize, hop: usize) -> Result<Spectrogram> {
    if window == 0 || hop == 0 || window > w.len() {
        return Err(Error::param(format!("window {window} / hop {hop} invalid for {} samples", w.len())));
    }
    let nfft = (4 * window).next_power_of_two();
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let win = Window::Hann.coefficients(window);
    let mut times = Vec::new();
    let mut magnitude = Vec::new();
    let mut start = 0;
    while start + window <= w.len() {
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for i in 0..window {
            buf[i] = w[start + i] * win[i];
        }
        fft.process(&mut buf);
        magnitude.push((0..nfft).map(|k| buf[(k + nfft / 2) % nfft].norm()).collect());
        times.push(start);
        start += hop;
    }
    let freqs = (0..nfft).map(|k| (k as f64 - (nfft / 2) as f64) / nfft as f64).collect();
    Ok(Spectrogram { times, freqs, magnitude })
}

impl Spectrogram {
    /// Long-form `sample,freq,mag_db`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sample,freq,mag_db\n");
        for (t, row) in self.times.iter().zip(&self.magnitude) {
            for (f, m) in self.freqs.iter().zip(row) {
                let _ = writeln!(s, "{t},{f:.6},{}", fmt_db(20.0 * m.log10()));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start_frame: usize,
    pub end_frame: usize,
    /// Cycles per sample per frame.
    pub slope: f64,
}

impl Spectrogram {
    /// Peak frequency of every frame.
    pub fn ridge(&self) -> Vec<f64> {
        self.magnitude
            .iter()
            .map(|row| {
                let (i, _) = row.iter().enumerate().fold((0, f64::MIN), |a, (i, &m)| if m > a.1 { (i, m) } else { a });
                self.freqs[i]
            })
            .collect()
    }

    /// Runs of at least `min_frames` frames over which the ridge frequency
    /// keeps rising, each with its least-squares slope. A wrap-around jump or
    /// a fall ends the run.
    pub fn detect_ramps(&self, min_frames: usize, max_step: f64) -> Vec<Ramp> {
        let ridge = self.ridge();
        let mut ramps = Vec::new();
        let mut start = 0;
        for i in 1..=ridge.len() {
            let rising = i < ridge.len() && {
                let d = ridge[i] - ridge[i - 1];
                d > 0.0 && d <= max_step
            };
            if !rising {
                if i - start >= min_frames {
                    ramps.push(Ramp { start_frame: start, end_frame: i - 1, slope: slope(&ridge[start..i]) });
                }
                start = i;
            }
        }
        ramps
    }
}

fn slope(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = v.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in v.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
