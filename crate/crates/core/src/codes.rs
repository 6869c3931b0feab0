//! Closed-form chirplike polyphase codes.
//!
//! Every phase is evaluated as `pi * k / d` with an exact integer numerator
//! `k`, so half-integer factors (Zadoff, P2, Px) never round. Two-index codes
//! (Frank, P1, Px) are flattened with the group index `n` outer and `k` inner.
//!
//! P2 follows `phi_m = (2 pi / M) (m-1)^2 / 2`, which is not the textbook P2
//! (that one is defined on a square grid). Chu codes are Zadoff codes with
//! `r = 1`, `q = 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{autocorr_fft, sidelobe_metrics, SidelobeMetrics};
use crate::seqcore::UnimodularSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CodeSpec {
    Frank { l: usize },
    P1 { l: usize },
    Px { l: usize },
    P2 { m: usize },
    P4 { m: usize },
    Zadoff { m: usize, r: i64, q: i64 },
    Golomb { m: usize, r: i64 },
}

impl CodeSpec {
    pub fn chu(m: usize) -> Self {
        CodeSpec::Zadoff { m, r: 1, q: 0 }
    }

    pub fn len(&self) -> usize {
        match *self {
            CodeSpec::Frank { l } | CodeSpec::P1 { l } | CodeSpec::Px { l } => l * l,
            CodeSpec::P2 { m } | CodeSpec::P4 { m } | CodeSpec::Zadoff { m, .. } | CodeSpec::Golomb { m, .. } => m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Square-grid code whose length is `n`; fails unless `n` is a perfect square.
    pub fn square(kind: &str, n: usize) -> Result<Self> {
        let l = (n as f64).sqrt().round() as usize;
        if l * l != n {
            return Err(Error::param(format!("{kind} codes need a perfect-square length, got {n}")));
        }
        match kind {
            "frank" => Ok(CodeSpec::Frank { l }),
            "p1" => Ok(CodeSpec::P1 { l }),
            "px" => Ok(CodeSpec::Px { l }),
            _ => Err(Error::param(format!("{kind} is not a square-grid code"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::param(format!("{self:?} yields fewer than 2 chips")));
        }
        match *self {
            CodeSpec::Zadoff { m, r, q } => {
                if gcd(r.unsigned_abs(), m as u64) != 1 {
                    return Err(Error::param(format!("Zadoff r = {r} is not coprime with M = {m}")));
                }
                if q < 0 || q > m as i64 {
                    return Err(Error::param(format!("Zadoff q = {q} outside [0, {m}]")));
                }
            }
            CodeSpec::Golomb { m, r } => {
                if gcd(r.unsigned_abs(), m as u64) != 1 {
                    return Err(Error::param(format!("Golomb r = {r} is not coprime with M = {m}")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn ratio(num: i64, den: i64) -> f64 {
    PI * num as f64 / den as f64
}

pub fn generate(spec: &CodeSpec) -> Result<UnimodularSequence> {
    spec.validate()?;
    let phases: Vec<f64> = match *spec {
        CodeSpec::Frank { l } => grid(l, |n, k, l| ratio(2 * (n - 1) * (k - 1), l)),
        CodeSpec::P1 { l } => grid(l, |n, k, l| ratio((l + 1 - 2 * n) * ((n - 1) * l + (k - 1)), l)),
        CodeSpec::Px { l } => grid(l, |n, k, l| {
            if l % 2 == 0 {
                ratio((l + 1 - 2 * k) * (l + 1 - 2 * n), 2 * l)
            } else {
                ratio((l - 2 * k) * (l + 1 - 2 * n), 2 * l)
            }
        }),
        CodeSpec::P2 { m } => line(m, |i, m| ratio((i - 1) * (i - 1), m)),
        CodeSpec::P4 { m } => line(m, |i, m| ratio((i - 1) * (i - 1 - m), m)),
        CodeSpec::Zadoff { m, r, q } => line(m, |i, m| ratio((i - 1) * (r * (m - 1 - i) - 2 * q), m)),
        CodeSpec::Golomb { m, r } => line(m, |i, m| ratio(r * (i - 1) * i, m)),
    };
    UnimodularSequence::new(phases)
}

fn grid(l: usize, phase: impl Fn(i64, i64, i64) -> f64) -> Vec<f64> {
    let li = l as i64;
    (1..=li).flat_map(|n| (1..=li).map(move |k| (n, k))).map(|(n, k)| phase(n, k, li)).collect()
}

fn line(m: usize, phase: impl Fn(i64, i64) -> f64) -> Vec<f64> {
    let mi = m as i64;
    (1..=mi).map(|i| phase(i, mi)).collect()
}

/// Sidelobe metrics of a generated code.
pub fn reference_metrics(spec: &CodeSpec, p: f64) -> Result<SidelobeMetrics> {
    sidelobe_metrics(&autocorr_fft(&generate(spec)?), p)
}
