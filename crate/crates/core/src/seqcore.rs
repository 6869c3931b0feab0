//! Unimodular sequences, sub-sequence partitions and polynomial-phase synthesis.
//!
//! A sequence is stored as its phase vector, so `|x_n| = 1` holds by
//! construction. Sub-sequence sample indices run `m = 1..=M_l`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq;

/// Constant-modulus sequence `x_n = exp(j phi_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnimodularSequence {
    phases: Vec<f64>,
}

impl UnimodularSequence {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.len() < 2 {
            return Err(Error::TooShort(phases.len()));
        }
        if let Some(i) = phases.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePhase(i));
        }
        Ok(Self { phases })
    }

    /// Builds a sequence from the arguments of arbitrary complex samples.
    pub fn from_samples(samples: &[Complex64]) -> Result<Self> {
        Self::new(samples.iter().map(|z| z.arg()).collect())
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn samples(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }

    /// Phases reduced to `(-pi, pi]`.
    pub fn wrapped_phases(&self) -> Vec<f64> {
        self.phases.iter().map(|&p| wrap_to_pi(p)).collect()
    }
}

impl TryFrom<Vec<f64>> for UnimodularSequence {
    type Error = Error;

    fn try_from(phases: Vec<f64>) -> Result<Self> {
        Self::new(phases)
    }
}

impl From<UnimodularSequence> for Vec<f64> {
    fn from(s: UnimodularSequence) -> Self {
        s.phases
    }
}

/// Split of a length-`N` sequence into consecutive sub-sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    lengths: Vec<usize>,
}

impl Partition {
    pub fn new(lengths: Vec<usize>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::param("partition needs at least one sub-sequence"));
        }
        if lengths.iter().any(|&m| m == 0) {
            return Err(Error::param("sub-sequence lengths must be positive"));
        }
        Ok(Self { lengths })
    }

    /// `floor(n / m)` blocks of length `m`, followed by one shorter block
    /// holding the remainder, if any.
    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::param(format!("block length {m} invalid for n = {n}")));
        }
        let mut lengths = vec![m; n / m];
        if n % m != 0 {
            lengths.push(n % m);
        }
        Self::new(lengths)
    }

    /// Block lengths drawn uniformly from `[m_min, m_max]`; the last block is
    /// trimmed so the lengths sum to `n`.
    pub fn random<R: Rng + ?Sized>(n: usize, m_min: usize, m_max: usize, rng: &mut R) -> Result<Self> {
        if m_min == 0 || m_min > m_max {
            return Err(Error::param(format!("invalid length range [{m_min}, {m_max}]")));
        }
        let mut lengths = Vec::new();
        let mut total = 0;
        while total < n {
            let m = rng.random_range(m_min..=m_max).min(n - total);
            lengths.push(m);
            total += m;
        }
        Self::new(lengths)
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn num_blocks(&self) -> usize {
        self.lengths.len()
    }

    pub fn total_len(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// `(offset, length)` of each block.
    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.lengths.iter().scan(0usize, |off, &m| {
            let start = *off;
            *off += m;
            Some((start, m))
        })
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.lengths
    }
}

/// Per-block phase polynomial coefficients `a_{q,l}` (row `l`, column `q`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePolynomials {
    degree: usize,
    coeffs: Vec<Vec<f64>>,
}

impl PhasePolynomials {
    pub fn new(degree: usize, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::param("no coefficient rows"));
        }
        if let Some(row) = coeffs.iter().position(|r| r.len() != degree + 1) {
            return Err(Error::dim(format!(
                "coefficient row {row} has {} entries, expected {}",
                coeffs[row].len(),
                degree + 1
            )));
        }
        if coeffs.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::param("non-finite polynomial coefficient"));
        }
        Ok(Self { degree, coeffs })
    }

    pub fn zeros(degree: usize, blocks: usize) -> Self {
        Self { degree, coeffs: vec![vec![0.0; degree + 1]; blocks.max(1)] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_blocks(&self) -> usize {
        self.coeffs.len()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.coeffs[l]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub(crate) fn set_row(&mut self, l: usize, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.degree + 1);
        self.coeffs[l] = row;
    }

    /// Same polynomials expressed at a higher degree (zero-padded).
    pub fn with_degree(&self, degree: usize) -> Result<Self> {
        if degree < self.degree {
            return Err(Error::param(format!(
                "cannot lower polynomial degree from {} to {degree}",
                self.degree
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.resize(degree + 1, 0.0);
                r
            })
            .collect();
        Ok(Self { degree, coeffs })
    }

    /// Random initial coefficients: `a_q ~ U(-pi, pi) / M_l^(q-1)` for `q >= 1`
    /// and `a_0 ~ U(-pi, pi)`. The derivative of every term is then bounded by
    /// `q pi` rad per sample, so the draw covers the full frequency range
    /// without aliasing the higher-order terms.
    pub fn random(partition: &Partition, degree: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = partition
            .lengths()
            .iter()
            .map(|&m| {
                let scale = m as f64;
                (0..=degree)
                    .map(|q| rng.random_range(-PI..PI) / scale.powi(q.max(1) as i32 - 1))
                    .collect()
            })
            .collect();
        Self { degree, coeffs }
    }
}

/// Evaluates every block polynomial and concatenates the phases.
pub fn synthesize(partition: &Partition, polys: &PhasePolynomials) -> Result<UnimodularSequence> {
    if partition.num_blocks() != polys.num_blocks() {
        return Err(Error::dim(format!(
            "partition has {} blocks but {} coefficient rows were given",
            partition.num_blocks(),
            polys.num_blocks()
        )));
    }
    let mut phases = Vec::with_capacity(partition.total_len());
    for (row, &m) in polys.rows().iter().zip(partition.lengths()) {
        phases.extend(lsq::eval_poly(row, m));
    }
    UnimodularSequence::new(phases)
}

pub fn wrap_to_pi(p: f64) -> f64 {
    let w = p.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Standard phase unwrapping of `arg(x_n)`: the first sample is kept in
/// `(-pi, pi]` and every later jump larger than `pi` is removed by adding a
/// multiple of `2 pi`.
pub fn unwrap_phase(x: &UnimodularSequence) -> Vec<f64> {
    unwrap(&x.wrapped_phases())
}

/// Unwraps an arbitrary phase vector (see [`unwrap_phase`]).
pub fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut it = phases.iter();
    let Some(&first) = it.next() else {
        return out;
    };
    let mut prev = wrap_to_pi(first);
    out.push(prev);
    for &p in it {
        let d = wrap_to_pi(p - prev);
        // a jump of exactly pi is left as is
        let d = if (d - PI).abs() < 1e-15 && p - prev > 0.0 { PI } else { d };
        prev += d;
        out.push(prev);
    }
    out
}

/// Result of a polynomial fit to a phase vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

/// Least-squares fit of `sum_q a_q m^q`, `m = 1..=len`, to a phase vector taken
/// as already unwrapped.
pub fn fit_phase_polynomial(phases: &[f64], degree: usize) -> Result<PolyFit> {
    if phases.len() < degree + 1 {
        return Err(Error::Degenerate(format!(
            "{} samples cannot determine a degree-{degree} polynomial",
            phases.len()
        )));
    }
    let (coeffs, residual) = lsq::poly_fit(phases, degree)
        .ok_or_else(|| Error::Numerical("polynomial fit failed".into()))?;
    Ok(PolyFit { coeffs, residual })
}

/// How far a block of phases is from any degree-`degree` polynomial phase,
/// modulo `2 pi`.
///
/// Plain unwrapping fails on fast polynomial phases (a chirp whose per-sample
/// increment passes `pi` is not polynomial after unwrapping). Instead the
/// block is lifted so that its `(degree+1)`-th finite difference equals the
/// wrapped difference of the input; any sample-wise `2 pi` ambiguity then
/// only adds a degree-`degree` polynomial, and the residual of a plain fit to
/// the lifted phases measures the constraint violation.
pub fn polynomial_phase_residual(phases: &[f64], degree: usize) -> f64 {
    let len = phases.len();
    let order = degree + 1;
    if len <= order {
        return 0.0;
    }
    let wrapped: Vec<f64> = phases.iter().map(|&p| wrap_to_pi(p)).collect();
    let binom: Vec<f64> = (0..=order).map(|k| binomial(order, k)).collect();
    let mut lifted = wrapped[..order].to_vec();
    for n in order..len {
        // sum_{k=0}^{order} (-1)^{order-k} C(order,k) phi_{n-order+k}
        let mut diff = 0.0;
        for k in 0..=order {
            let sign = if (order - k) % 2 == 0 { 1.0 } else { -1.0 };
            diff += sign * binom[k] * wrapped[n - order + k];
        }
        let target = wrap_to_pi(diff);
        let mut partial = 0.0;
        for k in 0..order {
            let sign = if (order - k) % 2 == 0 { 1.0 } else { -1.0 };
            partial += sign * binom[k] * lifted[n - order + k];
        }
        lifted.push(target - partial);
    }
    match lsq::poly_fit(&lifted, degree) {
        Some((_, res)) => res,
        None => f64::INFINITY,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Independent child seed for a named stream (`label`, `index`) under `seed`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(splitmix(seed ^ h) ^ index)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Phases i.i.d. uniform on `[0, 2 pi)` from a seeded ChaCha8 stream.
pub fn random_unimodular(n: usize, seed: u64) -> Result<UnimodularSequence> {
    if n < 2 {
        return Err(Error::TooShort(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    UnimodularSequence::new((0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
}

/// On-disk sequence format shared by every command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub n: usize,
    pub phases_rad: Vec<f64>,
    pub partition: Option<Vec<usize>>,
    pub poly_coeffs: Option<Vec<Vec<f64>>>,
    pub seed: Option<u64>,
}

impl SequenceFile {
    pub fn from_sequence(x: &UnimodularSequence) -> Self {
        Self { n: x.len(), phases_rad: x.phases().to_vec(), partition: None, poly_coeffs: None, seed: None }
    }

    pub fn with_structure(mut self, partition: &Partition, polys: &PhasePolynomials) -> Self {
        self.partition = Some(partition.lengths().to_vec());
        self.poly_coeffs = Some(polys.rows().to_vec());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn sequence(&self) -> Result<UnimodularSequence> {
        if self.n != self.phases_rad.len() {
            return Err(Error::dim(format!(
                "header says n = {} but {} phases are present",
                self.n,
                self.phases_rad.len()
            )));
        }
        UnimodularSequence::new(self.phases_rad.clone())
    }

    pub fn structure(&self) -> Result<Option<(Partition, PhasePolynomials)>> {
        match (&self.partition, &self.poly_coeffs) {
            (Some(p), Some(c)) => {
                let partition = Partition::new(p.clone())?;
                let degree = c.first().map(|r| r.len().saturating_sub(1)).unwrap_or(0);
                let polys = PhasePolynomials::new(degree, c.clone())?;
                if partition.total_len() != self.n {
                    return Err(Error::dim("partition does not cover the sequence"));
                }
                Ok(Some((partition, polys)))
            }
            _ => Ok(None),
        }
    }
}
