//! Sequence designers under the piecewise polynomial phase constraint.
//!
//! Each designer alternates an unconstrained unimodular update `y` with a
//! projection onto the constraint set, done block by block by fitting a
//! degree-Q phase polynomial to `arg(y)`.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq;
use crate::metrics::{lp_norm, Correlator};
use crate::mm_engine::{majorizer_params, y_update, StoppingRule};
use crate::seqcore::{derive_seed, synthesize, wrap_to_pi, Partition, PhasePolynomials, UnimodularSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Designer {
    Pecs,
    MislPecs,
    CanPecs,
}

impl std::str::FromStr for Designer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pecs" => Ok(Designer::Pecs),
            "misl-pecs" => Ok(Designer::MislPecs),
            "can-pecs" => Ok(Designer::CanPecs),
            _ => Err(Error::param(format!("unknown designer {s:?}"))),
        }
    }
}

/// How the per-block phase fit is posed.
///
/// `Weighted` linearizes `cos(phi - psi)` around the previous phase and
/// weights each row by `rho cos(theta)`. `Unweighted` drops the row weights.
/// `Majorized` minimizes a quadratic lower bound of the block objective with
/// weights `rho`; it is the only variant with guaranteed ascent and is the
/// fallback whenever another variant fails to descend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsVariant {
    Weighted,
    Unweighted,
    Majorized,
}

impl std::str::FromStr for LsVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(LsVariant::Weighted),
            "unweighted" => Ok(LsVariant::Unweighted),
            "majorized" => Ok(LsVariant::Majorized),
            _ => Err(Error::param(format!("unknown least-squares variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PartitionSpec {
    Fixed { lengths: Vec<usize> },
    Uniform { m: usize },
    Random { m_min: usize, m_max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub n: usize,
    pub partition: PartitionSpec,
    pub q: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    pub designer: Designer,
    #[serde(default)]
    pub stopping: StoppingRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_variant")]
    pub ls_variant: LsVariant,
    /// Squared extrapolation over pairs of MM steps; each recorded iteration
    /// then costs three or more MM maps.
    #[serde(default)]
    pub accelerate: bool,
}

fn default_p() -> f64 {
    2.0
}

fn default_variant() -> LsVariant {
    LsVariant::Weighted
}

impl DesignConfig {
    pub fn new(n: usize, partition: PartitionSpec, q: usize, designer: Designer) -> Self {
        Self {
            n,
            partition,
            q,
            p: 2.0,
            designer,
            stopping: StoppingRule::default(),
            seed: 0,
            ls_variant: LsVariant::Weighted,
            accelerate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooShort(self.n));
        }
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(Error::param(format!("p must be a finite real >= 2, got {}", self.p)));
        }
        self.stopping.validate()
    }

    pub fn build_partition(&self) -> Result<Partition> {
        let part = match &self.partition {
            PartitionSpec::Fixed { lengths } => Partition::new(lengths.clone())?,
            PartitionSpec::Uniform { m } => Partition::uniform(self.n, *m)?,
            PartitionSpec::Random { m_min, m_max } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(self.seed, "partition", 0));
                Partition::random(self.n, *m_min, *m_max, &mut rng)?
            }
        };
        if part.total_len() != self.n {
            return Err(Error::dim(format!("partition covers {} samples, N = {}", part.total_len(), self.n)));
        }
        Ok(part)
    }

    pub fn initial_polys(&self, partition: &Partition) -> PhasePolynomials {
        PhasePolynomials::random(partition, self.q, derive_seed(self.seed, "init", 0))
    }
}

/// Blocks whose weighted system carried no information keep their previous
/// coefficients and are counted in `degenerate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubroutineOutput {
    pub polys: PhasePolynomials,
    pub x: UnimodularSequence,
    pub degenerate: usize,
}

/// Block count above which the projection runs on the rayon pool.
const PAR_MIN_BLOCKS: usize = 256;

/// Projects `y` onto the piecewise polynomial phase set, one least-squares
/// fit per block, linearized around `prev`.
pub fn pecs_subroutine(
    y: &[Complex64],
    partition: &Partition,
    prev: &PhasePolynomials,
    variant: LsVariant,
) -> Result<SubroutineOutput> {
    subroutine(y, partition, prev, variant, partition.num_blocks() >= PAR_MIN_BLOCKS)
}

/// Same as [`pecs_subroutine`] but always fans blocks out over rayon.
/// Results are bitwise identical to the serial path.
pub fn pecs_subroutine_parallel(
    y: &[Complex64],
    partition: &Partition,
    prev: &PhasePolynomials,
    variant: LsVariant,
) -> Result<SubroutineOutput> {
    subroutine(y, partition, prev, variant, true)
}

fn subroutine(
    y: &[Complex64],
    partition: &Partition,
    prev: &PhasePolynomials,
    variant: LsVariant,
    parallel: bool,
) -> Result<SubroutineOutput> {
    if y.len() != partition.total_len() {
        return Err(Error::dim(format!("y has {} samples, partition covers {}", y.len(), partition.total_len())));
    }
    if prev.num_blocks() != partition.num_blocks() {
        return Err(Error::dim("coefficient rows do not match partition blocks"));
    }
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite y".into()));
    }
    let blocks: Vec<(usize, usize, usize)> =
        partition.blocks().enumerate().map(|(l, (off, len))| (l, off, len)).collect();
    let fit = |&(l, off, len): &(usize, usize, usize)| fit_block(&y[off..off + len], prev.row(l), variant);
    let rows: Vec<Option<Vec<f64>>> =
        if parallel { blocks.par_iter().map(fit).collect() } else { blocks.iter().map(fit).collect() };

    let mut polys = prev.clone();
    let mut degenerate = 0;
    for (l, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => polys.set_row(l, r),
            None => degenerate += 1,
        }
    }
    let x = synthesize(partition, &polys)?;
    Ok(SubroutineOutput { polys, x, degenerate })
}

fn fit_block(y: &[Complex64], prev: &[f64], variant: LsVariant) -> Option<Vec<f64>> {
    let degree = prev.len() - 1;
    let phi = lsq::eval_poly(prev, y.len());
    let mut w = Vec::with_capacity(y.len());
    let mut b = Vec::with_capacity(y.len());
    for (z, &ph) in y.iter().zip(&phi) {
        let rho = z.norm();
        let theta = wrap_to_pi(ph - z.arg());
        let (s, c) = theta.sin_cos();
        match variant {
            LsVariant::Weighted => {
                let g = rho * c;
                w.push(g);
                b.push(g * ph - rho * s);
            }
            LsVariant::Unweighted => {
                w.push(1.0);
                b.push(rho * c * ph - rho * s);
            }
            LsVariant::Majorized => {
                let g = rho.sqrt();
                w.push(g);
                b.push(g * (ph - s));
            }
        }
    }
    lsq::weighted_poly_lstsq(&w, &b, degree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIters,
    /// Neither the configured nor the fallback projection reduced the objective.
    Stalled,
    /// All sidelobes vanished.
    Impulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// l_p sidelobe norm for PECS, ISL for the other designers.
    pub objective: f64,
    pub isl_db: f64,
    pub psl_db: f64,
    pub wall_ms: f64,
}

/// Read-only view handed to observers after every accepted iterate.
#[derive(Debug)]
pub struct IterView<'a> {
    pub iter: usize,
    pub x: &'a UnimodularSequence,
    pub polys: &'a PhasePolynomials,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignRun {
    pub config: DesignConfig,
    pub partition: Partition,
    pub polys: PhasePolynomials,
    pub x: UnimodularSequence,
    pub trace: Vec<TraceRow>,
    /// CAN criterion per iterate; empty for the other designers.
    pub can_distance: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Steps where the configured projection failed to descend and the
    /// majorized projection was used instead.
    pub fallbacks: usize,
    pub rejected: usize,
    pub degenerate_blocks: usize,
}

impl DesignRun {
    pub fn objective_history(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    pub fn converged(&self) -> bool {
        !matches!(self.stop_reason, StopReason::MaxIters)
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }

    /// `iter,objective_lp,isl_db,psl_db,wall_ms`; wall times are written as
    /// zero unless `timing` is set so that repeated runs are byte-identical.
    pub fn trace_csv(&self, timing: bool) -> String {
        let mut s = String::from("iter,objective_lp,isl_db,psl_db,wall_ms\n");
        for r in &self.trace {
            let ms = if timing { r.wall_ms } else { 0.0 };
            let _ = writeln!(s, "{},{:.17e},{:.6},{:.6},{:.3}", r.iter, r.objective, r.isl_db, r.psl_db, ms);
        }
        s
    }
}

/// Runs the configured designer from the seeded random initialization.
pub fn design(config: &DesignConfig) -> Result<DesignRun> {
    config.validate()?;
    let partition = config.build_partition()?;
    let init = config.initial_polys(&partition);
    design_from(config, &partition, init, &mut |_| {})
}

/// Runs the configured designer from explicit initial coefficients, calling
/// `observer` on the initial point and every accepted iterate.
pub fn design_from(
    config: &DesignConfig,
    partition: &Partition,
    init: PhasePolynomials,
    observer: &mut dyn FnMut(&IterView<'_>),
) -> Result<DesignRun> {
    config.validate()?;
    if partition.total_len() != config.n {
        return Err(Error::dim(format!("partition covers {} samples, N = {}", partition.total_len(), config.n)));
    }
    if init.num_blocks() != partition.num_blocks() {
        return Err(Error::dim("initial coefficients do not match partition"));
    }
    let init = if init.degree() < config.q { init.with_degree(config.q)? } else { init };
    if init.degree() != config.q {
        return Err(Error::param(format!("initial degree {} exceeds Q = {}", init.degree(), config.q)));
    }
    let mut state = State::new(config, partition, init)?;
    observer(&state.view());
    state.run(observer)?;
    Ok(state.finish())
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    objective: f64,
    isl: f64,
    psl: f64,
    can: f64,
}

#[derive(Debug, Clone)]
struct Point {
    polys: PhasePolynomials,
    x: UnimodularSequence,
    eval: Eval,
}

enum Outcome {
    Moved { point: Point, fallback: bool, degenerate: usize },
    Stalled,
    Impulse,
}

struct State<'a> {
    config: &'a DesignConfig,
    partition: &'a Partition,
    corr: Correlator,
    point: Point,
    history: Vec<f64>,
    trace: Vec<TraceRow>,
    can_distance: Vec<f64>,
    fallbacks: usize,
    rejected: usize,
    degenerate: usize,
    stop_reason: StopReason,
    start: Instant,
}

impl<'a> State<'a> {
    fn new(config: &'a DesignConfig, partition: &'a Partition, polys: PhasePolynomials) -> Result<Self> {
        let corr = Correlator::new(config.n);
        let point = make_point(&corr, config, partition, polys)?;
        let mut s = Self {
            config,
            partition,
            corr,
            point,
            history: Vec::new(),
            trace: Vec::new(),
            can_distance: Vec::new(),
            fallbacks: 0,
            rejected: 0,
            degenerate: 0,
            stop_reason: StopReason::MaxIters,
            start: Instant::now(),
        };
        s.record(0);
        Ok(s)
    }

    fn view(&self) -> IterView<'_> {
        IterView {
            iter: self.trace.len() - 1,
            x: &self.point.x,
            polys: &self.point.polys,
            objective: self.point.eval.objective,
        }
    }

    fn record(&mut self, iter: usize) {
        let e = self.point.eval;
        self.trace.push(TraceRow {
            iter,
            objective: e.objective,
            isl_db: 10.0 * e.isl.log10(),
            psl_db: 10.0 * e.psl.log10(),
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        if self.config.designer == Designer::CanPecs {
            self.can_distance.push(e.can);
            self.history.push(e.can);
        } else {
            self.history.push(e.objective);
        }
    }

    fn run(&mut self, observer: &mut dyn FnMut(&IterView<'_>)) -> Result<()> {
        let rule = self.config.stopping;
        for iter in 1..=rule.max_iters {
            let outcome = if self.config.accelerate && self.config.designer != Designer::CanPecs {
                self.squarem_cycle()?
            } else {
                self.mm_map(&self.point)?
            };
            let (point, fallback, degenerate) = match outcome {
                Outcome::Moved { point, fallback, degenerate } => (point, fallback, degenerate),
                Outcome::Stalled => {
                    self.rejected += 1;
                    self.stop_reason = StopReason::Stalled;
                    return Ok(());
                }
                Outcome::Impulse => {
                    self.stop_reason = StopReason::Impulse;
                    return Ok(());
                }
            };
            let phase_step = self
                .point
                .x
                .phases()
                .iter()
                .zip(point.x.phases())
                .map(|(a, b)| wrap_to_pi(b - a).abs())
                .fold(0.0, f64::max);
            self.degenerate += degenerate;
            self.fallbacks += fallback as usize;
            self.point = point;
            self.record(iter);
            observer(&self.view());
            if rule.converged(&self.history, phase_step) {
                self.stop_reason = StopReason::Converged;
                return Ok(());
            }
        }
        Ok(())
    }

    /// One majorization-minimization step from `from`, with the descent
    /// safeguard. CAN-PECS has no monotone objective and always takes the
    /// configured projection.
    fn mm_map(&self, from: &Point) -> Result<Outcome> {
        if from.eval.isl == 0.0 {
            return Ok(Outcome::Impulse);
        }
        let y = match self.config.designer {
            Designer::Pecs => match majorizer_params(&self.corr, &from.x, self.config.p)? {
                Some(params) => y_update(&self.corr, &from.x, &params)?,
                None => return Ok(Outcome::Impulse),
            },
            Designer::MislPecs => misl_y(&self.corr, &from.x),
            Designer::CanPecs => can_y(&self.corr, &from.x),
        };
        let variant = self.config.ls_variant;
        let (first, degenerate) = self.candidate(&y, &from.polys, variant)?;
        if self.config.designer == Designer::CanPecs || first.eval.objective <= from.eval.objective {
            return Ok(Outcome::Moved { point: first, fallback: false, degenerate });
        }
        if variant == LsVariant::Majorized {
            return Ok(Outcome::Stalled);
        }
        let (second, degenerate) = self.candidate(&y, &from.polys, LsVariant::Majorized)?;
        if second.eval.objective <= from.eval.objective {
            Ok(Outcome::Moved { point: second, fallback: true, degenerate })
        } else {
            Ok(Outcome::Stalled)
        }
    }

    fn candidate(&self, y: &[Complex64], prev: &PhasePolynomials, variant: LsVariant) -> Result<(Point, usize)> {
        let out = pecs_subroutine(y, self.partition, prev, variant)?;
        let eval = evaluate(&self.corr, &out.x, self.config);
        Ok((Point { polys: out.polys, x: out.x, eval }, out.degenerate))
    }

    /// Squared extrapolation over two MM steps in coefficient space, with
    /// step lengths measured on the synthesized phases. Falls back to the
    /// plain double step whenever the extrapolated point does not descend.
    fn squarem_cycle(&self) -> Result<Outcome> {
        let p0 = &self.point;
        let (p1, fb1, d1) = match self.mm_map(p0)? {
            Outcome::Moved { point, fallback, degenerate } => (point, fallback, degenerate),
            other => return Ok(other),
        };
        let (p2, fb2, d2) = match self.mm_map(&p1)? {
            Outcome::Moved { point, fallback, degenerate } => (point, fallback, degenerate),
            _ => return Ok(Outcome::Moved { point: p1, fallback: fb1, degenerate: d1 }),
        };
        let plain = Outcome::Moved { point: p2.clone(), fallback: fb1 || fb2, degenerate: d1 + d2 };

        let (ph0, ph1, ph2) = (p0.x.phases(), p1.x.phases(), p2.x.phases());
        let r2: f64 = ph0.iter().zip(ph1).map(|(a, b)| (b - a) * (b - a)).sum();
        let v2: f64 = ph0.iter().zip(ph1).zip(ph2).map(|((a, b), c)| (c - 2.0 * b + a).powi(2)).sum();
        if !(v2 > 0.0) || !(r2 > 0.0) {
            return Ok(plain);
        }
        let mut alpha = -(r2 / v2).sqrt();
        while alpha < -1.0 {
            let rows: Vec<Vec<f64>> = (0..p0.polys.num_blocks())
                .map(|l| {
                    let (c0, c1, c2) = (p0.polys.row(l), p1.polys.row(l), p2.polys.row(l));
                    (0..c0.len())
                        .map(|q| {
                            let r = c1[q] - c0[q];
                            let v = c2[q] - 2.0 * c1[q] + c0[q];
                            c0[q] - 2.0 * alpha * r + alpha * alpha * v
                        })
                        .collect()
                })
                .collect();
            let polys = PhasePolynomials::new(p0.polys.degree(), rows)?;
            let jump = make_point(&self.corr, self.config, self.partition, polys)?;
            if let Outcome::Moved { point, fallback, degenerate } = self.mm_map(&jump)? {
                if point.eval.objective <= p2.eval.objective {
                    return Ok(Outcome::Moved { point, fallback: fallback || fb1 || fb2, degenerate: degenerate + d1 + d2 });
                }
            }
            alpha = (alpha - 1.0) / 2.0;
        }
        Ok(plain)
    }

    fn finish(self) -> DesignRun {
        DesignRun {
            config: self.config.clone(),
            partition: self.partition.clone(),
            polys: self.point.polys,
            x: self.point.x,
            iterations: self.trace.len() - 1,
            trace: self.trace,
            can_distance: self.can_distance,
            stop_reason: self.stop_reason,
            fallbacks: self.fallbacks,
            rejected: self.rejected,
            degenerate_blocks: self.degenerate,
        }
    }
}

fn make_point(corr: &Correlator, config: &DesignConfig, partition: &Partition, polys: PhasePolynomials) -> Result<Point> {
    let x = synthesize(partition, &polys)?;
    let eval = evaluate(corr, &x, config);
    Ok(Point { polys, x, eval })
}

/// `A (f_max + N^2 - f) o A^H x`, restricted to the first N rows.
fn misl_y(corr: &Correlator, x: &UnimodularSequence) -> Vec<Complex64> {
    let n = x.len();
    let nf = n as f64;
    let mut f = corr.spectrum(&x.samples());
    let fmax = f.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    f.iter_mut().for_each(|z| *z *= fmax + nf * nf - z.norm_sqr());
    corr.inverse(&mut f);
    f.truncate(n);
    f
}

fn can_y(corr: &Correlator, x: &UnimodularSequence) -> Vec<Complex64> {
    let mut f = corr.spectrum(&x.samples());
    f.iter_mut().for_each(|z| *z = unit(*z));
    corr.inverse(&mut f);
    f.truncate(x.len());
    f.into_iter().map(unit).collect()
}

fn unit(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn evaluate(corr: &Correlator, x: &UnimodularSequence, config: &DesignConfig) -> Eval {
    let f = corr.spectrum(&x.samples());
    let full = corr.circular_autocorr(&f);
    let n = config.n;
    let mags: Vec<f64> = (1..n).map(|k| full[k].norm()).collect();
    let isl: f64 = mags.iter().map(|v| v * v).sum();
    let psl = mags.iter().cloned().fold(0.0, f64::max);
    let objective = match config.designer {
        Designer::Pecs => lp_norm(&mags, config.p),
        _ => isl,
    };
    let can = if config.designer == Designer::CanPecs {
        let s = (2 * n) as f64;
        f.iter().map(|z| (z.norm() / s.sqrt() - std::f64::consts::FRAC_1_SQRT_2).powi(2)).sum::<f64>().sqrt()
    } else {
        0.0
    };
    Eval { objective, isl, psl, can }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polys(part: &Partition, q: usize, seed: u64) -> PhasePolynomials {
        PhasePolynomials::random(part, q, seed)
    }

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let part = Partition::new(vec![5, 7, 4]).unwrap();
        let c = polys(&part, 2, 3);
        let x = synthesize(&part, &c).unwrap();
        for v in [LsVariant::Weighted, LsVariant::Unweighted, LsVariant::Majorized] {
            let out = pecs_subroutine(&x.samples(), &part, &c, v).unwrap();
            for (a, b) in out.polys.rows().iter().flatten().zip(c.rows().iter().flatten()) {
                assert!((a - b).abs() < 1e-8, "{v:?}: {a} vs {b}");
            }
            assert_eq!(out.degenerate, 0);
        }
    }

    #[test]
    fn constant_block_converges_to_mean_direction() {
        let part = Partition::new(vec![6]).unwrap();
        let y: Vec<Complex64> =
            [0.3, 0.5, -0.2, 0.9, 0.1, 0.4].iter().map(|&a: &f64| Complex64::from_polar(1.0 + a, a)).collect();
        let want = y.iter().sum::<Complex64>().arg();
        let mut c = PhasePolynomials::zeros(0, 1);
        for _ in 0..50 {
            c = pecs_subroutine(&y, &part, &c, LsVariant::Majorized).unwrap().polys;
        }
        assert!(wrap_to_pi(c.row(0)[0] - want).abs() < 1e-10, "{} vs {want}", c.row(0)[0]);
    }

    #[test]
    fn parallel_projection_matches_serial() {
        let part = Partition::uniform(120, 7).unwrap();
        let c = polys(&part, 3, 9);
        let y: Vec<Complex64> = (0..120).map(|i| Complex64::from_polar(1.0 + (i % 5) as f64, 0.37 * i as f64)).collect();
        let a = pecs_subroutine(&y, &part, &c, LsVariant::Weighted).unwrap();
        let b = pecs_subroutine_parallel(&y, &part, &c, LsVariant::Weighted).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subroutine_rejects_bad_input() {
        let part = Partition::uniform(8, 4).unwrap();
        let c = polys(&part, 1, 0);
        let short = vec![Complex64::new(1.0, 0.0); 7];
        assert!(pecs_subroutine(&short, &part, &c, LsVariant::Weighted).is_err());
        let mut y = vec![Complex64::new(1.0, 0.0); 8];
        y[2] = Complex64::new(f64::NAN, 0.0);
        assert!(pecs_subroutine(&y, &part, &c, LsVariant::Weighted).is_err());
    }

    #[test]
    fn pecs_and_misl_descend() {
        for designer in [Designer::Pecs, Designer::MislPecs] {
            for accelerate in [false, true] {
                let mut cfg = DesignConfig::new(16, PartitionSpec::Uniform { m: 4 }, 2, designer);
                cfg.p = 4.0;
                cfg.accelerate = accelerate;
                cfg.stopping = StoppingRule::iterations(300);
                let run = design(&cfg).unwrap();
                let h = run.objective_history();
                assert!(h.windows(2).all(|w| w[1] <= w[0]), "{designer:?} {accelerate}");
                assert!(h.last() < h.first());
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = DesignConfig::new(40, PartitionSpec::Random { m_min: 3, m_max: 9 }, 2, Designer::Pecs);
        cfg.seed = 11;
        cfg.stopping = StoppingRule::iterations(50);
        let a = design(&cfg).unwrap();
        let b = design(&cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.trace_csv(false), b.trace_csv(false));
        assert!(a.trace_csv(false).starts_with("iter,objective_lp,isl_db,psl_db,wall_ms\n"));
    }

    #[test]
    fn can_records_distance() {
        let mut cfg = DesignConfig::new(32, PartitionSpec::Uniform { m: 8 }, 2, Designer::CanPecs);
        cfg.stopping = StoppingRule::iterations(100);
        let run = design(&cfg).unwrap();
        assert_eq!(run.can_distance.len(), run.trace.len());
        assert!(run.can_distance.last() < run.can_distance.first());
    }

    #[test]
    fn init_degree_checks() {
        let cfg = DesignConfig::new(12, PartitionSpec::Uniform { m: 4 }, 1, Designer::Pecs);
        let part = cfg.build_partition().unwrap();
        let high = polys(&part, 2, 0);
        assert!(design_from(&cfg, &part, high, &mut |_| {}).is_err());
        let mut cfg2 = cfg.clone();
        cfg2.q = 3;
        cfg2.stopping = StoppingRule::iterations(5);
        let run = design_from(&cfg2, &part, polys(&part, 1, 0), &mut |_| {}).unwrap();
        assert_eq!(run.polys.degree(), 3);
        let mut bad = cfg.clone();
        bad.p = 1.5;
        assert!(design(&bad).is_err());
    }

    #[test]
    fn parses_names() {
        assert_eq!("misl-pecs".parse::<Designer>().unwrap(), Designer::MislPecs);
        assert_eq!("majorized".parse::<LsVariant>().unwrap(), LsVariant::Majorized);
        assert!("pec".parse::<Designer>().is_err());
    }
}
