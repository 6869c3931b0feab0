use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use pecs_core::analysis::{ambiguity, doppler_sweep, grid, interference_stats, GeneratorSpec};
use pecs_core::codes::{generate, CodeSpec};
use pecs_core::designers::{self, Designer, DesignConfig, DesignRun, LsVariant, PartitionSpec, StopReason};
use pecs_core::metrics::{autocorr_fft, sidelobe_metrics};
use pecs_core::mm_engine::StoppingRule;
use pecs_core::scenario::{self, estimate_sinr, spectrogram, ScenarioConfig, VictimWaveform};
use pecs_core::seqcore::{SequenceFile, UnimodularSequence};

use crate::output::{CliError, CliResult, Log, OutDir, Provenance};

pub struct Ctx {
    pub out: PathBuf,
    pub timing: bool,
    pub log: Log,
}

impl Ctx {
    pub fn dir<C: Serialize>(&self, config: &C, seed: u64) -> CliResult<OutDir> {
        OutDir::create(&self.out, Provenance::new(config, seed)?)
    }
}

/// Top-level config file; each command reads its own section.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    design: Option<DesignConfig>,
    analysis: Option<StatsConfig>,
    scenario: Option<ScenarioConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    pub a: GeneratorSpec,
    pub b: GeneratorSpec,
    pub trials: usize,
}

fn read_config(path: &Path) -> CliResult<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn section<T>(v: Option<T>, name: &str, path: &Path) -> CliResult<T> {
    v.ok_or_else(|| CliError::Config(format!("{} has no \"{name}\" section", path.display())))
}

fn print_summary<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// JSON file with a "design" section; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    designer: Option<Designer>,
    #[arg(long)]
    n: Option<usize>,
    /// Uniform sub-sequence length.
    #[arg(long, conflicts_with_all = ["m_min", "m_max"])]
    m: Option<usize>,
    #[arg(long, requires = "m_max")]
    m_min: Option<usize>,
    #[arg(long, requires = "m_min")]
    m_max: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<LsVariant>,
    /// Squared extrapolation between MM steps.
    #[arg(long)]
    accelerate: bool,
}

fn design_config(a: &DesignArgs) -> CliResult<DesignConfig> {
    let mut cfg = match &a.config {
        Some(path) => section(read_config(path)?.design, "design", path)?,
        None => {
            let n = a.n.ok_or_else(|| CliError::Config("--n is required without --config".into()))?;
            let partition = match (a.m, a.m_min, a.m_max) {
                (Some(m), _, _) => PartitionSpec::Uniform { m },
                (None, Some(m_min), Some(m_max)) => PartitionSpec::Random { m_min, m_max },
                _ => return Err(CliError::Config("give --m or --m-min/--m-max".into())),
            };
            DesignConfig::new(n, partition, a.q.unwrap_or(2), a.designer.unwrap_or(Designer::Pecs))
        }
    };
    if a.config.is_some() {
        if let Some(n) = a.n {
            cfg.n = n;
        }
        if let Some(m) = a.m {
            cfg.partition = PartitionSpec::Uniform { m };
        }
        if let (Some(m_min), Some(m_max)) = (a.m_min, a.m_max) {
            cfg.partition = PartitionSpec::Random { m_min, m_max };
        }
        if let Some(q) = a.q {
            cfg.q = q;
        }
        if let Some(d) = a.designer {
            cfg.designer = d;
        }
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
    if let Some(it) = a.iters {
        cfg.stopping = StoppingRule { max_iters: it, ..cfg.stopping };
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.variant {
        cfg.ls_variant = v;
    }
    cfg.accelerate |= a.accelerate;
    cfg.validate()?;
    cfg.build_partition()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
pub struct DesignSummary {
    pub designer: Designer,
    pub n: usize,
    pub blocks: usize,
    pub q: usize,
    pub p: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub fallbacks: usize,
    pub rejected: usize,
    pub degenerate_blocks: usize,
    pub isl_db: f64,
    pub psl_db: f64,
    pub lp: f64,
}

pub fn summarize_run(run: &DesignRun) -> CliResult<DesignSummary> {
    let m = sidelobe_metrics(&autocorr_fft(&run.x), run.config.p)?;
    Ok(DesignSummary {
        designer: run.config.designer,
        n: run.config.n,
        blocks: run.partition.num_blocks(),
        q: run.config.q,
        p: run.config.p,
        iterations: run.iterations,
        stop_reason: run.stop_reason,
        fallbacks: run.fallbacks,
        rejected: run.rejected,
        degenerate_blocks: run.degenerate_blocks,
        isl_db: m.isl_db,
        psl_db: m.psl_db,
        lp: m.lp,
    })
}

pub fn sequence_file(run: &DesignRun) -> SequenceFile {
    SequenceFile::from_sequence(&run.x).with_structure(&run.partition, &run.polys).with_seed(run.config.seed)
}

pub fn design(ctx: &Ctx, a: DesignArgs) -> CliResult<()> {
    let cfg = design_config(&a)?;
    let dir = ctx.dir(&cfg, cfg.seed)?;
    ctx.log.info(&format!("designing N={} with {:?}", cfg.n, cfg.designer));
    let run = designers::design(&cfg)?;
    dir.json("sequence.json", &sequence_file(&run))?;
    dir.csv("trace.csv", &run.trace_csv(ctx.timing))?;
    dir.csv("autocorr.csv", &autocorr_fft(&run.x).to_csv())?;
    let summary = summarize_run(&run)?;
    dir.json("summary.json", &summary)?;
    ctx.log.info(&format!("wrote {}", ctx.out.display()));
    print_summary(&summary)
}

#[derive(Args, Debug)]
pub struct CodesArgs {
    /// frank, p1, px, p2, p4, zadoff, chu or golomb.
    #[arg(long)]
    kind: String,
    /// Length for single-index codes.
    #[arg(long)]
    m: Option<usize>,
    /// Grid size for Frank, P1 and Px (length L^2).
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 1)]
    r: i64,
    #[arg(long, default_value_t = 0)]
    q: i64,
}

fn code_spec(a: &CodesArgs) -> CliResult<CodeSpec> {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| CliError::Config(format!("{} needs --{flag}", a.kind)));
    Ok(match a.kind.as_str() {
        "frank" => CodeSpec::Frank { l: need(a.l, "l")? },
        "p1" => CodeSpec::P1 { l: need(a.l, "l")? },
        "px" => CodeSpec::Px { l: need(a.l, "l")? },
        "p2" => CodeSpec::P2 { m: need(a.m, "m")? },
        "p4" => CodeSpec::P4 { m: need(a.m, "m")? },
        "zadoff" => CodeSpec::Zadoff { m: need(a.m, "m")?, r: a.r, q: a.q },
        "chu" => CodeSpec::chu(need(a.m, "m")?),
        "golomb" => CodeSpec::Golomb { m: need(a.m, "m")?, r: a.r },
        k => return Err(CliError::Config(format!("unknown code kind {k:?}"))),
    })
}

pub fn codes(ctx: &Ctx, a: CodesArgs) -> CliResult<()> {
    let spec = code_spec(&a)?;
    let x = generate(&spec)?;
    let dir = ctx.dir(&spec, 0)?;
    let r = autocorr_fft(&x);
    let m = sidelobe_metrics(&r, 2.0)?;
    dir.json("sequence.json", &SequenceFile::from_sequence(&x))?;
    dir.csv("autocorr.csv", &r.to_csv())?;
    let summary = json!({ "code": spec, "n": x.len(), "isl_db": m.isl_db, "psl_db": m.psl_db });
    dir.json("summary.json", &summary)?;
    print_summary(&summary)
}

fn load_sequence(path: &Path) -> CliResult<(UnimodularSequence, u64)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: SequenceFile = serde_json::from_str(&text)?;
    Ok((file.sequence()?, file.seed.unwrap_or(0)))
}

#[derive(Args, Debug)]
pub struct AfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = -0.05, allow_hyphen_values = true)]
    doppler_min: f64,
    #[arg(long, default_value_t = 0.05)]
    doppler_max: f64,
    #[arg(long, default_value_t = 40)]
    steps: usize,
}

pub fn analyze_af(ctx: &Ctx, a: AfArgs) -> CliResult<()> {
    let (x, seed) = load_sequence(&a.input)?;
    if !(a.doppler_min < a.doppler_max) {
        return Err(CliError::Config("--doppler-min must be below --doppler-max".into()));
    }
    let key = json!({ "phases_rad": x.phases(), "doppler_min": a.doppler_min, "doppler_max": a.doppler_max, "steps": a.steps });
    let dir = ctx.dir(&key, seed)?;
    let af = ambiguity(&x, &grid(a.doppler_min, a.doppler_max, a.steps))?;
    dir.csv("af.csv", &af.to_csv())?;
    let summary = json!({
        "n": x.len(),
        "thumbtack": af.is_thumbtack(),
        "ridge": af.is_ridge(3),
        "peak_outside_db": af.peak_outside_db(1, 1.0 / x.len() as f64),
        "ridge_locus": af.ridge_locus(),
    });
    dir.json("summary.json", &summary)?;
    print_summary(&summary)
}

#[derive(Args, Debug)]
pub struct DopplerArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    nu_max: f64,
    #[arg(long, default_value_t = 10)]
    steps: usize,
}

pub fn analyze_doppler(ctx: &Ctx, a: DopplerArgs) -> CliResult<()> {
    let (x, seed) = load_sequence(&a.input)?;
    let key = json!({ "phases_rad": x.phases(), "nu_max": a.nu_max, "steps": a.steps });
    let dir = ctx.dir(&key, seed)?;
    let prof = doppler_sweep(&x, a.nu_max, a.steps)?;
    dir.csv("doppler.csv", &prof.to_csv())?;
    let summary = json!({
        "n": x.len(),
        "nu_max": a.nu_max,
        "peak_loss_db_at_max": prof.peak_loss_db.last(),
        "worst_peak_loss_db": prof.peak_loss_db.iter().cloned().fold(0.0, f64::max),
    });
    dir.json("summary.json", &summary)?;
    print_summary(&summary)
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// JSON file with an "analysis" section {a, b, trials}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn stats(ctx: &Ctx, a: StatsArgs) -> CliResult<()> {
    let mut cfg = section(read_config(&a.config)?.analysis, "analysis", &a.config)?;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if cfg.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    // validate both generators before the Monte-Carlo loop
    cfg.a.sample(0)?;
    cfg.b.sample(0)?;
    let dir = ctx.dir(&cfg, a.seed)?;
    ctx.log.info(&format!("{} trials", cfg.trials));
    let s = interference_stats(&cfg.a, &cfg.b, cfg.trials, a.seed)?;
    dir.csv("histogram.csv", &s.histogram_csv())?;
    let values: String =
        std::iter::once("trial,value_db\n".to_string()).chain(s.values_db.iter().enumerate().map(|(i, v)| format!("{i},{v:.9}\n"))).collect();
    dir.csv("values.csv", &values)?;
    let summary = json!({ "trials": s.trials, "mean_db": s.mean_db, "center_db": s.center_db });
    dir.json("summary.json", &summary)?;
    print_summary(&summary)
}

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    /// JSON file with a "scenario" section.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    guard_range: usize,
    #[arg(long, default_value_t = 3)]
    guard_doppler: usize,
    /// Also write a spectrogram of the victim's transmit waveform.
    #[arg(long)]
    spectrogram: bool,
}

pub fn scenario(ctx: &Ctx, a: ScenarioArgs) -> CliResult<()> {
    let mut cfg = section(read_config(&a.config)?.scenario, "scenario", &a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let target = cfg.targets.first().cloned().ok_or_else(|| CliError::Config("scenario needs a target".into()))?;
    let dir = ctx.dir(&cfg, cfg.seed)?;
    let map = scenario::run(&cfg)?;
    let cell = cfg.expected_cell(&target);
    let sinr = estimate_sinr(&map, cell, (a.guard_range, a.guard_doppler))?;
    dir.csv("rd_map.csv", &map.to_csv())?;
    if a.spectrogram {
        let w = victim_waveform(&cfg)?;
        dir.csv("spectrogram.csv", &spectrogram(&w, 32, 8)?.to_csv())?;
    }
    let summary = json!({
        "sinr_db": sinr,
        "expected_cell": cell,
        "peak_cell": map.peak_cell(),
        "range_resolution_m": cfg.range_resolution_m(),
        "guard": [a.guard_range, a.guard_doppler],
        "processing": map.processing,
    });
    dir.json("summary.json", &summary)?;
    print_summary(&summary)
}

/// One pulse of the victim's transmit signal at the chip rate (PMCW) or at
/// the sweep bandwidth (FMCW).
pub fn victim_waveform(cfg: &ScenarioConfig) -> CliResult<Vec<num_complex::Complex64>> {
    Ok(match cfg.victim {
        VictimWaveform::Fmcw => scenario::fmcw_tx_waveform(cfg, cfg.bandwidth_hz),
        VictimWaveform::Pmcw { .. } => cfg.victim_code()?.samples(),
    })
}
