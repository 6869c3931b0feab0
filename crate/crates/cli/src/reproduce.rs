//! Desk-scale re-runs of the published experiments. Each id writes plot-ready
//! CSVs, a summary.json with the trend checks, and a README.md listing how
//! the run differs from the full-scale one.

use std::fmt::Write as _;
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use pecs_core::analysis::{ambiguity, doppler_sweep, grid, interference_stats, GeneratorSpec};
use pecs_core::codes::{generate, CodeSpec};
use pecs_core::designers::{design, design_from, Designer, DesignConfig, DesignRun, PartitionSpec};
use pecs_core::metrics::autocorr_fft;
use pecs_core::mm_engine::StoppingRule;
use pecs_core::scenario::{
    self, estimate_sinr, spectrogram, Interferer, InterfererWaveform, ScenarioConfig, VictimWaveform,
};
use pecs_core::seqcore::{random_unimodular, unwrap_phase, UnimodularSequence};

use crate::commands::{summarize_run, Ctx};
use crate::output::{CliResult, OutDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig3,
    Fig4,
    Fig5,
    Fig8,
    Fig9,
    Fig10,
    Table2,
    Table3,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    id: Experiment,
    /// Iteration budget per designer run (experiment-specific default).
    #[arg(long)]
    iters: Option<usize>,
    /// Monte-Carlo trials (fig10).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct Key {
    experiment: Experiment,
    iters: usize,
    trials: Option<usize>,
    seed: u64,
}

pub fn run(ctx: &Ctx, a: ReproduceArgs) -> CliResult<()> {
    let iters = a.iters.unwrap_or(match a.id {
        Experiment::Fig3 => 20_000,
        Experiment::Fig4 => 5_000,
        Experiment::Fig5 | Experiment::Table2 => 2_000,
        Experiment::Fig8 => 100_000,
        Experiment::Fig9 | Experiment::Fig10 => 100,
        Experiment::Table3 => 200,
    });
    let trials = (a.id == Experiment::Fig10).then(|| a.trials.unwrap_or(1000));
    let dir = ctx.dir(&Key { experiment: a.id, iters, trials, seed: a.seed }, a.seed)?;
    ctx.log.info(&format!("reproducing {:?} ({iters} iterations)", a.id));
    let (summary, notes) = match a.id {
        Experiment::Fig3 => fig3(&dir, iters, a.seed, ctx.timing)?,
        Experiment::Fig4 => fig4(&dir, iters, a.seed)?,
        Experiment::Fig5 => fig5(&dir, iters, a.seed)?,
        Experiment::Fig8 => fig8(&dir, iters, a.seed, ctx.timing)?,
        Experiment::Fig9 => fig9(&dir, iters, a.seed)?,
        Experiment::Fig10 => fig10(&dir, iters, trials.unwrap_or(1000), a.seed)?,
        Experiment::Table2 => table2(&dir, iters, a.seed)?,
        Experiment::Table3 => table3(&dir, iters, a.seed)?,
    };
    dir.json("summary.json", &summary)?;
    let readme = format!(
        "# {:?} at desk scale\n\n{}\nRe-create with `pecs reproduce {} --iters {iters}{} --seed {}`.\n",
        a.id,
        notes,
        serde_json::to_value(a.id)?.as_str().unwrap_or_default(),
        trials.map(|t| format!(" --trials {t}")).unwrap_or_default(),
        a.seed
    );
    dir.write("README.md", &readme)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn pecs(n: usize, partition: PartitionSpec, q: usize, p: f64, iters: usize, seed: u64) -> DesignConfig {
    let mut cfg = DesignConfig::new(n, partition, q, Designer::Pecs);
    cfg.p = p;
    cfg.seed = seed;
    cfg.accelerate = true;
    cfg.stopping = StoppingRule::iterations(iters);
    cfg
}

fn phase_csv(x: &UnimodularSequence) -> String {
    let mut s = String::from("m,phase_rad\n");
    for (i, v) in unwrap_phase(x).iter().enumerate() {
        let _ = writeln!(s, "{},{v:.12}", i + 1);
    }
    s
}

fn non_increasing(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn p_label(p: f64) -> String {
    format!("{p}")
}

fn fig3(dir: &OutDir, iters: usize, seed: u64, timing: bool) -> CliResult<(Value, String)> {
    let mut rows = Vec::new();
    for p in [2.0, 5.0, 10.0, 100.0, 1000.0] {
        let run = design(&pecs(300, PartitionSpec::Uniform { m: 5 }, 2, p, iters, seed))?;
        dir.csv(&format!("trace_p{}.csv", p_label(p)), &run.trace_csv(timing))?;
        dir.csv(&format!("autocorr_p{}.csv", p_label(p)), &autocorr_fft(&run.x).to_csv())?;
        rows.push(summarize_run(&run)?);
    }
    let psl_2 = rows[0].psl_db;
    let psl_1000 = rows[4].psl_db;
    let summary = json!({ "runs": rows, "psl_p1000_le_p2": psl_1000 <= psl_2 });
    let notes = "N=300, M=5, Q=2, p in {2, 5, 10, 100, 1000}. The full-scale runs use 1e6 plain MM iterations; \
        here every run uses squared extrapolation and the iteration budget above, so traces are shorter \
        and each recorded iteration covers several MM steps.\n";
    Ok((summary, notes.into()))
}

fn fig4(dir: &OutDir, iters: usize, seed: u64) -> CliResult<(Value, String)> {
    let base = pecs(300, PartitionSpec::Uniform { m: 5 }, 2, 2.0, iters, seed);
    let part = base.build_partition()?;
    let init = base.initial_polys(&part);
    let mut csv = String::from("p,q,isl_db,psl_db\n");
    let mut checks = serde_json::Map::new();
    for p in [2.0, 5.0, 10.0, 100.0, 1000.0] {
        let (mut isl, mut psl) = (Vec::new(), Vec::new());
        for q in 2..=6 {
            let mut cfg = base.clone();
            cfg.p = p;
            cfg.q = q;
            let run = design_from(&cfg, &part, init.with_degree(q)?, &mut |_| {})?;
            let s = summarize_run(&run)?;
            let _ = writeln!(csv, "{p},{q},{:.6},{:.6}", s.isl_db, s.psl_db);
            isl.push(s.isl_db);
            psl.push(s.psl_db);
        }
        checks.insert(
            p_label(p),
            json!({ "isl_non_increasing": non_increasing(&isl, 0.3), "psl_non_increasing": non_increasing(&psl, 0.3) }),
        );
    }
    dir.csv("isl_psl_vs_q.csv", &csv)?;
    let notes = "N=300, M=5, Q=2..6 from one seeded initialization (degree padded with zeros). \
        Trend flags allow 0.3 dB of noise. With M=5 a degree of 4 already interpolates every block, \
        so Q=5 and Q=6 repeat the Q=4 result.\n";
    Ok((json!({ "trend": checks }), notes.into()))
}

fn fig5(dir: &OutDir, iters: usize, seed: u64) -> CliResult<(Value, String)> {
    let mut seqs: Vec<(String, UnimodularSequence)> = vec![
        ("golomb".into(), generate(&CodeSpec::Golomb { m: 100, r: 1 })?),
        ("frank".into(), generate(&CodeSpec::Frank { l: 10 })?),
        ("random".into(), random_unimodular(100, seed)?),
    ];
    for m in [100, 50, 25, 10, 5] {
        let run = design(&pecs(100, PartitionSpec::Uniform { m }, 2, 10.0, iters, seed))?;
        seqs.push((format!("pecs_m{m}"), run.x));
    }
    let mut at_max = serde_json::Map::new();
    for (name, x) in &seqs {
        let prof = doppler_sweep(x, 0.01, 20)?;
        dir.csv(&format!("doppler_{name}.csv"), &prof.to_csv())?;
        at_max.insert(name.clone(), json!(prof.peak_loss_db.last()));
    }
    let mut mean = doppler_sweep(&random_unimodular(100, seed)?, 0.01, 20)?;
    for s in 1..20 {
        let prof = doppler_sweep(&random_unimodular(100, seed + s)?, 0.01, 20)?;
        for (m, v) in mean.peak_loss_db.iter_mut().zip(&prof.peak_loss_db) {
            *m += v;
        }
        for (m, v) in mean.pslr_db.iter_mut().zip(&prof.pslr_db) {
            *m += v;
        }
        for (m, v) in mean.islr_db.iter_mut().zip(&prof.islr_db) {
            *m += v;
        }
    }
    for v in mean.peak_loss_db.iter_mut().chain(&mut mean.pslr_db).chain(&mut mean.islr_db) {
        *v /= 20.0;
    }
    dir.csv("doppler_random_mean.csv", &mean.to_csv())?;
    at_max.insert("random_mean".into(), json!(mean.peak_loss_db.last()));
    let notes = "N=100 over normalized Doppler 0..0.01 in 20 steps. PECS runs use Q=2, p=10 with squared \
        extrapolation. A single random draw varies by more than 1 dB; random_mean averages the dB curves of \
        20 seeded draws.\n";
    Ok((json!({ "peak_loss_db_at_0.01": at_max }), notes.into()))
}

fn fig8(dir: &OutDir, iters: usize, seed: u64, timing: bool) -> CliResult<(Value, String)> {
    let mut best: Option<DesignRun> = None;
    let mut runs = Vec::new();
    for s in 0..5 {
        let mut cfg = pecs(128, PartitionSpec::Uniform { m: 8 }, 1, 3.0, iters, seed + s);
        cfg.accelerate = false;
        let run = design(&cfg)?;
        let sum = summarize_run(&run)?;
        if best.as_ref().map_or(true, |b| run.final_objective() < b.final_objective()) {
            best = Some(run);
        }
        runs.push(sum);
    }
    let best = best.expect("five runs");
    dir.csv("autocorr.csv", &autocorr_fft(&best.x).to_csv())?;
    dir.csv("phase.csv", &phase_csv(&best.x))?;
    dir.csv("trace.csv", &best.trace_csv(timing))?;
    let isl = runs.iter().map(|r| r.isl_db).fold(f64::INFINITY, f64::min);
    let psl = runs.iter().map(|r| r.psl_db).fold(f64::INFINITY, f64::min);
    let summary = json!({ "runs": runs, "best_isl_db": isl, "best_psl_db": psl, "reference_isl_db": 32.87, "reference_psl_db": 9.09 });
    let notes = "N=128, M=8 (L=16), Q=1 against the published linear-phase figures (32.87 dB ISL, 9.09 dB PSL). \
        The norm order for this comparison is not given; p=3 is used. Five seeds, best per metric; CSVs are \
        for the run with the lowest objective.\n";
    Ok((summary, notes.into()))
}

/// Desk-scale interferer at 50 m closing at 40 km/h.
pub fn interferer(waveform: InterfererWaveform, start_offset_s: Option<f64>, prf_hz: Option<f64>) -> Interferer {
    Interferer { range_m: 50.0, speed_mps: 40.0 / 3.6, waveform, start_offset_s, prf_hz }
}

fn fig9(dir: &OutDir, iters: usize, seed: u64) -> CliResult<(Value, String)> {
    let mut code_cfg = pecs(450, PartitionSpec::Random { m_min: 5, m_max: 20 }, 3, 10.0, iters, seed);
    code_cfg.seed = seed;
    let code = GeneratorSpec::Design { config: code_cfg };
    let mut fm = ScenarioConfig::desk(VictimWaveform::Fmcw);
    fm.seed = seed;
    let mut pm = ScenarioConfig::desk(VictimWaveform::Pmcw { code: code.clone() });
    pm.seed = seed;
    let offset = Some(0.8e-6);
    let mut cases: Vec<(String, ScenarioConfig)> = vec![("fmcw_clean".into(), fm.clone())];
    for (name, bw) in [("fmcw_sweeping", 7.5e6), ("fmcw_similar", 14.85e6)] {
        let mut c = fm.clone();
        c.interferers = vec![interferer(InterfererWaveform::Fmcw { bandwidth_hz: bw }, offset, None)];
        cases.push((name.into(), c));
    }
    cases.push(("pmcw_clean".into(), pm.clone()));
    for k in [1usize, 5, 10] {
        let mut c = pm.clone();
        c.interferers = (0..k)
            .map(|i| {
                let prf = pm.prf_hz * (1.0 + 0.003 * (i + 1) as f64);
                interferer(InterfererWaveform::Pmcw { code: code.clone() }, None, Some(prf))
            })
            .collect();
        cases.push((format!("pmcw_{k}"), c));
    }
    let mut csv = String::from("case,sinr_db\n");
    let mut sinr = serde_json::Map::new();
    for (name, cfg) in &cases {
        let map = scenario::run(cfg)?;
        let v = estimate_sinr(&map, cfg.expected_cell(&cfg.targets[0]), (2, 3))?;
        dir.csv(&format!("rd_{name}.csv"), &map.to_csv())?;
        let _ = writeln!(csv, "{name},{v:.4}");
        sinr.insert(name.clone(), json!(v));
    }
    dir.csv("sinr.csv", &csv)?;
    let chirp = scenario::fmcw_tx_waveform(&fm, fm.bandwidth_hz);
    dir.csv("spectrogram_fmcw.csv", &spectrogram(&chirp, 32, 8)?.to_csv())?;
    dir.csv("spectrogram_pmcw.csv", &spectrogram(&pm.victim_code()?.samples(), 32, 8)?.to_csv())?;
    let notes = "Bandwidth, code length and IF rate are one tenth of the full-scale profile; 64 pulses instead of 256. \
        The range map covers 300 m. FMCW interferers share the victim PRF and start 0.8 us after it, which \
        puts the similar-slope ghost inside the range window; no PRF dithering is applied. PMCW interferers \
        run free with PRFs 0.3 % apart. Absolute SINR values are not comparable with the full-scale figures; \
        the orderings are.\n";
    Ok((json!({ "sinr_db": sinr }), notes.into()))
}

fn fig10(dir: &OutDir, iters: usize, trials: usize, seed: u64) -> CliResult<(Value, String)> {
    let fixed = GeneratorSpec::Design { config: pecs(100, PartitionSpec::Uniform { m: 10 }, 3, 10.0, iters, 0) };
    let random_m =
        GeneratorSpec::Design { config: pecs(100, PartitionSpec::Random { m_min: 5, m_max: 20 }, 3, 10.0, iters, 0) };
    let chirp = |rate| GeneratorSpec::Chirp { n: 100, rate };
    let pops: Vec<(&str, GeneratorSpec, GeneratorSpec)> = vec![
        ("pecs_m10", fixed.clone(), fixed),
        ("pecs_random_m", random_m.clone(), random_m),
        ("random", GeneratorSpec::Random { n: 100 }, GeneratorSpec::Random { n: 100 }),
        ("chirp_similar", chirp(1.0), chirp(1.0)),
        ("chirp_0.99", chirp(1.0), chirp(0.99)),
        ("chirp_sweeping", chirp(1.0), chirp(0.5)),
    ];
    let mut centers = serde_json::Map::new();
    for (name, a, b) in &pops {
        let s = interference_stats(a, b, trials, seed)?;
        dir.csv(&format!("histogram_{name}.csv"), &s.histogram_csv())?;
        centers.insert(name.to_string(), json!({ "center_db": s.center_db, "mean_db": s.mean_db }));
    }
    let notes = "N=100, peak cross-correlation max|c_k|/N in dB, 0.25 dB bins. PECS populations use Q=3, p=10 \
        and 100 extrapolated iterations per sequence to keep the run short. chirp_similar pairs share the \
        quadratic coefficient and differ in start phase; chirp_0.99 uses a 0.99 slope ratio.\n";
    Ok((json!({ "populations": centers }), notes.into()))
}

fn table2(dir: &OutDir, iters: usize, seed: u64) -> CliResult<(Value, String)> {
    let mut flags = Vec::new();
    let dopplers = grid(-0.05, 0.05, 40);
    for m in [5usize, 50, 150, 300] {
        for p in [2.0, 10.0, 100.0] {
            let run = design(&pecs(300, PartitionSpec::Uniform { m }, 2, p, iters, seed))?;
            let af = ambiguity(&run.x, &dopplers)?;
            let tag = format!("m{m}_p{}", p_label(p));
            dir.csv(&format!("af_{tag}.csv"), &af.to_csv())?;
            dir.csv(&format!("phase_{tag}.csv"), &phase_csv(&run.x))?;
            flags.push(json!({ "m": m, "p": p, "thumbtack": af.is_thumbtack(), "ridge": af.is_ridge(3) }));
        }
    }
    let notes = "N=300, Q=2, M in {5, 50, 150, 300}, p in {2, 10, 100}; AF over normalized Doppler -0.05..0.05.\n";
    Ok((json!({ "shapes": flags }), notes.into()))
}

fn table3(dir: &OutDir, iters: usize, seed: u64) -> CliResult<(Value, String)> {
    let mut csv = String::from("m,q,iterations,ms_per_iter\n");
    let mut grid_ms: Vec<Vec<f64>> = Vec::new();
    for m in [5usize, 50, 150, 300] {
        let mut row = Vec::new();
        for q in 2..=6 {
            let mut cfg = pecs(300, PartitionSpec::Uniform { m }, q, 2.0, iters, seed);
            cfg.accelerate = false;
            cfg.stopping.rel_obj_tol = 0.0;
            let t = Instant::now();
            let run = design(&cfg)?;
            let ms = t.elapsed().as_secs_f64() * 1e3 / run.iterations.max(1) as f64;
            let _ = writeln!(csv, "{m},{q},{},{ms:.4}", run.iterations);
            row.push(ms);
        }
        grid_ms.push(row);
    }
    dir.csv("runtime.csv", &csv)?;
    let q_trend = grid_ms.iter().all(|r| non_increasing(&r.iter().rev().cloned().collect::<Vec<_>>(), 0.0));
    let m_trend = (0..5).all(|j| non_increasing(&grid_ms.iter().map(|r| r[j]).collect::<Vec<_>>(), 0.0));
    let notes = "Wall-clock milliseconds per plain MM iteration, N=300, p=2. Timings depend on the machine and \
        load, so this artifact is the one output that is not byte-reproducible.\n";
    Ok((json!({ "time_grows_with_q": q_trend, "time_falls_with_m": m_trend }), notes.into()))
}
