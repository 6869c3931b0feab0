//! One test per acceptance criterion. Each prints a PASS/FAIL line on stderr
//! (outside the test harness capture) before asserting.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pecs_core::analysis::{ambiguity, doppler_sweep, grid, interference_stats, GeneratorSpec};
use pecs_core::codes::{generate, CodeSpec};
use pecs_core::designers::{design, design_from, DesignConfig, DesignRun, Designer, PartitionSpec};
use pecs_core::metrics::{autocorr_direct, autocorr_fft, lp_norm, sidelobe_metrics, Correlator, CorrelationProfile};
use pecs_core::mm_engine::{majorizer_coeffs, majorizer_gaps, majorizer_params, StoppingRule};
use pecs_core::scenario::{
    estimate_sinr, run, Interferer, InterfererWaveform, ScenarioConfig, VictimWaveform,
};
use pecs_core::seqcore::{polynomial_phase_residual, random_unimodular};

fn report(id: u32, name: &str, pass: bool, detail: &str, start: Instant) {
    let line = format!(
        "criterion {id:>2} {name:<28} {} ({:.1} s) {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn pecs(n: usize, partition: PartitionSpec, q: usize, p: f64, iters: usize, seed: u64) -> DesignConfig {
    let mut cfg = DesignConfig::new(n, partition, q, Designer::Pecs);
    cfg.p = p;
    cfg.seed = seed;
    cfg.accelerate = true;
    cfg.stopping = StoppingRule::iterations(iters);
    cfg
}

fn isl_psl(run: &DesignRun) -> (f64, f64) {
    let m = sidelobe_metrics(&autocorr_fft(&run.x), 2.0).unwrap();
    (m.isl_db, m.psl_db)
}

#[test]
fn c01_fft_matches_direct_autocorrelation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut pass = true;
    for i in 0..200 {
        let n = rng.random_range(4..=512);
        let x = random_unimodular(n, i).unwrap();
        let (a, b) = (autocorr_fft(&x), autocorr_direct(&x));
        let err = a.lags().iter().zip(b.lags()).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        worst = worst.max(err / n as f64);
        pass &= err < 1e-9 * n as f64;
    }
    pass &= start.elapsed().as_secs() < 10;
    report(1, "oracle equivalence", pass, &format!("max err/N {worst:.2e}"), start);
}

fn random_configs(count: usize) -> Vec<DesignConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..count)
        .map(|i| {
            let n = rng.random_range(8..=128);
            let m = rng.random_range(4..=n);
            let q = rng.random_range(1..=4);
            let p = [2.0, 10.0, 100.0][rng.random_range(0..3)];
            let designer = if i % 2 == 0 { Designer::Pecs } else { Designer::MislPecs };
            let mut cfg = DesignConfig::new(n, PartitionSpec::Uniform { m }, q, designer);
            cfg.p = p;
            cfg.seed = 100 + i as u64;
            cfg.stopping = StoppingRule { rel_obj_tol: 0.0, abs_phase_tol: 0.0, ..StoppingRule::iterations(2000) };
            cfg
        })
        .collect()
}

#[test]
fn c02_mm_descent() {
    let start = Instant::now();
    let mut bad = Vec::new();
    for cfg in random_configs(20) {
        let h = design(&cfg).unwrap().objective_history();
        let ok = h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-7));
        if !ok {
            bad.push(format!("{:?} N={} p={}", cfg.designer, cfg.n, cfg.p));
        }
    }
    let pass = bad.is_empty() && start.elapsed().as_secs() < 120;
    report(2, "MM descent", pass, &format!("20 configs x 2000 iterations, violations {bad:?}"), start);
}

#[test]
fn c03_constraint_preservation() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut samples = 0;
    for cfg in random_configs(20).into_iter().take(10) {
        let part = cfg.build_partition().unwrap();
        let init = cfg.initial_polys(&part);
        design_from(&cfg, &part, init, &mut |v| {
            if v.iter % 100 != 0 {
                return;
            }
            samples += 1;
            let phases = v.x.phases();
            for (s, len) in part.blocks() {
                worst = worst.max(polynomial_phase_residual(&phases[s..s + len], cfg.q));
            }
        })
        .unwrap();
    }
    report(3, "constraint preservation", worst < 1e-8, &format!("{samples} iterates, max residual {worst:.2e}"), start);
}

#[test]
fn c04_golomb_regression() {
    let start = Instant::now();
    let golomb = generate(&CodeSpec::Golomb { m: 64, r: 1 }).unwrap();
    let g = sidelobe_metrics(&autocorr_fft(&golomb), 2.0).unwrap().isl_db;
    let mut cfg = DesignConfig::new(64, PartitionSpec::Uniform { m: 64 }, 2, Designer::MislPecs);
    cfg.stopping = StoppingRule::iterations(100_000);
    let run = design(&cfg).unwrap();
    let (isl, _) = isl_psl(&run);
    let pass = (g - 22.05).abs() <= 0.01 && isl <= 22.05 && start.elapsed().as_secs() < 60;
    report(
        4,
        "Golomb regression",
        pass,
        &format!("Golomb ISL {g:.4} dB, MISL-PECS ISL {isl:.4} dB after {} iterations", run.iterations),
        start,
    );
}

#[test]
fn c05_linear_phase_comparison() {
    let start = Instant::now();
    let (mut isl, mut psl) = (f64::INFINITY, f64::INFINITY);
    for seed in 0..5 {
        let mut cfg = pecs(128, PartitionSpec::Uniform { m: 8 }, 1, 3.0, 100_000, seed);
        cfg.accelerate = false;
        let (i, p) = isl_psl(&design(&cfg).unwrap());
        isl = isl.min(i);
        psl = psl.min(p);
    }
    let pass = isl <= 34.0 && psl <= 10.5 && start.elapsed().as_secs() < 120;
    report(5, "linear-phase comparison", pass, &format!("best ISL {isl:.3} dB, best PSL {psl:.3} dB"), start);
}

#[test]
fn c06_lp_to_psl() {
    let start = Instant::now();
    let psl = |p| isl_psl(&design(&pecs(300, PartitionSpec::Uniform { m: 5 }, 2, p, 10_000, 0)).unwrap()).1;
    let (p2, p1000) = (psl(2.0), psl(1000.0));
    report(6, "lp to PSL ordering", p1000 <= p2, &format!("PSL p=1000 {p1000:.3} dB, p=2 {p2:.3} dB"), start);
}

#[test]
fn c07_q_trend() {
    let start = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for (p, iters) in [(2.0, 10_000), (10.0, 5_000)] {
        let base = pecs(300, PartitionSpec::Uniform { m: 5 }, 2, p, iters, 0);
        let part = base.build_partition().unwrap();
        let init = base.initial_polys(&part);
        let (mut isl, mut psl) = (Vec::new(), Vec::new());
        for q in 2..=6 {
            let cfg = DesignConfig { q, ..base.clone() };
            let (i, s) = isl_psl(&design_from(&cfg, &part, init.with_degree(q).unwrap(), &mut |_| {}).unwrap());
            isl.push(i);
            psl.push(s);
        }
        let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 0.3);
        pass &= mono(&isl) && mono(&psl);
        detail += &format!("p={p}: ISL {isl:.2?} PSL {psl:.2?}; ");
    }
    report(7, "Q trend", pass, &detail, start);
}

#[test]
fn c08_af_shape() {
    let start = Instant::now();
    let dopplers = grid(-0.05, 0.05, 40);
    let af = |m| {
        let run = design(&pecs(300, PartitionSpec::Uniform { m }, 2, 10.0, 2000, 0)).unwrap();
        ambiguity(&run.x, &dopplers).unwrap()
    };
    let (short, long) = (af(5), af(300));
    let pass = short.is_thumbtack() && long.is_ridge(3) && start.elapsed().as_secs() < 180;
    report(
        8,
        "AF shape",
        pass,
        &format!(
            "M=5 thumbtack {} (outside peak {:.2} dB), M=300 ridge {}",
            short.is_thumbtack(),
            short.peak_outside_db(1, 0.0),
            long.is_ridge(3)
        ),
        start,
    );
}

#[test]
fn c09_doppler_tolerance() {
    let start = Instant::now();
    let loss = |x| doppler_sweep(&x, 0.01, 20).unwrap().peak_loss_db;
    let pecs_m = |m| loss(design(&pecs(100, PartitionSpec::Uniform { m }, 2, 10.0, 2000, 0)).unwrap().x);
    let golomb = loss(generate(&CodeSpec::Golomb { m: 100, r: 1 }).unwrap());
    // expected curve of a random sequence: mean over 20 seeded draws
    let mut random = vec![0.0; 21];
    for seed in 0..20 {
        for (m, v) in random.iter_mut().zip(loss(random_unimodular(100, seed).unwrap())) {
            *m += v / 20.0;
        }
    }
    let (long, short) = (pecs_m(100), pecs_m(5));
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let (g1, g2) = (gap(&long, &golomb), gap(&short, &random));
    let (r, g) = (*random.last().unwrap(), *golomb.last().unwrap());
    let pass = g1 <= 1.0 && g2 <= 2.0 && r > g;
    report(
        9,
        "Doppler tolerance",
        pass,
        &format!("|PECS100-Golomb| {g1:.3} dB, |PECS5-random mean| {g2:.3} dB, loss at 0.01 random mean {r:.2} vs Golomb {g:.2} dB"),
        start,
    );
}

#[test]
fn c10_interference_statistics() {
    let start = Instant::now();
    let pecs_pop =
        GeneratorSpec::Design { config: pecs(100, PartitionSpec::Random { m_min: 5, m_max: 20 }, 3, 10.0, 100, 0) };
    let chirp = GeneratorSpec::Chirp { n: 100, rate: 1.0 };
    let a = interference_stats(&pecs_pop, &pecs_pop, 1000, 0).unwrap();
    let b = interference_stats(&chirp, &chirp, 1000, 0).unwrap();
    let pass = a.center_db <= -10.0 && b.center_db - a.center_db >= 10.0 && start.elapsed().as_secs() < 120;
    report(
        10,
        "interference statistics",
        pass,
        &format!("PECS center {:.2} dB, similar-slope chirp center {:.2} dB", a.center_db, b.center_db),
        start,
    );
}

fn interferer(waveform: InterfererWaveform, start_offset_s: Option<f64>, prf_hz: Option<f64>) -> Interferer {
    Interferer { range_m: 50.0, speed_mps: 40.0 / 3.6, waveform, start_offset_s, prf_hz }
}

#[test]
fn c11_scenario() {
    let start = Instant::now();
    let code = GeneratorSpec::Design { config: pecs(450, PartitionSpec::Random { m_min: 5, m_max: 20 }, 3, 10.0, 100, 0) };
    let fm = ScenarioConfig::desk(VictimWaveform::Fmcw);
    let pm = ScenarioConfig::desk(VictimWaveform::Pmcw { code: code.clone() });
    let cell = pm.expected_cell(&pm.targets[0]);
    let sinr = |cfg: &ScenarioConfig| {
        let map = run(cfg).unwrap();
        (estimate_sinr(&map, cfg.expected_cell(&cfg.targets[0]), (2, 3)).unwrap(), map.peak_cell())
    };
    let fmcw_with = |bw| ScenarioConfig {
        interferers: vec![interferer(InterfererWaveform::Fmcw { bandwidth_hz: bw }, Some(0.8e-6), None)],
        ..fm.clone()
    };
    let pmcw_with = |k: usize| ScenarioConfig {
        interferers: (0..k)
            .map(|i| {
                let prf = pm.prf_hz * (1.0 + 0.003 * (i + 1) as f64);
                interferer(InterfererWaveform::Pmcw { code: code.clone() }, None, Some(prf))
            })
            .collect(),
        ..pm.clone()
    };
    let (pm_clean, peak) = sinr(&pm);
    let (fm_clean, _) = sinr(&fm);
    let (fm_sweep, _) = sinr(&fmcw_with(7.5e6));
    let (fm_similar, _) = sinr(&fmcw_with(14.85e6));
    let pm_k: Vec<f64> = [1, 5, 10].iter().map(|&k| sinr(&pmcw_with(k)).0).collect();
    let pass = peak == cell
        && pm_k[0] - fm_similar >= 3.0
        && pm_k.windows(2).all(|w| w[1] <= w[0])
        && fm_clean > fm_sweep
        && fm_sweep > fm_similar
        && start.elapsed().as_secs() < 300;
    report(
        11,
        "scenario",
        pass,
        &format!(
            "PMCW clean peak {peak:?} (true {cell:?}, {pm_clean:.1} dB); FMCW clean/sweeping/similar {fm_clean:.2}/{fm_sweep:.2}/{fm_similar:.2} dB; PMCW 1/5/10 {pm_k:.2?} dB"
        ),
        start,
    );
}

/// `s^p` majorizer touching at `s0`, from its defining conditions:
/// equal value and slope at `s0` and equal value at `t`.
fn oracle_gap(s0: f64, s: f64, t: f64, p: f64) -> f64 {
    let a = (t.powf(p) - s0.powf(p) - p * s0.powf(p - 1.0) * (t - s0)) / ((t - s0) * (t - s0));
    let b = p * s0.powf(p - 1.0) - 2.0 * a * s0;
    let c = s0.powf(p) - a * s0 * s0 - b * s0;
    (a * s * s + b * s + c - s.powf(p)) / t.powf(p)
}

#[test]
fn c12_majorizer_audit() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut dominated, mut touching, mut beta_ok, mut agree) = (true, true, true, 0.0f64);
    for i in 0..1000 {
        let n = rng.random_range(4..64);
        let p = [2.0, 4.0, 10.0, 100.0, 1000.0][i % 5];
        let x = random_unimodular(n, i as u64).unwrap();
        let r_prev = autocorr_fft(&x);
        let prev: Vec<f64> = r_prev.sidelobe_magnitudes().collect();
        let t = lp_norm(&prev, p);
        let test: Vec<Complex64> = (0..n)
            .map(|k| {
                if k == 0 {
                    r_prev.lags()[0]
                } else {
                    Complex64::from_polar(t * rng.random_range(0.0..=1.0f64), rng.random_range(0.0..6.3))
                }
            })
            .collect();
        let r_test = CorrelationProfile::new(test).unwrap();
        let gaps = majorizer_gaps(&r_prev, &r_test, p).unwrap();
        dominated &= gaps.iter().all(|&g| g >= -1e-12);
        touching &= majorizer_gaps(&r_prev, &r_prev, p).unwrap().iter().all(|g| g.abs() <= 1e-9);
        for ((&s0, s), g) in prev.iter().zip(r_test.sidelobe_magnitudes()).zip(&gaps) {
            if t - s0 > 1e-3 * t {
                agree = agree.max((oracle_gap(s0, s, t, p) - g).abs());
            }
        }
        let params = majorizer_params(&Correlator::new(n), &x, p).unwrap().unwrap();
        beta_ok &= params.beta.iter().all(|&b| b <= 0.0);
        beta_ok &= majorizer_coeffs(rng.random_range(0.0..=1.0), p).1 <= 0.0;
    }
    let pass = dominated && touching && beta_ok && agree < 1e-6;
    report(
        12,
        "majorizer audit",
        pass,
        &format!("dominated {dominated}, touching {touching}, beta<=0 {beta_ok}, oracle gap diff {agree:.1e}"),
        start,
    );
}

fn pecs_bin(out: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_pecs"))
        .arg("--quiet")
        .arg("--out")
        .arg(out)
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "pecs {args:?} exited with {status}");
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(snapshot(&path));
        } else {
            files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
        }
    }
    files
}

#[test]
fn c13_cli_determinism() {
    let start = Instant::now();
    let root = std::env::temp_dir().join(format!("pecs-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&root);
    fs::create_dir_all(&root).unwrap();
    let config = root.join("config.json");
    let scen = ScenarioConfig {
        interferers: vec![interferer(InterfererWaveform::Fmcw { bandwidth_hz: 7.5e6 }, None, None)],
        ..ScenarioConfig::desk(VictimWaveform::Fmcw)
    };
    let text = serde_json::json!({
        "design": pecs(64, PartitionSpec::Random { m_min: 4, m_max: 12 }, 2, 4.0, 200, 3),
        "analysis": { "a": { "kind": "random", "n": 64 }, "b": { "kind": "chirp", "n": 64, "rate": 1.0 }, "trials": 50 },
        "scenario": scen,
    });
    fs::write(&config, text.to_string()).unwrap();
    let cfg = config.to_str().unwrap();
    let seq = root.join("seq.json");
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("design", vec!["design", "--config", cfg]),
        ("design-flags", vec!["design", "--designer", "misl-pecs", "--n", "48", "--m", "8", "--iters", "100", "--seed", "1"]),
        ("codes", vec!["codes", "gen", "--kind", "p4", "--m", "64"]),
        ("stats", vec!["stats", "--config", cfg, "--seed", "4"]),
        ("scenario", vec!["scenario", "--config", cfg, "--spectrogram"]),
        ("fig3", vec!["reproduce", "fig3", "--iters", "20"]),
        ("fig4", vec!["reproduce", "fig4", "--iters", "20"]),
        ("fig5", vec!["reproduce", "fig5", "--iters", "20"]),
        ("fig8", vec!["reproduce", "fig8", "--iters", "50"]),
        ("fig9", vec!["reproduce", "fig9", "--iters", "20"]),
        ("fig10", vec!["reproduce", "fig10", "--iters", "5", "--trials", "20"]),
        ("table2", vec!["reproduce", "table2", "--iters", "20"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in &commands {
        let (a, b) = (root.join(format!("{name}-a")), root.join(format!("{name}-b")));
        pecs_bin(&a, args);
        pecs_bin(&b, args);
        if snapshot(&a) != snapshot(&b) || snapshot(&a).is_empty() {
            differing.push(name.to_string());
        }
        if *name == "design" {
            fs::copy(a.join("sequence.json"), &seq).unwrap();
        }
    }
    let s = seq.to_str().unwrap();
    for (name, args) in [
        ("analyze-af", vec!["analyze-af", "--input", s, "--steps", "10"]),
        ("analyze-doppler", vec!["analyze-doppler", "--input", s]),
    ] {
        let (a, b) = (root.join(format!("{name}-a")), root.join(format!("{name}-b")));
        pecs_bin(&a, &args);
        pecs_bin(&b, &args);
        if snapshot(&a) != snapshot(&b) {
            differing.push(name.to_string());
        }
    }
    let _ = fs::remove_dir_all(&root);
    report(
        13,
        "CLI determinism",
        differing.is_empty(),
        &format!("{} commands (table3 exempt: wall times), differing {differing:?}", commands.len() + 2),
        start,
    );
}
