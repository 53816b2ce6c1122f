//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output; exits non-zero if any
//! criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;

use kljn_core::attack::AttackConfig;
use kljn_core::crossing::{direct_conditioned_msq, find_crossings};
use kljn_core::harness::sweep::{mode_grid, DiscrepancyReport};
use kljn_core::harness::targets::paper_row;
use kljn_core::harness::{run_fig2, run_mode_sweep, run_table1, run_table2, ExperimentSpec, OutputFormat};
use kljn_core::noise::{NoiseSpec, Party, Purpose, Role, SimParams, StreamId, Synthesizer};
use kljn_core::schemes::{Arrangement, Scheme, PRESET_NAMES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rel(measured: f64, target: f64) -> f64 {
    (measured - target).abs() / target.abs()
}

fn sweep() -> &'static DiscrepancyReport {
    static REPORT: OnceLock<DiscrepancyReport> = OnceLock::new();
    REPORT.get_or_init(|| run_mode_sweep(&ExperimentSpec::default()).expect("sweep runs"))
}

/// Analytic moments against the printed table.
fn c1_analytic_fidelity() -> Outcome {
    let mut fails = Vec::new();
    let mut worst: f64 = 0.0;
    for name in PRESET_NAMES {
        let s = Scheme::preset(name).map_err(|e| e.to_string())?;
        let row = paper_row(name).ok_or("missing printed row")?;
        for a in Arrangement::BOTH {
            let m = s.moments(a);
            let mut check = |what: &str, got: f64, want: f64, tol: f64| {
                let d = rel(got, want);
                worst = worst.max(d);
                if d > tol {
                    fails.push(format!("{name} {a} {what}: {got:.5e} vs {want:.5e} ({:.1}%)", 100.0 * d));
                }
            };
            check("U²", m.msq_u, row.msq_u, 0.03);
            check("I²", m.msq_i, row.msq_i, 0.03);
            // The printed P_AB column carries one value per scheme, set on
            // the LH line; it is compared with the LH arrangement.
            if row.p_ab != 0.0 && a == Arrangement::Lh {
                check("P_AB", m.p_ab, row.p_ab, 0.03);
            }
        }
    }
    let exact = [("kljn", 0.909, 0.0909e-6), ("fck1", 0.5, 0.005e-6)];
    for (name, u, i) in exact {
        let s = Scheme::preset(name).map_err(|e| e.to_string())?;
        for a in Arrangement::BOTH {
            let m = s.moments(a);
            for (what, got, want) in [("U²", m.msq_u, u), ("I²", m.msq_i, i)] {
                if rel(got, want) > 0.005 {
                    fails.push(format!("{name} {a} exact {what}: {got:.6e} vs {want:.6e}"));
                }
            }
            if m.p_ab.abs() > 1e-15 * (m.msq_u * m.msq_i).sqrt() {
                fails.push(format!("{name} {a} exact P_AB: {:.3e} is not zero", m.p_ab));
            }
        }
    }
    if fails.is_empty() {
        Ok(format!("worst relative deviation {:.2}%", 100.0 * worst))
    } else {
        Err(fails.join("; "))
    }
}

/// Ensemble means within 3 standard errors of analytic values in every cell.
fn c2_monte_carlo_consistency() -> Outcome {
    let r = sweep();
    let mut fails = Vec::new();
    let mut worst = (0.0, String::new());
    for c in &r.cells {
        if c.status != "ok" {
            fails.push(format!("{} @ {} failed", c.scheme, c.label));
            continue;
        }
        for a in &c.arrangements {
            if a.ensemble.n_bits < 1000 {
                fails.push(format!("{} @ {} has only {} bits", c.scheme, c.label, a.ensemble.n_bits));
            }
            for (what, z) in [("U²", a.msq_u_z), ("I²", a.msq_i_z), ("P", a.p_inst_z)] {
                if z > worst.0 {
                    worst = (z, format!("{} {} {} @ {}", c.scheme, a.bit, what, c.label));
                }
                if z > 3.0 {
                    fails.push(format!("{} {} {what} @ {}: z = {z:.2}", c.scheme, a.bit, c.label));
                }
            }
        }
    }
    if fails.is_empty() {
        Ok(format!("{} cells, max z = {:.2} ({})", r.cells.len(), worst.0, worst.1))
    } else {
        Err(fails.join("; "))
    }
}

fn c3_kirchhoff() -> Outcome {
    let worst = sweep().summary.max_kirchhoff_residual;
    if worst <= 1e-12 {
        Ok(format!("max residual {worst:.2e}"))
    } else {
        Err(format!("max residual {worst:.2e} > 1e-12"))
    }
}

/// `<I_w²>` at voltage crossings within 3% of `<I_w²>` and LH/HL KS p > 0.01
/// for KLJN and FCK1 in every cell.
fn c4_zero_power() -> Outcome {
    let mut fails = Vec::new();
    let mut n = 0;
    for c in sweep().cells.iter().filter(|c| c.scheme == "kljn" || c.scheme == "fck1") {
        n += 1;
        let Some(chk) = c.null_checks else {
            fails.push(format!("{} @ {}: no result", c.scheme, c.label));
            continue;
        };
        if !chk.zc_within_tol || !chk.ks_p_above_alpha {
            let zc: Vec<String> =
                c.arrangements.iter().map(|a| format!("{} {:+.1}%", a.bit, 100.0 * a.zc_vs_msq_i)).collect();
            let ks = c.ks_msq_i_zc.map(|k| k.p_value).unwrap_or(f64::NAN);
            fails.push(format!("{} @ {}: zc [{}], KS p {ks:.3}", c.scheme, c.label, zc.join(", ")));
        }
    }
    if fails.is_empty() {
        Ok(format!("{n} cells"))
    } else {
        Err(format!("{} of {n} cells: {}", fails.len(), fails.join("; ")))
    }
}

fn c5_null_attack() -> Outcome {
    let r = sweep();
    if r.metadata.attack.n_eval_bits != 3000 {
        return Err(format!("evaluation used {} bits", r.metadata.attack.n_eval_bits));
    }
    let mut fails = Vec::new();
    let mut extreme: f64 = 0.0;
    let mut n = 0;
    for c in r.cells.iter().filter(|c| c.scheme == "kljn" || c.scheme == "fck1") {
        if c.attacks.len() != 2 {
            fails.push(format!("{} @ {}: missing attack", c.scheme, c.label));
        }
        for a in &c.attacks {
            n += 1;
            extreme = extreme.max((a.p - 0.5).abs());
            if !(0.47..=0.53).contains(&a.p) {
                fails.push(format!("{} @ {} {}: p = {:.4}", c.scheme, c.label, a.direction.as_str(), a.p));
            }
        }
    }
    if fails.is_empty() {
        Ok(format!("{n} attacks, max |p - 0.5| = {extreme:.4}"))
    } else {
        Err(fails.join("; "))
    }
}

fn c6_direct_conditioning() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut fails = Vec::new();
    for rho in [0.0, 0.3, -0.3, 0.6, -0.6, 0.9, -0.9] {
        let msq = 2.5;
        let got = direct_conditioned_msq(rho, msq, 1_000_000, &mut rng).map_err(|e| e.to_string())?;
        let want = msq * (1.0 - rho * rho);
        let d = rel(got, want);
        worst = worst.max(d);
        if d > 0.01 {
            fails.push(format!("rho {rho}: {got:.5} vs {want:.5}"));
        }
    }
    if fails.is_empty() {
        Ok(format!("worst relative deviation {:.3}%", 100.0 * worst))
    } else {
        Err(fails.join("; "))
    }
}

fn c7_rice_rate() -> Outcome {
    let params = SimParams::default();
    let synth = Synthesizer::new(&params).map_err(|e| e.to_string())?;
    let spec = NoiseSpec { mean_square: 1.0, bandwidth: params.bandwidth };
    // Crossings are counted within bits, so each bit spans n - 1 intervals.
    let per_bit = (params.samples_per_bit() - 1) as f64 * params.dt();
    let bits = (100.0 / per_bit).ceil() as u64;
    let mut crossings = 0usize;
    let mut duration = 0.0;
    for bit in 0..bits {
        let w = synth
            .synthesize(&spec, StreamId::new(Purpose::Diagnostic, bit, Party::Alice, Role::Low))
            .map_err(|e| e.to_string())?;
        crossings += find_crossings(&w).len();
        duration += (w.len() - 1) as f64 * w.dt();
    }
    if duration < 100.0 {
        return Err(format!("only {duration:.1} s pooled"));
    }
    let rate = crossings as f64 / duration;
    let target = 2.0 * params.bandwidth / 3f64.sqrt();
    let d = rel(rate, target);
    let line = format!("{rate:.1}/s vs {target:.1}/s over {duration:.1} s ({:+.2}%)", 100.0 * (rate / target - 1.0));
    if d <= 0.03 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("entry").path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("read")))
        .collect();
    files.sort();
    files
}

fn c8_determinism() -> Outcome {
    let base = tempfile::tempdir().map_err(|e| e.to_string())?;
    // Same output path every run, since the echoed config records it.
    let out = base.path().join("out");
    let spec = ExperimentSpec {
        runs: 200,
        attack: AttackConfig { n_calibration_bits: 200, n_eval_bits: 400, ..AttackConfig::default() },
        output_dir: out.clone(),
        formats: vec![OutputFormat::Csv, OutputFormat::Json],
        ..ExperimentSpec::default()
    };
    let mut outputs = Vec::new();
    for workers in [1, 2, 8] {
        if out.exists() {
            std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| e.to_string())?;
        pool.install(|| -> kljn_core::Result<()> {
            spec.echo_config()?;
            run_table1(&spec)?.write(&spec)?;
            run_table2(&spec)?.write(&spec)?;
            run_fig2(&spec)?.write(&spec)?;
            run_mode_sweep(&spec)?.write(&spec)?;
            Ok(())
        })
        .map_err(|e| e.to_string())?;
        outputs.push((workers, read_dir_bytes(&out)));
    }
    let (_, reference) = &outputs[0];
    for (workers, files) in &outputs[1..] {
        if files != reference {
            let names: Vec<&str> =
                files.iter().zip(reference).filter(|(a, b)| a != b).map(|(a, _)| a.0.as_str()).collect();
            return Err(format!("{workers} workers differ from 1 worker in {names:?}"));
        }
    }
    Ok(format!("{} files identical across 1, 2, 8 workers", reference.len()))
}

/// Sweep completeness for the VMG presets, plus criteria 4 and 5 in every cell.
fn c9_sweep_report() -> Outcome {
    let r = sweep();
    let mut problems = Vec::new();
    if r.schema_version.is_empty() {
        problems.push("schema_version missing".to_string());
    }
    let grid = mode_grid();
    let expected = [
        ("vmg1", 0.5872, 0.283e-6, 0.315e-6),
        ("vmg2", 0.7002, 4.309e-6, 4.955e-6),
        ("vmg3", 0.6276, 0.069e-6, 0.079e-6),
    ];
    for mode in &grid {
        for (name, p, zc_lh, zc_hl) in expected {
            let Some(c) = r.cell(name, &mode.label()) else {
                problems.push(format!("{name} @ {} missing", mode.label()));
                continue;
            };
            if c.status != "ok" {
                problems.push(format!("{name} @ {} failed: {:?}", c.label, c.error));
                continue;
            }
            let directions_ok = c.attacks.len() == 2
                && c.attacks[0].direction != c.attacks[1].direction
                && c.attacks
                    .iter()
                    .all(|a| a.paper_p == Some(p) && a.p_deviation.is_some() && a.p.is_finite() && a.sigma.is_finite());
            let zc_ok = c.arrangements.len() == 2
                && c.arrangements.iter().all(|a| {
                    let want = if a.bit == Arrangement::Lh { zc_lh } else { zc_hl };
                    a.paper_msq_i_zc == Some(want) && a.msq_i_zc_deviation.is_some() && a.ensemble.msq_i_zc.n > 0
                });
            if !directions_ok || !zc_ok || c.ks_msq_i_zc.is_none() {
                problems.push(format!("{name} @ {} incomplete", c.label));
            }
        }
    }
    let complete = problems.is_empty() && r.summary.complete;
    let nulls = c4_zero_power().is_ok() && c5_null_attack().is_ok();
    let best: Vec<String> =
        r.summary.best_vmg_matches.iter().map(|b| format!("{} p={:.4} vs {:.4}", b.scheme, b.p, b.paper_p)).collect();
    let line = format!(
        "{} cells, complete {complete}, nulls in every cell {nulls}, best [{}], stretch goal {}",
        r.cells.len(),
        best.join(", "),
        if r.summary.stretch_goal_met { "met" } else { "not met" }
    );
    if complete && nulls {
        Ok(line)
    } else if !problems.is_empty() {
        Err(format!("{line}; {}", problems.join("; ")))
    } else {
        Err(line)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("analytic moment fidelity", c1_analytic_fidelity),
        ("Monte Carlo consistency", c2_monte_carlo_consistency),
        ("Kirchhoff residual", c3_kirchhoff),
        ("zero-power crossing property", c4_zero_power),
        ("null attack", c5_null_attack),
        ("Gaussian conditional oracle", c6_direct_conditioning),
        ("Rice crossing rate", c7_rice_rate),
        ("determinism across workers", c8_determinism),
        ("VMG reproduction sweep report", c9_sweep_report),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
