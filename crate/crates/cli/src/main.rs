use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kljn_core::attack::Direction;
use kljn_core::crossing::SamplingMode;
use kljn_core::harness::{run_fig2, run_mode_sweep, run_table1, run_table2, ExperimentSpec, OutputFormat, Source};
use kljn_core::noise::SynthesisMode;
use kljn_core::schemes::{Arrangement, Scheme};

/// Tolerance on the sample-wise Kirchhoff residual, relative to signal scale.
const KIRCHHOFF_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "kljn-lab", version, about = "Zero-crossing leak experiments for KLJN-family key exchangers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the solved noise levels and wire moments of each scheme.
    Levels(Common),
    /// Analytic and ensemble wire moments per scheme and arrangement.
    Table1(Common),
    /// Eve's success probability per scheme.
    Table2(Common),
    /// LH/HL histograms of the per-bit statistics.
    Fig2(Common),
    /// Every synthesis/sampling/normalization mode; writes discrepancy_report.json.
    Sweep(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML experiment file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset names, comma separated.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bits per arrangement.
    #[arg(long)]
    runs: Option<usize>,
    /// Hz.
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Hz.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Seconds.
    #[arg(long)]
    bit_duration: Option<f64>,
    /// spectral_flat, filtered_white or multi_sine.
    #[arg(long)]
    mode: Option<SynthesisMode>,
    /// Tone count for multi_sine.
    #[arg(long)]
    tones: Option<u32>,
    /// interpolate or sample_after.
    #[arg(long)]
    sampling: Option<SamplingMode>,
    #[arg(long)]
    normalize: Option<bool>,
    /// current_at_voltage_zero or voltage_at_current_zero.
    #[arg(long)]
    direction: Option<Direction>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv and/or json, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    format: Vec<OutputFormat>,
    #[arg(long)]
    bins: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("unknown format `{other}` (expected csv or json)")),
    }
}

impl Common {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentSpec::default(),
        };
        if !self.scheme.is_empty() {
            spec.schemes = self.scheme.clone();
        }
        let p = &mut spec.params;
        set(&mut p.master_seed, self.seed);
        set(&mut p.sample_rate, self.sample_rate);
        set(&mut p.bandwidth, self.bandwidth);
        set(&mut p.bit_duration, self.bit_duration);
        set(&mut p.synthesis_mode, self.mode);
        set(&mut p.tones, self.tones);
        set(&mut p.normalize_per_bit, self.normalize);
        set(&mut spec.sampling, self.sampling);
        set(&mut spec.attack.direction, self.direction);
        set(&mut spec.runs, self.runs);
        set(&mut spec.histogram_bins, self.bins);
        set(&mut spec.output_dir, self.out.clone());
        if !self.format.is_empty() {
            spec.formats = self.format.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("hard invariant check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let common = match &cli.command {
        Command::Levels(c) | Command::Table1(c) | Command::Table2(c) | Command::Fig2(c) | Command::Sweep(c) => c,
    };
    let spec = common.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| dispatch(&cli.command, &spec))
}

fn dispatch(command: &Command, spec: &ExperimentSpec) -> Result<bool> {
    if !matches!(command, Command::Levels(_)) {
        spec.echo_config()?;
    }
    match command {
        Command::Levels(_) => levels(spec),
        Command::Table1(_) => {
            let t = run_table1(spec)?;
            report_written(t.write(spec)?);
            for r in t.rows.iter().filter(|r| r.source == Source::Ensemble) {
                println!(
                    "{:6} {}  U²={:.4e}  I²={:.4e}  P={:+.4e}  I²zc={:.4e}",
                    r.scheme, r.bit, r.msq_u_v2, r.msq_i_a2, r.p_ab_w, r.msq_i_zc_a2
                );
            }
            let worst = t.ensembles.iter().map(|e| e.summary.max_kirchhoff_residual).fold(0.0, f64::max);
            println!("max kirchhoff residual {worst:.3e}");
            Ok(worst <= KIRCHHOFF_TOL)
        }
        Command::Table2(_) => {
            let t = run_table2(spec)?;
            report_written(t.write(spec)?);
            for r in &t.rows {
                let target = r.paper_p.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into());
                println!(
                    "{:6} p={:.4} sigma={:.4} paper={} null={}",
                    r.scheme,
                    r.report.p,
                    r.report.sigma,
                    target,
                    r.null_check.map(|b| if b { "pass" } else { "FAIL" }).unwrap_or("-")
                );
            }
            Ok(t.nulls_hold())
        }
        Command::Fig2(_) => {
            let f = run_fig2(spec)?;
            report_written(f.write(spec)?);
            for e in &f.summaries {
                println!(
                    "{:6} {:9} sep={:+.4} ks_p={:.3} dropped={}",
                    e.scheme,
                    e.statistic.as_str(),
                    e.summary.rel_separation,
                    e.summary.ks.p_value,
                    e.summary.dropped
                );
            }
            Ok(f.histograms.iter().all(|h| h.total() as usize + h.dropped == spec.runs))
        }
        Command::Sweep(_) => {
            let r = run_mode_sweep(spec)?;
            report_written(vec![r.write(spec)?]);
            let s = &r.summary;
            println!("cells {} failed {} complete {}", s.n_cells, s.n_failed, s.complete);
            println!("equilibrium nulls hold everywhere: {}", s.nulls_hold_everywhere);
            for f in &s.null_failures {
                println!("  null failure: {f}");
            }
            for b in &s.best_vmg_matches {
                println!(
                    "best {:6} p={:.4} paper={:.4} at {} ({})",
                    b.scheme,
                    b.p,
                    b.paper_p,
                    b.label,
                    b.direction.as_str()
                );
            }
            Ok(s.n_failed == 0 && s.complete && s.nulls_hold_everywhere && s.max_kirchhoff_residual <= KIRCHHOFF_TOL)
        }
    }
}

fn levels(spec: &ExperimentSpec) -> Result<bool> {
    for name in &spec.schemes {
        let s = Scheme::preset(name)?;
        let l = &s.levels;
        println!("{name}: R_HA={} R_LA={} R_HB={} R_LB={}", s.def.r_ha, s.def.r_la, s.def.r_hb, s.def.r_lb);
        println!("  e_HA={:.6} e_LA={:.6} e_HB={:.6} e_LB={:.6} V²", l.e_ha, l.e_la, l.e_hb, l.e_lb);
        for a in Arrangement::BOTH {
            let m = s.moments(a);
            println!("  {a}: U²={:.6} V²  I²={:.6e} A²  P_AB={:+.6e} W", m.msq_u, m.msq_i, m.p_ab);
        }
    }
    Ok(true)
}

fn report_written(paths: Vec<PathBuf>) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}
