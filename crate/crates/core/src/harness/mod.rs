//! Experiment orchestration: the Table 1 / Table 2 / histogram datasets, the
//! synthesis-mode sweep, and their CSV/JSON serialization.
//!
//! Every dataset is a pure function of the [`ExperimentSpec`]; bits fan out
//! on the ambient rayon pool and are reduced in bit-index order, so outputs
//! are byte-identical at any worker count.

mod fig2;
pub mod sweep;
mod table1;
mod table2;
pub mod targets;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackConfig;
use crate::bitsim::{BitObservables, BitSimulator};
use crate::crossing::SamplingMode;
use crate::error::{Error, Result};
use crate::noise::{Purpose, SimParams};
use crate::schemes::{Arrangement, Scheme, PRESET_NAMES};
use crate::stats;

pub use fig2::{run_fig2, Fig2, Fig2Entry, Fig2Summary, Histogram, Statistic, FIG2_HEADER, FIG2_SUMMARY_HEADER};
pub use sweep::{run_mode_sweep, DiscrepancyReport, SCHEMA_VERSION};
pub use table1::{run_table1, EnsembleEntry, Source, Table1, Table1Row, TABLE1_HEADER};
pub use table2::{both_directions, run_table2, Table2, Table2Row, NULL_P_BAND, TABLE2_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything that determines an experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schemes: Vec<String>,
    pub params: SimParams,
    pub sampling: SamplingMode,
    /// Bits per arrangement for ensembles and histograms.
    pub runs: usize,
    pub attack: AttackConfig,
    pub histogram_bins: usize,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schemes: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
            params: SimParams::default(),
            sampling: SamplingMode::SampleAfter,
            runs: 1000,
            attack: AttackConfig::default(),
            histogram_bins: 50,
            output_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.attack.validate()?;
        if self.runs < 100 {
            return Err(Error::Config(format!("runs must be >= 100, got {}", self.runs)));
        }
        if self.histogram_bins < 10 {
            return Err(Error::Config(format!("histogram_bins must be >= 10, got {}", self.histogram_bins)));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        for name in &self.schemes {
            crate::schemes::preset_def(name)?;
        }
        Ok(())
    }

    pub fn resolved_schemes(&self) -> Result<Vec<Scheme>> {
        self.schemes.iter().map(|n| Scheme::preset(n)).collect()
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }

    /// Writes the fully resolved configuration next to the outputs.
    pub fn echo_config(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join("resolved_config.toml");
        fs::write(&path, self.to_toml_string()?)?;
        Ok(path)
    }
}

/// Mean with its standard error over `n` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        Self { mean: stats::mean(values), se: stats::std_error(values), n: values.len() }
    }

    /// `|mean - target|` in standard errors. Deviations at rounding level
    /// count as zero, so deterministic per-bit values do not blow up.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d <= 1e-12 * self.mean.abs().max(target.abs()) {
            0.0
        } else {
            d / self.se
        }
    }
}

/// Ensemble statistics of one scheme × arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n_bits: usize,
    pub msq_u: MeanSe,
    pub msq_i: MeanSe,
    pub p_inst: MeanSe,
    pub msq_i_zc: MeanSe,
    pub msq_u_zc: MeanSe,
    pub dropped_i_zc: usize,
    pub dropped_u_zc: usize,
    pub mean_crossings_u: f64,
    pub mean_crossings_i: f64,
    pub max_kirchhoff_residual: f64,
}

impl EnsembleSummary {
    pub fn of(obs: &[BitObservables]) -> Self {
        let col = |f: fn(&BitObservables) -> f64| obs.iter().map(f).collect::<Vec<_>>();
        let izc: Vec<f64> = obs.iter().filter_map(|o| o.msq_i_at_u_zc).collect();
        let uzc: Vec<f64> = obs.iter().filter_map(|o| o.msq_u_at_i_zc).collect();
        Self {
            n_bits: obs.len(),
            msq_u: MeanSe::of(&col(|o| o.msq_u)),
            msq_i: MeanSe::of(&col(|o| o.msq_i)),
            p_inst: MeanSe::of(&col(|o| o.p_inst)),
            msq_i_zc: MeanSe::of(&izc),
            msq_u_zc: MeanSe::of(&uzc),
            dropped_i_zc: obs.len() - izc.len(),
            dropped_u_zc: obs.len() - uzc.len(),
            mean_crossings_u: stats::mean(&col(|o| o.n_crossings_u as f64)),
            mean_crossings_i: stats::mean(&col(|o| o.n_crossings_i as f64)),
            max_kirchhoff_residual: obs.iter().map(|o| o.kirchhoff_residual).fold(0.0, f64::max),
        }
    }
}

/// LH and HL ensembles of `runs` bits each on the ensemble substreams.
#[derive(Debug, Clone)]
pub struct SchemeEnsemble {
    pub lh: Vec<BitObservables>,
    pub hl: Vec<BitObservables>,
}

impl SchemeEnsemble {
    pub fn simulate(sim: &BitSimulator<'_>, runs: usize) -> Result<Self> {
        Ok(Self {
            lh: sim.observe_run(Arrangement::Lh, Purpose::Ensemble, runs)?,
            hl: sim.observe_run(Arrangement::Hl, Purpose::Ensemble, runs)?,
        })
    }

    pub fn get(&self, a: Arrangement) -> &[BitObservables] {
        match a {
            Arrangement::Lh => &self.lh,
            Arrangement::Hl => &self.hl,
        }
    }
}

pub(crate) fn create_output_dir(spec: &ExperimentSpec) -> Result<&Path> {
    fs::create_dir_all(&spec.output_dir)?;
    Ok(&spec.output_dir)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
