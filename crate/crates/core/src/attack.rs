//! Eve's threshold attack on the crossing-conditioned statistic.
//!
//! Calibration simulates both arrangements on calibration-only substreams
//! and places the threshold at the midpoint of the two ensemble means.
//! Evaluation draws a balanced, shuffled sequence of true arrangements on
//! fresh substreams; per bit Eve names the arrangement whose calibration
//! mean lies on the same side of the threshold as the observed statistic.
//!
//! `p` is the mean of the per-batch success fractions over `n_batches`
//! contiguous, equal partitions of the evaluation bits, and `sigma` is the
//! sample standard deviation of those per-batch fractions. Bits whose
//! statistic is undefined (no crossing) are excluded from both numerator
//! and denominator.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bitsim::{BitObservables, BitSimulator};
use crate::error::{Error, Result};
use crate::noise::{stream_rng, Party, Purpose, Role, StreamId};
use crate::schemes::Arrangement;
use crate::stats::{self, CompensatedSum};

/// Meaning of the reported `sigma`.
pub const SIGMA_DEFINITION: &str =
    "sample standard deviation of p over n_batches contiguous equal partitions of the evaluation bits";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `I_w` sampled where `U_w` crosses zero.
    CurrentAtVoltageZero,
    /// `U_w` sampled where `I_w` crosses zero.
    VoltageAtCurrentZero,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::CurrentAtVoltageZero, Direction::VoltageAtCurrentZero];

    pub fn statistic(self, obs: &BitObservables) -> Option<f64> {
        match self {
            Direction::CurrentAtVoltageZero => obs.msq_i_at_u_zc,
            Direction::VoltageAtCurrentZero => obs.msq_u_at_i_zc,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::CurrentAtVoltageZero => "current_at_voltage_zero",
            Direction::VoltageAtCurrentZero => "voltage_at_current_zero",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "current_at_voltage_zero" => Ok(Direction::CurrentAtVoltageZero),
            "voltage_at_current_zero" => Ok(Direction::VoltageAtCurrentZero),
            other => Err(Error::Config(format!("unknown attack direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    #[default]
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub direction: Direction,
    /// Per arrangement.
    pub n_calibration_bits: usize,
    /// Total, split evenly between LH and HL.
    pub n_eval_bits: usize,
    pub n_batches: usize,
    pub threshold_rule: ThresholdRule,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            direction: Direction::CurrentAtVoltageZero,
            n_calibration_bits: 1000,
            n_eval_bits: 3000,
            n_batches: 10,
            threshold_rule: ThresholdRule::Midpoint,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_eval_bits < 100 || !self.n_eval_bits.is_multiple_of(2) {
            return Err(Error::Config(format!("n_eval_bits must be even and >= 100, got {}", self.n_eval_bits)));
        }
        if self.n_batches < 2 || self.n_batches > self.n_eval_bits {
            return Err(Error::Config(format!("n_batches must lie in [2, n_eval_bits], got {}", self.n_batches)));
        }
        if self.n_calibration_bits == 0 {
            return Err(Error::Config("n_calibration_bits must be positive".into()));
        }
        Ok(())
    }
}

/// Which arrangement shows the larger statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `mean_HL >= mean_LH`: statistics above the threshold are called HL.
    HlAbove,
    /// `mean_HL < mean_LH`: statistics above the threshold are called LH.
    LhAbove,
}

impl Orientation {
    pub fn sign(self) -> i8 {
        match self {
            Orientation::HlAbove => 1,
            Orientation::LhAbove => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::HlAbove => Orientation::LhAbove,
            Orientation::LhAbove => Orientation::HlAbove,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub threshold: f64,
    pub orientation: Orientation,
    pub mean_lh: f64,
    pub mean_hl: f64,
    pub dropped_bits: usize,
}

impl Calibration {
    pub fn guess(&self, statistic: f64) -> Arrangement {
        let above = statistic > self.threshold;
        match (self.orientation, above) {
            (Orientation::HlAbove, true) | (Orientation::LhAbove, false) => Arrangement::Hl,
            _ => Arrangement::Lh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub direction: Direction,
    pub p: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub orientation: Orientation,
    pub calibration_mean_lh: f64,
    pub calibration_mean_hl: f64,
    /// Calibration plus evaluation bits without a defined statistic.
    pub dropped_bits: usize,
    pub n_eval_used: usize,
    pub per_batch_p: Vec<f64>,
}

/// Midpoint threshold from two calibration populations; `None` entries are dropped.
pub fn calibrate_from_samples(lh: &[Option<f64>], hl: &[Option<f64>]) -> Result<Calibration> {
    let lh_ok: Vec<f64> = lh.iter().flatten().copied().collect();
    let hl_ok: Vec<f64> = hl.iter().flatten().copied().collect();
    if lh_ok.is_empty() || hl_ok.is_empty() {
        return Err(Error::Calibration(format!(
            "no usable calibration bits (LH {} of {}, HL {} of {})",
            lh_ok.len(),
            lh.len(),
            hl_ok.len(),
            hl.len()
        )));
    }
    let (mean_lh, mean_hl) = (stats::mean(&lh_ok), stats::mean(&hl_ok));
    Ok(Calibration {
        threshold: 0.5 * (mean_lh + mean_hl),
        orientation: if mean_hl >= mean_lh { Orientation::HlAbove } else { Orientation::LhAbove },
        mean_lh,
        mean_hl,
        dropped_bits: lh.len() - lh_ok.len() + hl.len() - hl_ok.len(),
    })
}

/// Scores labelled evaluation statistics against a calibration.
pub fn score(
    direction: Direction,
    calibration: &Calibration,
    eval: &[(Arrangement, Option<f64>)],
    n_batches: usize,
) -> Result<AttackReport> {
    if n_batches == 0 || eval.len() < n_batches {
        return Err(Error::Degenerate(format!("{} evaluation bits cannot fill {n_batches} batches", eval.len())));
    }
    let n = eval.len();
    let mut correct = vec![0usize; n_batches];
    let mut used = vec![0usize; n_batches];
    let mut dropped = 0;
    for (i, (truth, stat)) in eval.iter().enumerate() {
        let batch = i * n_batches / n;
        match stat {
            Some(s) => {
                used[batch] += 1;
                if calibration.guess(*s) == *truth {
                    correct[batch] += 1;
                }
            }
            None => dropped += 1,
        }
    }
    let n_used: usize = used.iter().sum();
    if n_used == 0 {
        return Err(Error::Degenerate("zero usable evaluation bits".into()));
    }
    if let Some(b) = used.iter().position(|&u| u == 0) {
        return Err(Error::Degenerate(format!("batch {b} has no usable bits")));
    }
    let per_batch_p: Vec<f64> = correct.iter().zip(&used).map(|(&c, &u)| c as f64 / u as f64).collect();
    let p = per_batch_p.iter().copied().collect::<CompensatedSum>().value() / n_batches as f64;
    Ok(AttackReport {
        direction,
        p,
        sigma: stats::std_dev(&per_batch_p),
        threshold: calibration.threshold,
        orientation: calibration.orientation,
        calibration_mean_lh: calibration.mean_lh,
        calibration_mean_hl: calibration.mean_hl,
        dropped_bits: dropped + calibration.dropped_bits,
        n_eval_used: n_used,
        per_batch_p,
    })
}

/// Balanced LH/HL labels for `n` evaluation bits, shuffled by a dedicated substream.
pub fn eval_arrangements(n: usize, master_seed: u64) -> Vec<Arrangement> {
    let mut labels: Vec<Arrangement> =
        (0..n).map(|i| if i < n / 2 { Arrangement::Lh } else { Arrangement::Hl }).collect();
    let mut rng = stream_rng(master_seed, StreamId::new(Purpose::Shuffle, 0, Party::Alice, Role::High));
    labels.shuffle(&mut rng);
    labels
}

/// Simulated observables behind one attack; shared by both directions.
#[derive(Debug, Clone)]
pub struct AttackData {
    pub calibration_lh: Vec<BitObservables>,
    pub calibration_hl: Vec<BitObservables>,
    pub eval: Vec<BitObservables>,
}

impl AttackData {
    pub fn simulate(sim: &BitSimulator<'_>, cfg: &AttackConfig) -> Result<Self> {
        cfg.validate()?;
        let calibration_lh = sim.observe_run(Arrangement::Lh, Purpose::Calibration, cfg.n_calibration_bits)?;
        // LH and HL connect different (party, role) sources, so equal bit indices never share a stream.
        let calibration_hl = sim.observe_run(Arrangement::Hl, Purpose::Calibration, cfg.n_calibration_bits)?;
        let labels = eval_arrangements(cfg.n_eval_bits, sim.params().master_seed);
        let eval = sim.observe_assigned(&labels, Purpose::Evaluation)?;
        Ok(Self { calibration_lh, calibration_hl, eval })
    }

    pub fn calibrate(&self, direction: Direction) -> Result<Calibration> {
        let lh: Vec<Option<f64>> = self.calibration_lh.iter().map(|o| direction.statistic(o)).collect();
        let hl: Vec<Option<f64>> = self.calibration_hl.iter().map(|o| direction.statistic(o)).collect();
        calibrate_from_samples(&lh, &hl)
    }

    pub fn attack(&self, direction: Direction, n_batches: usize) -> Result<AttackReport> {
        let calibration = self.calibrate(direction)?;
        let eval: Vec<(Arrangement, Option<f64>)> =
            self.eval.iter().map(|o| (o.arrangement, direction.statistic(o))).collect();
        score(direction, &calibration, &eval, n_batches)
    }
}

pub fn calibrate(sim: &BitSimulator<'_>, cfg: &AttackConfig) -> Result<Calibration> {
    cfg.validate()?;
    let lh = sim.observe_run(Arrangement::Lh, Purpose::Calibration, cfg.n_calibration_bits)?;
    let hl = sim.observe_run(Arrangement::Hl, Purpose::Calibration, cfg.n_calibration_bits)?;
    let pick = |v: &[BitObservables]| v.iter().map(|o| cfg.direction.statistic(o)).collect::<Vec<_>>();
    calibrate_from_samples(&pick(&lh), &pick(&hl))
}

pub fn run_attack(sim: &BitSimulator<'_>, cfg: &AttackConfig) -> Result<AttackReport> {
    AttackData::simulate(sim, cfg)?.attack(cfg.direction, cfg.n_batches)
}
