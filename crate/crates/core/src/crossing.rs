//! Zero-crossing detection on a trigger waveform and conditional sampling of
//! a target waveform at those instants.
//!
//! Sampling currents at wire-voltage crossings uses `(trigger = U_w, target
//! = I_w)`; the voltage-at-current-crossing direction swaps the arguments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::Waveform;
use crate::stats::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    /// Sample position `k`; the crossing lies in `[k, k+1)`.
    pub index: usize,
    /// Linear-interpolated offset in `[0, 1)`.
    pub frac: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Linear blend of the target at the interpolated crossing instant.
    Interpolate,
    /// Target sample immediately after the crossing (`k + 1`).
    #[default]
    SampleAfter,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::Interpolate => "interpolate",
            SamplingMode::SampleAfter => "sample_after",
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interpolate" => Ok(SamplingMode::Interpolate),
            "sample_after" => Ok(SamplingMode::SampleAfter),
            other => Err(Error::Config(format!("unknown sampling mode `{other}`"))),
        }
    }
}

/// Crossing-conditioned mean square of one bit. `msq_conditional` is `None`
/// when the trigger never crossed zero; such bits are dropped from ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingStat {
    pub n_crossings: usize,
    pub msq_conditional: Option<f64>,
    pub sampling_mode: SamplingMode,
}

impl CrossingStat {
    pub fn is_valid(&self) -> bool {
        self.msq_conditional.is_some()
    }
}

/// One event per strict sign change between consecutive samples, and one
/// event (`frac = 0`) at the first sample of every run of exact zeros.
pub fn find_crossings(trigger: &Waveform) -> Vec<CrossingEvent> {
    crossings_in(trigger.samples())
}

fn crossings_in(x: &[f64]) -> Vec<CrossingEvent> {
    let mut events = Vec::new();
    let mut prev_zero = false;
    for (k, &v) in x.iter().enumerate() {
        if v == 0.0 {
            if !prev_zero {
                events.push(CrossingEvent { index: k, frac: 0.0 });
            }
            prev_zero = true;
            continue;
        }
        prev_zero = false;
        if let Some(&next) = x.get(k + 1) {
            if next != 0.0 && (v < 0.0) != (next < 0.0) {
                let frac = v / (v - next);
                // frac < 1 because next != 0; clamp guards rounding.
                events.push(CrossingEvent { index: k, frac: frac.clamp(0.0, 1.0 - f64::EPSILON) });
            }
        }
    }
    events
}

/// Value of `target` at one event under the chosen rule.
pub fn sample_event(target: &[f64], ev: &CrossingEvent, mode: SamplingMode) -> f64 {
    let last = target.len() - 1;
    let k1 = (ev.index + 1).min(last);
    match mode {
        SamplingMode::Interpolate => {
            let a = target[ev.index];
            a + ev.frac * (target[k1] - a)
        }
        SamplingMode::SampleAfter => target[k1],
    }
}

pub fn sample_at_crossings(trigger: &Waveform, target: &Waveform, mode: SamplingMode) -> Result<CrossingStat> {
    if !trigger.same_shape(target) {
        return Err(Error::Shape(format!(
            "trigger ({} samples) and target ({} samples) differ in shape",
            trigger.len(),
            target.len()
        )));
    }
    let events = find_crossings(trigger);
    Ok(stat_from_events(&events, target.samples(), mode))
}

pub(crate) fn stat_from_events(events: &[CrossingEvent], target: &[f64], mode: SamplingMode) -> CrossingStat {
    if events.is_empty() {
        return CrossingStat { n_crossings: 0, msq_conditional: None, sampling_mode: mode };
    }
    let sum: CompensatedSum = events
        .iter()
        .map(|ev| {
            let v = sample_event(target, ev, mode);
            v * v
        })
        .collect();
    CrossingStat {
        n_crossings: events.len(),
        msq_conditional: Some(sum.value() / events.len() as f64),
        sampling_mode: mode,
    }
}

/// Mean square of the target under *direct* Gaussian conditioning on
/// `trigger = 0`, bypassing any time series.
///
/// Each draw takes a fresh correlated pair `(T, X)` with
/// `Corr(T, X) = rho` and projects out the trigger,
/// `X | T=0 = X - rho·(σ_X/σ_T)·T`, which is exact for jointly Gaussian
/// variables. Returns the mean square over `draws` conditioned samples.
pub fn direct_conditioned_msq<R: Rng + ?Sized>(rho: f64, msq_target: f64, draws: usize, rng: &mut R) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    if msq_target.is_nan() || msq_target < 0.0 || draws == 0 {
        return Err(Error::Domain("need msq_target >= 0 and at least one draw".into()));
    }
    let sigma = msq_target.sqrt();
    let ortho = (1.0 - rho * rho).sqrt();
    let mut acc = CompensatedSum::new();
    for _ in 0..draws {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        // T = z1 (unit variance), X = σ(ρ z1 + √(1-ρ²) z2)
        let t = z1;
        let x = sigma * (rho * z1 + ortho * z2);
        let conditioned = x - rho * sigma * t;
        acc.add(conditioned * conditioned);
    }
    Ok(acc.value() / draws as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn wf(v: Vec<f64>) -> Waveform {
        Waveform::new(v, 1e-3).unwrap()
    }

    fn sine(f: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|k| (2.0 * PI * f * k as f64 / fs + phase).sin()).collect()
    }

    #[test]
    fn ten_hz_sine_over_one_second() {
        for fs in [100.0, 1000.0, 4410.0, 10_000.0] {
            let n = fs as usize;
            let ev = find_crossings(&wf(sine(10.0, fs, n, 0.0)));
            assert_eq!(ev.len(), 20, "fs = {fs}");
        }
    }

    #[test]
    fn positive_waveform_has_no_crossings() {
        let w = wf((0..100).map(|k| 1.0 + (k as f64).sin().abs()).collect());
        assert!(find_crossings(&w).is_empty());
        let stat = sample_at_crossings(&w, &w, SamplingMode::SampleAfter).unwrap();
        assert_eq!(stat.n_crossings, 0);
        assert!(!stat.is_valid());
    }

    #[test]
    fn exact_zeros_produce_single_events() {
        let ev = crossings_in(&[1.0, 0.0, -1.0]);
        assert_eq!(ev, vec![CrossingEvent { index: 1, frac: 0.0 }]);
        let ev = crossings_in(&[1.0, 0.0, 0.0, 0.0, -2.0, 3.0]);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0], CrossingEvent { index: 1, frac: 0.0 });
        assert_eq!(ev[1].index, 4);
        assert!((ev[1].frac - 0.4).abs() < 1e-15);
    }

    #[test]
    fn interpolated_offset() {
        let ev = crossings_in(&[3.0, -1.0]);
        assert_eq!(ev.len(), 1);
        assert!((ev[0].frac - 0.75).abs() < 1e-15);
        assert_eq!(sample_event(&[10.0, 14.0], &ev[0], SamplingMode::Interpolate), 13.0);
        assert_eq!(sample_event(&[10.0, 14.0], &ev[0], SamplingMode::SampleAfter), 14.0);
    }

    #[test]
    fn sine_sampled_at_own_zeros() {
        let s = wf(sine(7.0, 1000.0, 1000, 0.3));
        let stat = sample_at_crossings(&s, &s, SamplingMode::Interpolate).unwrap();
        assert!(stat.msq_conditional.unwrap() < 1e-4);
    }

    #[test]
    fn quadrature_samples_extremes() {
        let amp = 2.5;
        let trig = wf(sine(7.0, 1000.0, 1000, 0.3));
        let target = wf(sine(7.0, 1000.0, 1000, 0.3 + PI / 2.0).iter().map(|v| v * amp).collect());
        let stat = sample_at_crossings(&trig, &target, SamplingMode::Interpolate).unwrap();
        assert!((stat.msq_conditional.unwrap() - amp * amp).abs() < 0.01 * amp * amp);
    }

    #[test]
    fn shape_mismatch() {
        let err = sample_at_crossings(&wf(vec![1.0, -1.0]), &wf(vec![1.0, -1.0, 2.0]), SamplingMode::Interpolate);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn direct_conditioning_domain() {
        let mut rng = rand::rng();
        assert!(direct_conditioned_msq(1.5, 1.0, 10, &mut rng).is_err());
        assert!(direct_conditioned_msq(0.5, 1.0, 0, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn interpolated_trigger_is_zero(xs in proptest::collection::vec(-5.0..5.0f64, 2..200)) {
            let w = wf(xs.clone());
            for ev in find_crossings(&w) {
                let v = sample_event(&xs, &ev, SamplingMode::Interpolate);
                let scale = xs[ev.index].abs().max(xs[(ev.index + 1).min(xs.len() - 1)].abs());
                prop_assert!(v.abs() <= 1e-12 * scale.max(1e-300));
                prop_assert!((0.0..1.0).contains(&ev.frac));
            }
        }

        #[test]
        fn events_are_strictly_increasing(xs in proptest::collection::vec(prop_oneof![Just(0.0), -1.0..1.0f64], 2..100)) {
            let ev = crossings_in(&xs);
            prop_assert!(ev.windows(2).all(|p| p[0].index < p[1].index));
        }

        #[test]
        fn sign_flip_invariance(
            xs in proptest::collection::vec(-5.0..5.0f64, 2..200),
            ys in proptest::collection::vec(-5.0..5.0f64, 200),
            interpolate in any::<bool>(),
        ) {
            let mode = if interpolate { SamplingMode::Interpolate } else { SamplingMode::SampleAfter };
            let n = xs.len();
            let trig = wf(xs.clone());
            let target = wf(ys[..n].to_vec());
            let base = sample_at_crossings(&trig, &target, mode).unwrap();
            let neg_trig = wf(xs.iter().map(|v| -v).collect());
            let neg_target = wf(ys[..n].iter().map(|v| -v).collect());
            for other in [
                sample_at_crossings(&neg_trig, &target, mode).unwrap(),
                sample_at_crossings(&trig, &neg_target, mode).unwrap(),
            ] {
                prop_assert_eq!(other.n_crossings, base.n_crossings);
                match (base.msq_conditional, other.msq_conditional) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300)),
                    (None, None) => {}
                    _ => prop_assert!(false),
                }
            }
        }
    }
}
