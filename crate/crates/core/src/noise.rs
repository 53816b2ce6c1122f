//! Band-limited source noise for the four resistor generators of the loop.
//!
//! Every source waveform is a pure function of `(NoiseSpec, SimParams,
//! StreamId)`. Randomness comes from a ChaCha8 generator keyed by the master
//! seed, with the ChaCha stream number derived from the structured
//! [`StreamId`]. Any bit can therefore be regenerated in isolation, in any
//! order, on any thread.
//!
//! Three synthesis modes are available:
//!
//! | Mode             | Construction                                                      |
//! |------------------|-------------------------------------------------------------------|
//! | `spectral_flat`  | i.i.d. complex Gaussian coefficients on FFT bins `1..=K`, `K = floor(B·T)` |
//! | `filtered_white` | white Gaussian samples through a 4th-order Butterworth low-pass   |
//! | `multi_sine`     | `tones` equal-amplitude cosines at `j·B/tones`, uniform phases     |
//!
//! ## `filtered_white` filter
//!
//! Two cascaded RBJ biquad low-pass sections (bilinear transform with
//! pre-warping) at corner `f0 = bandwidth`, with `w0 = 2π·f0/fs`,
//! `α = sin(w0)/(2Q)`:
//!
//! ```text
//! b0 = (1 - cos w0)/2   b1 = 1 - cos w0   b2 = (1 - cos w0)/2
//! a0 = 1 + α            a1 = -2 cos w0    a2 = 1 - α
//! Q1 = 1/(2 cos(π/8)) = 0.541196...      Q2 = 1/(2 cos(3π/8)) = 1.306563...
//! ```
//!
//! The cascade is the 4th-order Butterworth response, -3 dB at `bandwidth`.
//! Filter state starts at zero on every bit, so each bit opens with a
//! startup transient. The output gain is chosen so that the *expected*
//! mean square over the bit, transient included, equals the target: with
//! impulse response `h`, sample `n` has variance `Σ_{m≤n} h[m]²`, and the
//! gain normalizes the average of that over the bit.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest permitted number of samples in one bit period.
pub const MIN_SAMPLES_PER_BIT: usize = 64;

/// Minimum waveform length accepted by [`psd_check`].
pub const MIN_PSD_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    SpectralFlat,
    FilteredWhite,
    MultiSine,
}

impl SynthesisMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthesisMode::SpectralFlat => "spectral_flat",
            SynthesisMode::FilteredWhite => "filtered_white",
            SynthesisMode::MultiSine => "multi_sine",
        }
    }
}

impl std::str::FromStr for SynthesisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral_flat" => Ok(SynthesisMode::SpectralFlat),
            "filtered_white" => Ok(SynthesisMode::FilteredWhite),
            "multi_sine" => Ok(SynthesisMode::MultiSine),
            other => Err(Error::Config(format!("unknown synthesis mode `{other}`"))),
        }
    }
}

/// Sampling, bandwidth and seeding parameters shared by every bit of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Hz.
    pub sample_rate: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Seconds.
    pub bit_duration: f64,
    pub synthesis_mode: SynthesisMode,
    /// Number of sinusoids; only read in `multi_sine` mode.
    pub tones: u32,
    pub normalize_per_bit: bool,
    pub master_seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            sample_rate: 10_000.0,
            bandwidth: 500.0,
            bit_duration: 0.1,
            synthesis_mode: SynthesisMode::SpectralFlat,
            tones: 50,
            normalize_per_bit: false,
            master_seed: 0x4b4c_4a4e,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::Config(format!("sample_rate must be positive, got {}", self.sample_rate)));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if self.bandwidth > self.sample_rate / 4.0 {
            return Err(Error::Config(format!(
                "bandwidth {} Hz exceeds sample_rate/4 = {} Hz",
                self.bandwidth,
                self.sample_rate / 4.0
            )));
        }
        if !(self.bit_duration.is_finite() && self.bit_duration > 0.0) {
            return Err(Error::Config(format!("bit_duration must be positive, got {}", self.bit_duration)));
        }
        let n = self.bit_duration * self.sample_rate;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Config(format!("bit_duration * sample_rate = {n} is not an integer")));
        }
        if (n.round() as usize) < MIN_SAMPLES_PER_BIT {
            return Err(Error::Config(format!(
                "bit_duration * sample_rate = {n} is below the minimum of {MIN_SAMPLES_PER_BIT}"
            )));
        }
        if self.synthesis_mode == SynthesisMode::MultiSine && self.tones == 0 {
            return Err(Error::Config("multi_sine requires tones >= 1".into()));
        }
        if self.synthesis_mode == SynthesisMode::SpectralFlat && self.bandwidth * self.bit_duration < 1.0 {
            return Err(Error::Config(format!(
                "spectral_flat needs bandwidth * bit_duration >= 1 (one FFT bin), got {}",
                self.bandwidth * self.bit_duration
            )));
        }
        Ok(())
    }

    pub fn samples_per_bit(&self) -> usize {
        (self.bit_duration * self.sample_rate).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Short label such as `multi_sine(5)` used in reports.
    pub fn mode_label(&self) -> String {
        match self.synthesis_mode {
            SynthesisMode::MultiSine => format!("multi_sine({})", self.tones),
            m => m.as_str().to_string(),
        }
    }
}

/// A uniformly sampled real time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    dt: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("waveform dt must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::TooShort { len: samples.len(), min: 2 });
        }
        Ok(Self { samples, dt })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn mean_square(&self) -> f64 {
        crate::stats::mean_square(&self.samples)
    }

    pub fn same_shape(&self, other: &Waveform) -> bool {
        self.samples.len() == other.samples.len() && self.dt == other.dt
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Target intensity of one source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// V².
    pub mean_square: f64,
    /// Hz.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    High,
    Low,
}

/// What a batch of random draws is used for. Keeps ensemble, calibration and
/// evaluation randomness disjoint under one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Purpose {
    Ensemble = 0,
    Calibration = 1,
    Evaluation = 2,
    Shuffle = 3,
    Diagnostic = 4,
}

/// Structured substream label: `(purpose, bit index, party, resistor role)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub purpose: Purpose,
    pub bit: u64,
    pub party: Party,
    pub role: Role,
}

impl StreamId {
    pub const MAX_BIT: u64 = (1 << 58) - 1;

    pub fn new(purpose: Purpose, bit: u64, party: Party, role: Role) -> Self {
        Self { purpose, bit, party, role }
    }

    /// ChaCha stream number: 4 bits purpose, 1 bit party, 1 bit role, 58 bits bit index.
    pub fn key(&self) -> u64 {
        debug_assert!(self.bit <= Self::MAX_BIT);
        let party = matches!(self.party, Party::Bob) as u64;
        let role = matches!(self.role, Role::Low) as u64;
        ((self.purpose as u64) << 60) | (party << 59) | (role << 58) | (self.bit & Self::MAX_BIT)
    }
}

/// Deterministic generator for one substream.
pub fn stream_rng(master_seed: u64, stream: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream.key());
    rng
}

/// Reusable synthesizer: owns the FFT plan and filter gain for one
/// `SimParams`, so repeated calls avoid re-planning. Cheap to share across
/// threads by reference.
pub struct Synthesizer {
    params: SimParams,
    kernel: Kernel,
}

impl std::fmt::Debug for Synthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synthesizer").field("params", &self.params).finish_non_exhaustive()
    }
}

impl Synthesizer {
    pub fn new(params: &SimParams) -> Result<Self> {
        params.validate()?;
        let kernel = Kernel::build(params, params.bandwidth)?;
        Ok(Self { params: params.clone(), kernel })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn synthesize(&self, spec: &NoiseSpec, stream: StreamId) -> Result<Waveform> {
        validate_spec(spec, &self.params)?;
        if spec.bandwidth == self.kernel.bandwidth() {
            Ok(self.kernel.run(spec, &self.params, stream))
        } else {
            let kernel = Kernel::build(&self.params, spec.bandwidth)?;
            Ok(kernel.run(spec, &self.params, stream))
        }
    }
}

/// One-shot synthesis; see [`Synthesizer`] for repeated use.
pub fn synthesize(spec: &NoiseSpec, params: &SimParams, stream: StreamId) -> Result<Waveform> {
    Synthesizer::new(params)?.synthesize(spec, stream)
}

fn validate_spec(spec: &NoiseSpec, params: &SimParams) -> Result<()> {
    if !spec.mean_square.is_finite() || spec.mean_square < 0.0 {
        return Err(Error::Domain(format!("mean_square must be >= 0, got {}", spec.mean_square)));
    }
    if !(spec.bandwidth.is_finite() && spec.bandwidth > 0.0) || spec.bandwidth > params.sample_rate / 4.0 {
        return Err(Error::Config(format!("source bandwidth {} Hz must lie in (0, sample_rate/4]", spec.bandwidth)));
    }
    Ok(())
}

enum Kernel {
    SpectralFlat {
        bandwidth: f64,
        bins: usize,
        ifft: Arc<dyn Fft<f64>>,
    },
    FilteredWhite {
        bandwidth: f64,
        sections: [Biquad; 2],
        gain_per_unit: f64,
    },
    /// Per tone, `cos` and `sin` of `2π f t_k` over one bit.
    MultiSine {
        bandwidth: f64,
        cos: Vec<Vec<f64>>,
        sin: Vec<Vec<f64>>,
    },
}

impl Kernel {
    fn bandwidth(&self) -> f64 {
        match self {
            Kernel::SpectralFlat { bandwidth, .. }
            | Kernel::FilteredWhite { bandwidth, .. }
            | Kernel::MultiSine { bandwidth, .. } => *bandwidth,
        }
    }

    fn build(params: &SimParams, bandwidth: f64) -> Result<Self> {
        let n = params.samples_per_bit();
        Ok(match params.synthesis_mode {
            SynthesisMode::SpectralFlat => {
                let bins = (bandwidth * params.bit_duration + 1e-9).floor() as usize;
                if bins == 0 {
                    return Err(Error::Config("spectral_flat band contains no FFT bin".into()));
                }
                let ifft = FftPlanner::new().plan_fft_inverse(n);
                Kernel::SpectralFlat { bandwidth, bins, ifft }
            }
            SynthesisMode::FilteredWhite => {
                let sections = butterworth4(bandwidth, params.sample_rate);
                let mut impulse = vec![0.0; n];
                impulse[0] = 1.0;
                run_cascade(&sections, &mut impulse);
                let mut cumulative = 0.0;
                let mut acc = 0.0;
                for h in &impulse {
                    cumulative += h * h;
                    acc += cumulative;
                }
                let avg_var = acc / n as f64;
                Kernel::FilteredWhite { bandwidth, sections, gain_per_unit: 1.0 / avg_var.sqrt() }
            }
            SynthesisMode::MultiSine => {
                let tones = params.tones.max(1);
                let dt = params.dt();
                let (mut cos, mut sin) = (Vec::new(), Vec::new());
                for j in 1..=tones {
                    let f = j as f64 * bandwidth / tones as f64;
                    let arg = |k: usize| 2.0 * PI * f * k as f64 * dt;
                    cos.push((0..n).map(|k| arg(k).cos()).collect());
                    sin.push((0..n).map(|k| arg(k).sin()).collect());
                }
                Kernel::MultiSine { bandwidth, cos, sin }
            }
        })
    }

    fn run(&self, spec: &NoiseSpec, params: &SimParams, stream: StreamId) -> Waveform {
        let n = params.samples_per_bit();
        let dt = params.dt();
        if spec.mean_square == 0.0 {
            return Waveform { samples: vec![0.0; n], dt };
        }
        let mut rng = stream_rng(params.master_seed, stream);
        let mut samples = match self {
            Kernel::SpectralFlat { bins, ifft, .. } => {
                let scale = (spec.mean_square / *bins as f64).sqrt();
                let mut buf = vec![Complex64::new(0.0, 0.0); n];
                for slot in buf.iter_mut().skip(1).take(*bins) {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *slot = Complex64::new(re * scale, im * scale);
                }
                ifft.process(&mut buf);
                buf.into_iter().map(|c| c.re).collect::<Vec<_>>()
            }
            Kernel::FilteredWhite { sections, gain_per_unit, .. } => {
                let mut x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                run_cascade(sections, &mut x);
                let gain = gain_per_unit * spec.mean_square.sqrt();
                x.iter_mut().for_each(|v| *v *= gain);
                x
            }
            Kernel::MultiSine { cos, sin, .. } => {
                let amp = (2.0 * spec.mean_square / cos.len() as f64).sqrt();
                let mut x = vec![0.0; n];
                // cos(a + ph) = cos a cos ph - sin a sin ph
                for (c, s) in cos.iter().zip(sin) {
                    let ph = 2.0 * PI * rng.random::<f64>();
                    let (pc, ps) = (amp * ph.cos(), amp * ph.sin());
                    for ((v, c), s) in x.iter_mut().zip(c).zip(s) {
                        *v += c * pc - s * ps;
                    }
                }
                x
            }
        };
        if params.normalize_per_bit {
            let ms = crate::stats::mean_square(&samples);
            if ms > 0.0 {
                let g = (spec.mean_square / ms).sqrt();
                samples.iter_mut().for_each(|v| *v *= g);
            }
        }
        Waveform { samples, dt }
    }
}

/// Direct-form I biquad, normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn lowpass(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - cos) / 2.0 / a0, (1.0 - cos) / a0, (1.0 - cos) / 2.0 / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn process(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let x0 = *v;
            let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }
}

/// The two sections of the 4th-order Butterworth low-pass used by `filtered_white`.
pub fn butterworth4(corner: f64, fs: f64) -> [Biquad; 2] {
    let q1 = 1.0 / (2.0 * (PI / 8.0).cos());
    let q2 = 1.0 / (2.0 * (3.0 * PI / 8.0).cos());
    [Biquad::lowpass(corner, fs, q1), Biquad::lowpass(corner, fs, q2)]
}

fn run_cascade(sections: &[Biquad; 2], x: &mut [f64]) {
    for s in sections {
        s.process(x);
    }
}

/// Fraction of a waveform's periodogram power at frequencies `<= bandwidth`.
///
/// Uses a rectangular window over the whole record, so a bit-length
/// `spectral_flat` realization has no leakage at all.
pub fn psd_check(w: &Waveform, bandwidth: f64) -> Result<f64> {
    let n = w.len();
    if n < MIN_PSD_LEN {
        return Err(Error::TooShort { len: n, min: MIN_PSD_LEN });
    }
    let mut buf: Vec<Complex64> = w.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * w.dt());
    let (mut in_band, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let weight = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
        let p = weight * c.norm_sqr();
        total += p;
        if k as f64 * df <= bandwidth * (1.0 + 1e-12) {
            in_band += p;
        }
    }
    if total == 0.0 {
        return Err(Error::Domain("waveform carries no power".into()));
    }
    Ok(in_band / total)
}
