//! The Kirchhoff loop: two noisy resistors joined by an ideal wire.
//!
//! Alice's source `U_A` in series with `R_A` drives the wire against Bob's
//! source `U_B` in series with `R_B`. With positive current flowing from
//! Alice into the wire toward Bob:
//!
//! ```text
//! I_w = (U_A - U_B) / (R_A + R_B)
//! U_w = U_A - I_w·R_A  (= U_B + I_w·R_B)
//! ```
//!
//! For independent zero-mean sources with mean squares `e_a`, `e_b`:
//!
//! ```text
//! <U_w²> = (e_a·R_B² + e_b·R_A²) / (R_A + R_B)²
//! <I_w²> = (e_a + e_b)           / (R_A + R_B)²
//! P_AB   = (e_a·R_B - e_b·R_A)   / (R_A + R_B)²
//! ```
//!
//! `P_AB > 0` means net power flows from Alice to Bob.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::Waveform;
use crate::stats::CompensatedSum;

/// Sign convention recorded in every report.
pub const P_AB_SIGN_CONVENTION: &str = "positive P_AB = net power flow from Alice to Bob";

/// One bit period's loop: the two connected resistors and their source intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Ω.
    pub r_a: f64,
    /// Ω.
    pub r_b: f64,
    /// V².
    pub e_a: f64,
    /// V².
    pub e_b: f64,
}

impl LoopConfig {
    pub fn new(r_a: f64, e_a: f64, r_b: f64, e_b: f64) -> Result<Self> {
        let cfg = Self { r_a, r_b, e_a, e_b };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_a > 0.0 && self.r_b > 0.0 && self.r_a.is_finite() && self.r_b.is_finite()) {
            return Err(Error::Domain(format!("resistances must be positive, got {} / {}", self.r_a, self.r_b)));
        }
        if !(self.e_a >= 0.0 && self.e_b >= 0.0 && self.e_a.is_finite() && self.e_b.is_finite()) {
            return Err(Error::Domain(format!("intensities must be >= 0, got {} / {}", self.e_a, self.e_b)));
        }
        Ok(())
    }

    /// The same loop seen with Alice and Bob exchanged.
    pub fn swapped(&self) -> Self {
        Self { r_a: self.r_b, r_b: self.r_a, e_a: self.e_b, e_b: self.e_a }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WirePair {
    pub u_w: Waveform,
    pub i_w: Waveform,
}

impl WirePair {
    /// Largest sample-wise Kirchhoff residual relative to the largest signal
    /// magnitude in the loop (source voltages, wire voltage, and `I_w·R`).
    pub fn kirchhoff_residual(&self, cfg: &LoopConfig, u_a: &Waveform, u_b: &Waveform) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let it = self.u_w.samples().iter().zip(self.i_w.samples()).zip(u_a.samples().iter().zip(u_b.samples()));
        for ((&uw, &iw), (&ua, &ub)) in it {
            let ra = (uw - (ua - iw * cfg.r_a)).abs();
            let rb = (uw - (ub + iw * cfg.r_b)).abs();
            worst = worst.max(ra).max(rb);
            scale = scale.max(ua.abs()).max(ub.abs()).max(uw.abs()).max((iw * cfg.r_a).abs()).max((iw * cfg.r_b).abs());
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Per-bit empirical moments, accumulated in sample order.
    pub fn empirical_moments(&self) -> Moments {
        let (mut uu, mut ii, mut ui) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        for (&u, &i) in self.u_w.samples().iter().zip(self.i_w.samples()) {
            uu.add(u * u);
            ii.add(i * i);
            ui.add(u * i);
        }
        let n = self.u_w.len() as f64;
        Moments { msq_u: uu.value() / n, msq_i: ii.value() / n, p_ab: ui.value() / n }
    }
}

/// Wire second moments: `<U_w²>` (V²), `<I_w²>` (A²), `P_AB = <U_w·I_w>` (W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub msq_u: f64,
    pub msq_i: f64,
    pub p_ab: f64,
}

impl Moments {
    /// Correlation coefficient of `U_w` and `I_w`; zero when either variance is zero.
    pub fn correlation(&self) -> f64 {
        let denom = (self.msq_u * self.msq_i).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            self.p_ab / denom
        }
    }
}

pub fn simulate_bit(cfg: &LoopConfig, u_a: &Waveform, u_b: &Waveform) -> Result<WirePair> {
    cfg.validate()?;
    if !u_a.same_shape(u_b) {
        return Err(Error::Shape(format!(
            "source waveforms differ: {} samples @ {} s vs {} samples @ {} s",
            u_a.len(),
            u_a.dt(),
            u_b.len(),
            u_b.dt()
        )));
    }
    let total = cfg.r_a + cfg.r_b;
    let (i_w, u_w): (Vec<f64>, Vec<f64>) = u_a
        .samples()
        .iter()
        .zip(u_b.samples())
        .map(|(&ua, &ub)| {
            let i = (ua - ub) / total;
            (i, ua - i * cfg.r_a)
        })
        .unzip();
    Ok(WirePair { u_w: Waveform::new(u_w, u_a.dt())?, i_w: Waveform::new(i_w, u_a.dt())? })
}

pub fn analytic_moments(cfg: &LoopConfig) -> Moments {
    let s2 = (cfg.r_a + cfg.r_b).powi(2);
    Moments {
        msq_u: (cfg.e_a * cfg.r_b * cfg.r_b + cfg.e_b * cfg.r_a * cfg.r_a) / s2,
        msq_i: (cfg.e_a + cfg.e_b) / s2,
        p_ab: (cfg.e_a * cfg.r_b - cfg.e_b * cfg.r_a) / s2,
    }
}

/// `E[I_w² | U_w = 0] = <I_w²>·(1 - ρ²)` for jointly Gaussian zero-mean wire
/// variables. A statement about pointwise conditioning, not about sampling a
/// time series at its crossings.
pub fn conditional_msq_at_zero(m: &Moments) -> Result<f64> {
    if !(m.msq_u > 0.0 && m.msq_i > 0.0) {
        return Err(Error::Domain(format!(
            "conditional mean square needs positive variances, got <U²> = {}, <I²> = {}",
            m.msq_u, m.msq_i
        )));
    }
    let rho = m.p_ab / (m.msq_u * m.msq_i).sqrt();
    Ok(m.msq_i * (1.0 - rho * rho))
}
