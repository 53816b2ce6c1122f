//! One bit period end to end: synthesize the two connected sources, run the
//! loop, and reduce the wire waveforms to per-bit observables.

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::simulate_bit;
use crate::crossing::{find_crossings, stat_from_events, SamplingMode};
use crate::error::Result;
use crate::noise::{NoiseSpec, Party, Purpose, SimParams, StreamId, Synthesizer};
use crate::schemes::{Arrangement, Scheme};

/// Per-bit statistics. Crossing-conditioned fields are `None` when the
/// trigger had no crossing in the bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitObservables {
    pub arrangement: Arrangement,
    /// V².
    pub msq_u: f64,
    /// A².
    pub msq_i: f64,
    /// W; per-bit mean of `U_w·I_w`.
    pub p_inst: f64,
    /// A²; `I_w` sampled at `U_w` crossings.
    pub msq_i_at_u_zc: Option<f64>,
    /// V²; `U_w` sampled at `I_w` crossings.
    pub msq_u_at_i_zc: Option<f64>,
    pub n_crossings_u: usize,
    pub n_crossings_i: usize,
    /// Max relative Kirchhoff residual over the bit.
    pub kirchhoff_residual: f64,
}

/// Simulates bits of one scheme under fixed parameters.
#[derive(Debug)]
pub struct BitSimulator<'a> {
    synth: Synthesizer,
    scheme: &'a Scheme,
    sampling: SamplingMode,
}

impl<'a> BitSimulator<'a> {
    pub fn new(scheme: &'a Scheme, params: &SimParams, sampling: SamplingMode) -> Result<Self> {
        Ok(Self { synth: Synthesizer::new(params)?, scheme, sampling })
    }

    pub fn params(&self) -> &SimParams {
        self.synth.params()
    }

    pub fn scheme(&self) -> &Scheme {
        self.scheme
    }

    pub fn observe(&self, arrangement: Arrangement, purpose: Purpose, bit: u64) -> Result<BitObservables> {
        let cfg = self.scheme.loop_config(arrangement);
        let (alice_role, bob_role) = arrangement.roles();
        let bandwidth = self.params().bandwidth;
        let u_a = self.synth.synthesize(
            &NoiseSpec { mean_square: cfg.e_a, bandwidth },
            StreamId::new(purpose, bit, Party::Alice, alice_role),
        )?;
        let u_b = self.synth.synthesize(
            &NoiseSpec { mean_square: cfg.e_b, bandwidth },
            StreamId::new(purpose, bit, Party::Bob, bob_role),
        )?;
        let wire = simulate_bit(&cfg, &u_a, &u_b)?;
        let m = wire.empirical_moments();
        let u_events = find_crossings(&wire.u_w);
        let i_events = find_crossings(&wire.i_w);
        let i_at_u = stat_from_events(&u_events, wire.i_w.samples(), self.sampling);
        let u_at_i = stat_from_events(&i_events, wire.u_w.samples(), self.sampling);
        Ok(BitObservables {
            arrangement,
            msq_u: m.msq_u,
            msq_i: m.msq_i,
            p_inst: m.p_ab,
            msq_i_at_u_zc: i_at_u.msq_conditional,
            msq_u_at_i_zc: u_at_i.msq_conditional,
            n_crossings_u: u_events.len(),
            n_crossings_i: i_events.len(),
            kirchhoff_residual: wire.kirchhoff_residual(&cfg, &u_a, &u_b),
        })
    }

    /// Bits `0..n` of one arrangement, in bit order, computed in parallel on
    /// the current rayon pool.
    pub fn observe_run(&self, arrangement: Arrangement, purpose: Purpose, n: usize) -> Result<Vec<BitObservables>> {
        (0..n as u64).into_par_iter().map(|bit| self.observe(arrangement, purpose, bit)).collect()
    }

    /// Bits `0..arrangements.len()` with a given arrangement per bit.
    pub fn observe_assigned(&self, arrangements: &[Arrangement], purpose: Purpose) -> Result<Vec<BitObservables>> {
        arrangements.par_iter().enumerate().map(|(bit, &a)| self.observe(a, purpose, bit as u64)).collect()
    }
}
