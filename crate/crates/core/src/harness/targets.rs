//! Published reference values the harness compares against.

use serde::Serialize;

/// One scheme's printed wire moments, crossing statistics and attack result.
/// Currents in A², power in W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperRow {
    pub scheme: &'static str,
    pub msq_u: f64,
    pub msq_i: f64,
    pub p_ab: f64,
    pub msq_i_zc_lh: f64,
    pub msq_i_zc_hl: f64,
    pub p: f64,
    pub sigma: f64,
}

pub const PAPER_ROWS: [PaperRow; 5] = [
    PaperRow {
        scheme: "kljn",
        msq_u: 0.909,
        msq_i: 0.090e-6,
        p_ab: 0.0,
        msq_i_zc_lh: 0.090e-6,
        msq_i_zc_hl: 0.091e-6,
        p: 0.5001,
        sigma: 0.0090,
    },
    PaperRow {
        scheme: "vmg1",
        msq_u: 0.992,
        msq_i: 0.314e-6,
        p_ab: 0.026e-3,
        msq_i_zc_lh: 0.283e-6,
        msq_i_zc_hl: 0.315e-6,
        p: 0.5872,
        sigma: 0.0024,
    },
    PaperRow {
        scheme: "vmg2",
        msq_u: 0.367,
        msq_i: 4.788e-6,
        p_ab: 0.471e-3,
        msq_i_zc_lh: 4.309e-6,
        msq_i_zc_hl: 4.955e-6,
        p: 0.7002,
        sigma: 0.0054,
    },
    PaperRow {
        scheme: "vmg3",
        msq_u: 0.966,
        msq_i: 0.074e-6,
        p_ab: 0.156e-3,
        msq_i_zc_lh: 0.069e-6,
        msq_i_zc_hl: 0.079e-6,
        p: 0.6276,
        sigma: 0.0023,
    },
    PaperRow {
        scheme: "fck1",
        msq_u: 0.502,
        msq_i: 0.005e-6,
        p_ab: 0.0,
        msq_i_zc_lh: 0.005e-6,
        msq_i_zc_hl: 0.005e-6,
        p: 0.5030,
        sigma: 0.0092,
    },
];

pub fn paper_row(scheme: &str) -> Option<&'static PaperRow> {
    PAPER_ROWS.iter().find(|r| r.scheme == scheme)
}

/// Schemes whose LH and HL arrangements are internally in equilibrium.
pub fn is_equilibrium_scheme(scheme: &str) -> bool {
    matches!(scheme, "kljn" | "fck1")
}

/// Signed relative deviation `(measured - target) / |target|`, or the
/// absolute difference when the target is zero.
pub fn deviation(measured: f64, target: f64) -> f64 {
    if target == 0.0 {
        measured - target
    } else {
        (measured - target) / target.abs()
    }
}
