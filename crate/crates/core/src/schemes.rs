//! Resistor sets and noise intensities for KLJN, VMG-KLJN and FCK1-VMG-KLJN.
//!
//! Intensities are mean squares in V² with a free overall scale; the shipped
//! presets anchor Alice's low resistor at `reference_e_la = 1 V²`.
//!
//! * **KLJN**: both parties own the same `(R_H, R_L)` pair and every source
//!   sits at one per-ohm intensity `c`, `e_i = c·R_i`.
//! * **VMG**: four arbitrary resistors. `e_la` and `e_hb` are given; `e_ha`
//!   and `e_lb` are solved so that `<U_w²>` and `<I_w²>` coincide in the LH
//!   and HL arrangements. Net power generally differs from zero.
//! * **FCK1**: resistors obey `R_HA·R_LB = R_LA·R_HB`. LH runs at per-ohm
//!   intensity `c1 = e_la/R_LA`, HL at `c2 = c1·(R_HA+R_LB)/(R_LA+R_HB)`;
//!   both arrangements are internally in equilibrium with matched moments.

use serde::{Deserialize, Serialize};

use crate::circuit::{analytic_moments, LoopConfig, Moments};
use crate::error::{Error, Result};
use crate::noise::Role;

/// Relative tolerance of the FCK1 product rule.
pub const FCK1_PRODUCT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SchemeKind {
    Kljn,
    Vmg,
    Fck1,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeDef {
    pub kind: SchemeKind,
    pub r_ha: f64,
    pub r_la: f64,
    pub r_hb: f64,
    pub r_lb: f64,
    /// V²; anchors the free overall scale.
    pub reference_e_la: f64,
}

impl SchemeDef {
    pub fn new(kind: SchemeKind, r_ha: f64, r_la: f64, r_hb: f64, r_lb: f64) -> Result<Self> {
        let def = Self { kind, r_ha, r_la, r_hb, r_lb, reference_e_la: 1.0 };
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        let rs = [self.r_ha, self.r_la, self.r_hb, self.r_lb];
        if rs.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Domain(format!("resistances must be positive, got {rs:?}")));
        }
        if self.r_ha < self.r_la || self.r_hb < self.r_lb {
            return Err(Error::Domain("high resistor must not be below low resistor within a party".into()));
        }
        if !(self.reference_e_la.is_finite() && self.reference_e_la >= 0.0) {
            return Err(Error::Domain(format!("reference_e_la must be >= 0, got {}", self.reference_e_la)));
        }
        match self.kind {
            SchemeKind::Kljn if self.r_ha != self.r_hb || self.r_la != self.r_lb => {
                Err(Error::Domain("KLJN parties must own identical resistor pairs".into()))
            }
            SchemeKind::Fck1 => check_product_rule(self),
            _ => Ok(()),
        }
    }

    pub fn resistance(&self, party_is_alice: bool, role: Role) -> f64 {
        match (party_is_alice, role) {
            (true, Role::High) => self.r_ha,
            (true, Role::Low) => self.r_la,
            (false, Role::High) => self.r_hb,
            (false, Role::Low) => self.r_lb,
        }
    }
}

fn check_product_rule(def: &SchemeDef) -> Result<()> {
    let lhs = def.r_ha * def.r_lb;
    let rhs = def.r_la * def.r_hb;
    if (lhs - rhs).abs() > FCK1_PRODUCT_TOL * lhs.max(rhs) {
        return Err(Error::Domain(format!("FCK1 product rule violated: R_HA·R_LB = {lhs} but R_LA·R_HB = {rhs}")));
    }
    Ok(())
}

/// Mean-square intensities (V²) of `U_{H,A}`, `U_{L,A}`, `U_{H,B}`, `U_{L,B}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub e_ha: f64,
    pub e_la: f64,
    pub e_hb: f64,
    pub e_lb: f64,
}

impl NoiseLevels {
    pub fn validate(&self) -> Result<()> {
        let es = [self.e_ha, self.e_la, self.e_hb, self.e_lb];
        if es.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Domain(format!("noise levels must be >= 0, got {es:?}")));
        }
        Ok(())
    }

    pub fn intensity(&self, party_is_alice: bool, role: Role) -> f64 {
        match (party_is_alice, role) {
            (true, Role::High) => self.e_ha,
            (true, Role::Low) => self.e_la,
            (false, Role::High) => self.e_hb,
            (false, Role::Low) => self.e_lb,
        }
    }
}

/// The two secure bit situations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arrangement {
    #[serde(rename = "LH")]
    Lh,
    #[serde(rename = "HL")]
    Hl,
}

impl Arrangement {
    pub const BOTH: [Arrangement; 2] = [Arrangement::Lh, Arrangement::Hl];

    pub fn as_str(self) -> &'static str {
        match self {
            Arrangement::Lh => "LH",
            Arrangement::Hl => "HL",
        }
    }

    pub fn roles(self) -> (Role, Role) {
        match self {
            Arrangement::Lh => (Role::Low, Role::High),
            Arrangement::Hl => (Role::High, Role::Low),
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Arrangement::Lh => Arrangement::Hl,
            Arrangement::Hl => Arrangement::Lh,
        }
    }
}

impl std::fmt::Display for Arrangement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn kljn_levels(r_h: f64, r_l: f64, c: f64) -> Result<NoiseLevels> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Domain(format!("per-ohm intensity must be >= 0, got {c}")));
    }
    Ok(NoiseLevels { e_ha: c * r_h, e_la: c * r_l, e_hb: c * r_h, e_lb: c * r_l })
}

/// Inverts the closed-form moments of a loop `(r_a, r_b)` for `(e_a, e_b)`.
pub fn levels_from_observables(r_a: f64, r_b: f64, msq_u: f64, msq_i: f64) -> Result<(f64, f64)> {
    if !(r_a > 0.0 && r_b > 0.0) {
        return Err(Error::Domain(format!("resistances must be positive, got {r_a} / {r_b}")));
    }
    if !(msq_u >= 0.0 && msq_i >= 0.0) {
        return Err(Error::Domain(format!("observables must be >= 0, got {msq_u} / {msq_i}")));
    }
    let det = r_b * r_b - r_a * r_a;
    if det.abs() <= 1e-12 * r_b.max(r_a).powi(2) {
        return Err(Error::Singular(format!(
            "R_A = R_B = {r_a} Ω fixes only e_a + e_b; supply an anchor for the split"
        )));
    }
    let s2 = (r_a + r_b).powi(2);
    let sum_e = msq_i * s2;
    let weighted = msq_u * s2;
    let mut e_a = (weighted - sum_e * r_a * r_a) / det;
    let mut e_b = (sum_e * r_b * r_b - weighted) / det;
    // Rounding can leave a feasible zero slightly negative.
    let slack = 1e-12 * sum_e.max(f64::MIN_POSITIVE);
    if e_a < 0.0 && e_a > -slack {
        e_a = 0.0;
    }
    if e_b < 0.0 && e_b > -slack {
        e_b = 0.0;
    }
    if e_a < 0.0 || e_b < 0.0 {
        return Err(Error::Domain(format!(
            "observables <U²> = {msq_u}, <I²> = {msq_i} are infeasible for R_A = {r_a}, R_B = {r_b} (e_a = {e_a}, e_b = {e_b})"
        )));
    }
    Ok((e_a, e_b))
}

/// Like [`levels_from_observables`], but when `r_a = r_b` assigns
/// `e_a = anchor` and the rest of `e_a + e_b` to `e_b`.
pub fn levels_from_observables_anchored(
    r_a: f64,
    r_b: f64,
    msq_u: f64,
    msq_i: f64,
    anchor_e_a: f64,
) -> Result<(f64, f64)> {
    match levels_from_observables(r_a, r_b, msq_u, msq_i) {
        Err(Error::Singular(_)) => {
            let sum_e = msq_i * (r_a + r_b).powi(2);
            let e_b = sum_e - anchor_e_a;
            if anchor_e_a < 0.0 || e_b < 0.0 {
                return Err(Error::Domain(format!(
                    "anchor e_a = {anchor_e_a} exceeds the available e_a + e_b = {sum_e}"
                )));
            }
            Ok((anchor_e_a, e_b))
        }
        other => other,
    }
}

/// How well a VMG solution matches its constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    /// |<U_w²>_LH - <U_w²>_HL| / <U_w²>_LH.
    pub du_rel: f64,
    /// |<I_w²>_LH - <I_w²>_HL| / <I_w²>_LH.
    pub di_rel: f64,
    pub p_ab_lh: f64,
    pub p_ab_hl: f64,
    pub e_hb_anchor: f64,
}

/// `e_hb` values shipped for the three VMG resistor sets, obtained by
/// inverting the published wire moments.
pub const VMG_SHIPPED_ANCHORS: [(&str, f64); 3] = [("vmg1", 87.6), ("vmg2", 0.48), ("vmg3", 1.76)];

fn shipped_anchor(def: &SchemeDef) -> Option<f64> {
    VMG_SHIPPED_ANCHORS.iter().find_map(|(name, anchor)| {
        let preset = preset_def(name).ok()?;
        let same = [(preset.r_ha, def.r_ha), (preset.r_la, def.r_la), (preset.r_hb, def.r_hb), (preset.r_lb, def.r_lb)]
            .iter()
            .all(|(a, b)| a == b);
        same.then_some(*anchor)
    })
}

/// Affine map `e_hb -> (e_ha, e_lb)` defined by the two matching equations.
fn vmg_solution_affine(def: &SchemeDef) -> Result<impl Fn(f64) -> Result<(f64, f64)> + '_> {
    let (r_a, r_b) = (def.r_ha, def.r_lb);
    let det = r_b * r_b - r_a * r_a;
    if det.abs() <= 1e-12 * r_b.max(r_a).powi(2) {
        return Err(Error::Singular(format!("R_HA = R_LB = {r_a} Ω: HL cannot match both LH moments")));
    }
    let s2_hl = (r_a + r_b).powi(2);
    Ok(move |e_hb: f64| {
        let lh = analytic_moments(&LoopConfig { r_a: def.r_la, r_b: def.r_hb, e_a: def.reference_e_la, e_b: e_hb });
        let sum_e = lh.msq_i * s2_hl;
        let weighted = lh.msq_u * s2_hl;
        Ok(((weighted - sum_e * r_a * r_a) / det, (sum_e * r_b * r_b - weighted) / det))
    })
}

/// Range of `e_hb` for which the matched `e_ha`, `e_lb` are non-negative.
pub fn vmg_feasible_anchor_interval(def: &SchemeDef) -> Result<(f64, f64)> {
    let solve = vmg_solution_affine(def)?;
    let (a0, b0) = solve(0.0)?;
    let (a1, b1) = solve(1.0)?;
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    for (c0, slope) in [(a0, a1 - a0), (b0, b1 - b0)] {
        // c0 + slope·x >= 0
        if slope > 0.0 {
            lo = lo.max(-c0 / slope);
        } else if slope < 0.0 {
            hi = hi.min(-c0 / slope);
        } else if c0 < 0.0 {
            return Ok((f64::NAN, f64::NAN));
        }
    }
    Ok((lo, hi))
}

pub fn vmg_levels(def: &SchemeDef, e_hb_anchor: Option<f64>) -> Result<(NoiseLevels, MatchingReport)> {
    def.validate()?;
    let e_hb = match e_hb_anchor.or_else(|| shipped_anchor(def)) {
        Some(a) => a,
        None => {
            return Err(Error::Config(
                "no e_hb anchor supplied and the resistor set is not a shipped VMG preset".into(),
            ))
        }
    };
    if !(e_hb.is_finite() && e_hb >= 0.0) {
        return Err(Error::Domain(format!("e_hb anchor must be >= 0, got {e_hb}")));
    }
    let (e_ha, e_lb) = vmg_solution_affine(def)?(e_hb)?;
    if e_ha < 0.0 || e_lb < 0.0 {
        let (lo, hi) = vmg_feasible_anchor_interval(def)?;
        return Err(Error::InfeasibleAnchor { anchor: e_hb, lo, hi });
    }
    let levels = NoiseLevels { e_ha, e_la: def.reference_e_la, e_hb, e_lb };
    let lh = analytic_moments(&arrangement_config(def, &levels, Arrangement::Lh));
    let hl = analytic_moments(&arrangement_config(def, &levels, Arrangement::Hl));
    let rel = |a: f64, b: f64| if a == 0.0 { (a - b).abs() } else { (a - b).abs() / a.abs() };
    let report = MatchingReport {
        du_rel: rel(lh.msq_u, hl.msq_u),
        di_rel: rel(lh.msq_i, hl.msq_i),
        p_ab_lh: lh.p_ab,
        p_ab_hl: hl.p_ab,
        e_hb_anchor: e_hb,
    };
    Ok((levels, report))
}

pub fn fck1_fourth_resistor(r_ha: f64, r_la: f64, r_lb: f64) -> Result<f64> {
    if ![r_ha, r_la, r_lb].iter().all(|r| r.is_finite() && *r > 0.0) {
        return Err(Error::Domain("resistances must be positive".into()));
    }
    Ok(r_ha * r_lb / r_la)
}

pub fn fck1_levels(def: &SchemeDef) -> Result<NoiseLevels> {
    def.validate()?;
    check_product_rule(def)?;
    let c1 = def.reference_e_la / def.r_la;
    let c2 = c1 * (def.r_ha + def.r_lb) / (def.r_la + def.r_hb);
    Ok(NoiseLevels { e_ha: c2 * def.r_ha, e_la: def.reference_e_la, e_hb: c1 * def.r_hb, e_lb: c2 * def.r_lb })
}

/// Loop for an arbitrary pair of choices, including the insecure HH and LL.
pub fn connection_config(def: &SchemeDef, levels: &NoiseLevels, alice: Role, bob: Role) -> LoopConfig {
    LoopConfig {
        r_a: def.resistance(true, alice),
        e_a: levels.intensity(true, alice),
        r_b: def.resistance(false, bob),
        e_b: levels.intensity(false, bob),
    }
}

pub fn arrangement_config(def: &SchemeDef, levels: &NoiseLevels, a: Arrangement) -> LoopConfig {
    let (alice, bob) = a.roles();
    connection_config(def, levels, alice, bob)
}

/// Shipped preset names, in report order.
pub const PRESET_NAMES: [&str; 5] = ["kljn", "vmg1", "vmg2", "vmg3", "fck1"];

pub fn preset_def(name: &str) -> Result<SchemeDef> {
    let (kind, r_ha, r_la, r_hb, r_lb) = match name {
        "kljn" => (SchemeKind::Kljn, 10e3, 1e3, 10e3, 1e3),
        "vmg1" => (SchemeKind::Vmg, 16.7e3, 100.0, 16.7e3, 278.0),
        "vmg2" => (SchemeKind::Vmg, 46.4e3, 278.0, 278.0, 100.0),
        "vmg3" => (SchemeKind::Vmg, 360e3, 100.0, 6e3, 2.2e3),
        "fck1" => (SchemeKind::Fck1, 100e3, 10e3, 10e3, 1e3),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    SchemeDef::new(kind, r_ha, r_la, r_hb, r_lb)
}

/// A scheme with its intensities resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scheme {
    pub name: String,
    pub def: SchemeDef,
    pub levels: NoiseLevels,
    /// Present for VMG schemes.
    pub matching: Option<MatchingReport>,
}

impl Scheme {
    pub fn preset(name: &str) -> Result<Self> {
        let def = preset_def(name)?;
        Self::resolve(name, def, None)
    }

    /// Builds levels from the definition; `explicit` is required for (and
    /// only used by) `EXPLICIT` schemes.
    pub fn resolve(name: &str, def: SchemeDef, explicit: Option<NoiseLevels>) -> Result<Self> {
        def.validate()?;
        let (levels, matching) = match def.kind {
            SchemeKind::Kljn => (kljn_levels(def.r_ha, def.r_la, def.reference_e_la / def.r_la)?, None),
            SchemeKind::Vmg => {
                let (l, m) = vmg_levels(&def, None)?;
                (l, Some(m))
            }
            SchemeKind::Fck1 => (fck1_levels(&def)?, None),
            SchemeKind::Explicit => {
                let l = explicit.ok_or_else(|| Error::Config("EXPLICIT scheme needs noise levels".into()))?;
                l.validate()?;
                (l, None)
            }
        };
        Ok(Self { name: name.to_string(), def, levels, matching })
    }

    pub fn loop_config(&self, a: Arrangement) -> LoopConfig {
        arrangement_config(&self.def, &self.levels, a)
    }

    pub fn moments(&self, a: Arrangement) -> Moments {
        analytic_moments(&self.loop_config(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(a.abs())
    }

    #[test]
    fn kljn_example_levels() {
        let l = kljn_levels(10e3, 1e3, 1e-3).unwrap();
        assert!(close(l.e_la, 1.0, 1e-15) && close(l.e_ha, 10.0, 1e-15));
        assert_eq!((l.e_lb, l.e_hb), (l.e_la, l.e_ha));
        assert_eq!(kljn_levels(10e3, 1e3, 0.0).unwrap(), NoiseLevels { e_ha: 0.0, e_la: 0.0, e_hb: 0.0, e_lb: 0.0 });
    }

    #[test]
    fn kljn_preset_lh_config() {
        let s = Scheme::preset("kljn").unwrap();
        let lh = s.loop_config(Arrangement::Lh);
        assert!(close(lh.r_a, 1e3, 0.0) && close(lh.r_b, 10e3, 0.0));
        assert!(close(lh.e_a, 1.0, 1e-15) && close(lh.e_b, 10.0, 1e-15));
        let hl = s.loop_config(Arrangement::Hl);
        assert_eq!(hl, lh.swapped());
        for a in Arrangement::BOTH {
            assert_eq!(s.moments(a).p_ab, 0.0);
        }
    }

    #[test]
    fn explicit_levels_pass_through() {
        let def = SchemeDef::new(SchemeKind::Explicit, 5e3, 2e3, 7e3, 3e3).unwrap();
        let levels = NoiseLevels { e_ha: 4.0, e_la: 3.0, e_hb: 2.0, e_lb: 1.0 };
        let s = Scheme::resolve("custom", def, Some(levels)).unwrap();
        assert_eq!(s.levels, levels);
        assert_eq!(s.loop_config(Arrangement::Hl), LoopConfig { r_a: 5e3, e_a: 4.0, r_b: 3e3, e_b: 1.0 });
        assert!(Scheme::resolve("custom", def, None).is_err());
    }

    #[test]
    fn inversion_of_vmg1_rows() {
        let (e_a, e_b) = levels_from_observables(100.0, 16.7e3, 0.992, 0.314e-6).unwrap();
        assert!(close(e_a, 1.0, 0.01), "e_a = {e_a}");
        assert!(close(e_b, 87.6, 0.01), "e_b = {e_b}");
        let (e_a, e_b) = levels_from_observables(16.7e3, 278.0, 0.992, 0.314e-6).unwrap();
        assert!(close(e_a, 89.5, 0.01), "e_a = {e_a}");
        assert!(close(e_b, 1.0, 0.01), "e_b = {e_b}");
        // plug back
        let m = analytic_moments(&LoopConfig { r_a: 16.7e3, r_b: 278.0, e_a, e_b });
        assert!(close(m.msq_u, 0.992, 1e-12) && close(m.msq_i, 0.314e-6, 1e-12));
        assert_eq!(levels_from_observables(10.0, 20.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn inversion_errors() {
        assert!(matches!(levels_from_observables(278.0, 278.0, 0.37, 4.79e-6), Err(Error::Singular(_))));
        // <U²> larger than any mix of the two resistors allows
        assert!(matches!(levels_from_observables(100.0, 1e3, 10.0, 1e-9), Err(Error::Domain(_))));
    }

    #[test]
    fn anchored_inversion_handles_equal_resistors() {
        let m = analytic_moments(&LoopConfig { r_a: 278.0, r_b: 278.0, e_a: 1.0, e_b: 0.48 });
        let (e_a, e_b) = levels_from_observables_anchored(278.0, 278.0, m.msq_u, m.msq_i, 1.0).unwrap();
        assert_eq!(e_a, 1.0);
        assert!(close(e_b, 0.48, 1e-12));
    }

    #[test]
    fn vmg1_preset_levels() {
        let (l, r) = vmg_levels(&preset_def("vmg1").unwrap(), None).unwrap();
        assert_eq!((l.e_la, l.e_hb), (1.0, 87.6));
        assert!(close(l.e_ha, 89.5, 0.01), "e_ha = {}", l.e_ha);
        assert!(close(l.e_lb, 1.0, 0.01), "e_lb = {}", l.e_lb);
        assert!(r.du_rel <= 1e-9 && r.di_rel <= 1e-9);
        let s = Scheme::preset("vmg1").unwrap();
        for a in Arrangement::BOTH {
            let m = s.moments(a);
            assert!(close(m.msq_u, 0.992, 0.005) && close(m.msq_i, 0.314e-6, 0.005));
        }
    }

    #[test]
    fn vmg2_preset_levels() {
        let (l, r) = vmg_levels(&preset_def("vmg2").unwrap(), None).unwrap();
        assert!(close(l.e_ha, 1.035e4, 0.005), "e_ha = {}", l.e_ha);
        assert!(close(l.e_lb, 0.32, 0.02), "e_lb = {}", l.e_lb);
        assert!(close(r.p_ab_lh, 0.47e-3, 0.01) && close(r.p_ab_hl, 0.47e-3, 0.01));
    }

    #[test]
    fn vmg_infeasible_anchor_names_interval() {
        let def = preset_def("vmg1").unwrap();
        let (lo, hi) = vmg_feasible_anchor_interval(&def).unwrap();
        assert!(lo <= 87.6 && 87.6 <= hi);
        let bad = if hi.is_finite() { hi * 2.0 + 1.0 } else { 0.0 };
        match vmg_levels(&def, Some(bad)) {
            Err(Error::InfeasibleAnchor { lo: l, hi: h, .. }) => assert_eq!((l, h), (lo, hi)),
            other => panic!("expected infeasible anchor, got {other:?}"),
        }
        // Just inside both ends stays feasible.
        vmg_levels(&def, Some(lo + (hi.min(1e6) - lo) * 1e-6)).unwrap();
    }

    #[test]
    fn vmg_unknown_resistors_need_an_anchor() {
        let def = SchemeDef::new(SchemeKind::Vmg, 5e3, 1e3, 6e3, 2e3).unwrap();
        assert!(matches!(vmg_levels(&def, None), Err(Error::Config(_))));
    }

    #[test]
    fn vmg_equilibrium_anchor_reduces_to_kljn() {
        let def = SchemeDef::new(SchemeKind::Vmg, 10e3, 1e3, 10e3, 1e3).unwrap();
        let (l, r) = vmg_levels(&def, Some(1.0 * 10e3 / 1e3)).unwrap();
        let k = kljn_levels(10e3, 1e3, 1e-3).unwrap();
        for (a, b) in [(l.e_ha, k.e_ha), (l.e_la, k.e_la), (l.e_hb, k.e_hb), (l.e_lb, k.e_lb)] {
            assert!(close(a, b, 1e-12));
        }
        assert!(r.p_ab_lh.abs() < 1e-18 && r.p_ab_hl.abs() < 1e-15);
    }

    #[test]
    fn vmg_equilibrium_anchor_on_product_set_matches_fck1() {
        let fck = preset_def("fck1").unwrap();
        let def = SchemeDef { kind: SchemeKind::Vmg, ..fck };
        let (l, _) = vmg_levels(&def, Some(fck.reference_e_la * fck.r_hb / fck.r_la)).unwrap();
        let f = fck1_levels(&fck).unwrap();
        for (a, b) in [(l.e_ha, f.e_ha), (l.e_la, f.e_la), (l.e_hb, f.e_hb), (l.e_lb, f.e_lb)] {
            assert!(close(a, b, 1e-9), "{a} vs {b}");
        }
    }

    #[test]
    fn fck1_rule_examples() {
        assert_eq!(fck1_fourth_resistor(100e3, 10e3, 1e3).unwrap(), 10e3);
        assert_eq!(fck1_fourth_resistor(470.0, 470.0, 470.0).unwrap(), 470.0);
        assert_eq!(fck1_fourth_resistor(40e3, 10e3, 2.5e3).unwrap(), 10e3);
    }

    #[test]
    fn fck1_preset_levels_and_moments() {
        let l = fck1_levels(&preset_def("fck1").unwrap()).unwrap();
        assert!(close(l.e_hb, 1.0, 1e-12));
        assert!(close(l.e_ha, 50.5, 1e-12));
        assert!(close(l.e_lb, 0.505, 1e-12));
        let s = Scheme::preset("fck1").unwrap();
        for a in Arrangement::BOTH {
            let m = s.moments(a);
            assert!(close(m.msq_u, 0.5, 1e-12));
            assert!(close(m.msq_i, 0.005e-6, 1e-12));
            assert!(m.p_ab.abs() < 1e-20);
        }
    }

    #[test]
    fn fck1_equal_resistors_is_kljn() {
        let def = SchemeDef::new(SchemeKind::Fck1, 1e3, 1e3, 1e3, 1e3).unwrap();
        assert_eq!(fck1_levels(&def).unwrap(), kljn_levels(1e3, 1e3, 1e-3).unwrap());
    }

    #[test]
    fn fck1_rejects_product_violation() {
        let def =
            SchemeDef { kind: SchemeKind::Fck1, r_ha: 100e3, r_la: 10e3, r_hb: 11e3, r_lb: 1e3, reference_e_la: 1.0 };
        assert!(fck1_levels(&def).is_err());
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(Scheme::preset("vmg9"), Err(Error::UnknownPreset(_))));
    }

    proptest! {
        #[test]
        fn fck1_moments_match_across_arrangements(
            r_la in 10.0..1e5f64, kh in 1.0..100.0f64, r_lb in 10.0..1e5f64, e_la in 0.01..10.0f64,
        ) {
            let r_ha = r_la * kh;
            let r_hb = fck1_fourth_resistor(r_ha, r_la, r_lb).unwrap();
            let def = SchemeDef { kind: SchemeKind::Fck1, r_ha, r_la, r_hb, r_lb, reference_e_la: e_la };
            let s = Scheme::resolve("p", def, None).unwrap();
            let (lh, hl) = (s.moments(Arrangement::Lh), s.moments(Arrangement::Hl));
            prop_assert!(close(lh.msq_u, hl.msq_u, 1e-12));
            prop_assert!(close(lh.msq_i, hl.msq_i, 1e-12));
            let scale = (lh.msq_u * lh.msq_i).sqrt();
            prop_assert!(lh.p_ab.abs() <= 1e-13 * scale && hl.p_ab.abs() <= 1e-13 * scale);
        }

        #[test]
        fn inversion_round_trip(r_a in 1.0..1e6f64, ratio in 1.01..1e3f64, e_a in 0.0..100.0f64, e_b in 0.0..100.0f64) {
            let r_b = r_a * ratio;
            let m = analytic_moments(&LoopConfig { r_a, r_b, e_a, e_b });
            let (ga, gb) = levels_from_observables(r_a, r_b, m.msq_u, m.msq_i).unwrap();
            let back = analytic_moments(&LoopConfig { r_a, r_b, e_a: ga, e_b: gb });
            prop_assert!((back.msq_u - m.msq_u).abs() <= 1e-12 * m.msq_u.max(1e-300));
            prop_assert!((back.msq_i - m.msq_i).abs() <= 1e-12 * m.msq_i.max(1e-300));
        }

        #[test]
        fn vmg_residuals_vanish(anchor_frac in 0.05..0.95f64) {
            for name in ["vmg1", "vmg2", "vmg3"] {
                let def = preset_def(name).unwrap();
                let (lo, hi) = vmg_feasible_anchor_interval(&def).unwrap();
                let hi = hi.min(lo + 1e4);
                let (l, r) = vmg_levels(&def, Some(lo + (hi - lo) * anchor_frac)).unwrap();
                prop_assert!(r.du_rel <= 1e-9 && r.di_rel <= 1e-9);
                prop_assert!(l.e_ha >= 0.0 && l.e_lb >= 0.0);
            }
        }
    }
}
