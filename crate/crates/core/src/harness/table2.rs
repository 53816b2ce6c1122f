use std::path::PathBuf;

use serde::Serialize;

use super::targets::{is_equilibrium_scheme, paper_row};
use super::{create_output_dir, write_json, ExperimentSpec, OutputFormat};
use crate::attack::{AttackData, AttackReport, Direction};
use crate::bitsim::BitSimulator;
use crate::error::Result;
use crate::schemes::{Arrangement, Scheme};

/// Accepted band for Eve's p on equilibrium schemes.
pub const NULL_P_BAND: (f64, f64) = (0.47, 0.53);

pub const TABLE2_HEADER: [&str; 12] = [
    "scheme",
    "direction",
    "p_ab_lh_w",
    "p_ab_hl_w",
    "p",
    "sigma",
    "threshold",
    "orientation",
    "dropped_bits",
    "paper_p",
    "p_deviation",
    "null_check",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub scheme: String,
    pub p_ab_lh_w: f64,
    pub p_ab_hl_w: f64,
    pub report: AttackReport,
    pub paper_p: Option<f64>,
    /// `p - paper_p`.
    pub p_deviation: Option<f64>,
    /// `Some(pass)` for equilibrium schemes, `None` otherwise.
    pub null_check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2 {
    pub rows: Vec<Table2Row>,
    /// Every equilibrium row's `|p - 0.5|` lies below every VMG row's, when
    /// at least one VMG row shows a leak beyond the null band. `None` when no
    /// VMG leak was detected.
    pub leak_ordering_holds: Option<bool>,
}

pub fn attack_row(scheme: &Scheme, report: AttackReport) -> Table2Row {
    let paper_p = paper_row(&scheme.name).map(|r| r.p);
    let null_check = is_equilibrium_scheme(&scheme.name).then(|| (NULL_P_BAND.0..=NULL_P_BAND.1).contains(&report.p));
    Table2Row {
        scheme: scheme.name.clone(),
        p_ab_lh_w: scheme.moments(Arrangement::Lh).p_ab,
        p_ab_hl_w: scheme.moments(Arrangement::Hl).p_ab,
        p_deviation: paper_p.map(|t| report.p - t),
        paper_p,
        null_check,
        report,
    }
}

pub fn leak_ordering(rows: &[&Table2Row]) -> Option<bool> {
    let leak = |r: &Table2Row| (r.report.p - 0.5).abs();
    let null_rows: Vec<f64> = rows.iter().filter(|r| is_equilibrium_scheme(&r.scheme)).map(|r| leak(r)).collect();
    let vmg_rows: Vec<f64> = rows.iter().filter(|r| !is_equilibrium_scheme(&r.scheme)).map(|r| leak(r)).collect();
    let detected = vmg_rows.iter().any(|&l| l > NULL_P_BAND.1 - 0.5);
    if !detected || null_rows.is_empty() {
        return None;
    }
    let worst_null = null_rows.iter().copied().fold(0.0, f64::max);
    Some(vmg_rows.iter().all(|&l| l > worst_null))
}

pub fn run_table2(spec: &ExperimentSpec) -> Result<Table2> {
    spec.validate()?;
    let mut rows = Vec::new();
    for scheme in spec.resolved_schemes()? {
        let sim = BitSimulator::new(&scheme, &spec.params, spec.sampling)?;
        let data = AttackData::simulate(&sim, &spec.attack)?;
        let report = data.attack(spec.attack.direction, spec.attack.n_batches)?;
        rows.push(attack_row(&scheme, report));
    }
    let leak_ordering_holds = leak_ordering(&rows.iter().collect::<Vec<_>>());
    Ok(Table2 { rows, leak_ordering_holds })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Table2 {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE2_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scheme.clone(),
                r.report.direction.as_str().to_string(),
                r.p_ab_lh_w.to_string(),
                r.p_ab_hl_w.to_string(),
                r.report.p.to_string(),
                r.report.sigma.to_string(),
                r.report.threshold.to_string(),
                r.report.orientation.sign().to_string(),
                r.report.dropped_bits.to_string(),
                opt(r.paper_p),
                opt(r.p_deviation),
                r.null_check.map(|b| if b { "pass" } else { "fail" }).unwrap_or("").to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    pub fn write(&self, spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
        let dir = create_output_dir(spec)?;
        let mut written = Vec::new();
        if spec.wants(OutputFormat::Csv) {
            let path = dir.join("table2.csv");
            std::fs::write(&path, self.to_csv()?)?;
            written.push(path);
        }
        if spec.wants(OutputFormat::Json) {
            let path = dir.join("table2.json");
            write_json(&path, self)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn row(&self, scheme: &str) -> Option<&Table2Row> {
        self.rows.iter().find(|r| r.scheme == scheme)
    }

    pub fn nulls_hold(&self) -> bool {
        self.rows.iter().all(|r| r.null_check != Some(false))
    }
}

/// Both attack directions from one set of simulated bits.
pub fn both_directions(data: &AttackData, n_batches: usize) -> Result<Vec<AttackReport>> {
    Direction::BOTH.iter().map(|&d| data.attack(d, n_batches)).collect()
}
