use std::path::PathBuf;

use serde::Serialize;

use super::{create_output_dir, write_json, EnsembleSummary, ExperimentSpec, OutputFormat, SchemeEnsemble};
use crate::bitsim::BitSimulator;
use crate::circuit::{conditional_msq_at_zero, Moments};
use crate::error::Result;
use crate::schemes::{Arrangement, Scheme};

pub const TABLE1_HEADER: [&str; 9] =
    ["scheme", "bit", "r_a_ohm", "r_b_ohm", "msq_u_v2", "msq_i_a2", "p_ab_w", "msq_i_zc_a2", "source"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub scheme: String,
    pub bit: Arrangement,
    pub r_a_ohm: f64,
    pub r_b_ohm: f64,
    pub msq_u_v2: f64,
    pub msq_i_a2: f64,
    pub p_ab_w: f64,
    pub msq_i_zc_a2: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleEntry {
    pub scheme: String,
    pub bit: Arrangement,
    pub summary: EnsembleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
    pub ensembles: Vec<EnsembleEntry>,
}

/// Gaussian pointwise-conditioning value used for the analytic crossing
/// column; falls back to `<I_w²>` when a variance vanishes.
pub fn analytic_zc(m: &Moments) -> f64 {
    conditional_msq_at_zero(m).unwrap_or(m.msq_i)
}

/// Analytic and ensemble rows for one scheme.
pub fn scheme_rows(scheme: &Scheme, spec: &ExperimentSpec) -> Result<(Vec<Table1Row>, Vec<EnsembleEntry>)> {
    let sim = BitSimulator::new(scheme, &spec.params, spec.sampling)?;
    let ens = SchemeEnsemble::simulate(&sim, spec.runs)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for a in Arrangement::BOTH {
        let cfg = scheme.loop_config(a);
        let m = scheme.moments(a);
        let summary = EnsembleSummary::of(ens.get(a));
        let row = |source, msq_u, msq_i, p_ab, zc| Table1Row {
            scheme: scheme.name.clone(),
            bit: a,
            r_a_ohm: cfg.r_a,
            r_b_ohm: cfg.r_b,
            msq_u_v2: msq_u,
            msq_i_a2: msq_i,
            p_ab_w: p_ab,
            msq_i_zc_a2: zc,
            source,
        };
        rows.push(row(Source::Analytic, m.msq_u, m.msq_i, m.p_ab, analytic_zc(&m)));
        rows.push(row(
            Source::Ensemble,
            summary.msq_u.mean,
            summary.msq_i.mean,
            summary.p_inst.mean,
            summary.msq_i_zc.mean,
        ));
        entries.push(EnsembleEntry { scheme: scheme.name.clone(), bit: a, summary });
    }
    Ok((rows, entries))
}

pub fn run_table1(spec: &ExperimentSpec) -> Result<Table1> {
    spec.validate()?;
    let mut table = Table1 { rows: Vec::new(), ensembles: Vec::new() };
    for scheme in spec.resolved_schemes()? {
        let (rows, entries) = scheme_rows(&scheme, spec)?;
        table.rows.extend(rows);
        table.ensembles.extend(entries);
    }
    Ok(table)
}

impl Table1 {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE1_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scheme.clone(),
                r.bit.to_string(),
                r.r_a_ohm.to_string(),
                r.r_b_ohm.to_string(),
                r.msq_u_v2.to_string(),
                r.msq_i_a2.to_string(),
                r.p_ab_w.to_string(),
                r.msq_i_zc_a2.to_string(),
                match r.source {
                    Source::Analytic => "analytic".to_string(),
                    Source::Ensemble => "ensemble".to_string(),
                },
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    /// Writes `table1.csv` and/or `table1.json` into the output directory.
    pub fn write(&self, spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
        let dir = create_output_dir(spec)?;
        let mut written = Vec::new();
        if spec.wants(OutputFormat::Csv) {
            let path = dir.join("table1.csv");
            std::fs::write(&path, self.to_csv()?)?;
            written.push(path);
        }
        if spec.wants(OutputFormat::Json) {
            let path = dir.join("table1.json");
            write_json(&path, self)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn row(&self, scheme: &str, bit: Arrangement, source: Source) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.scheme == scheme && r.bit == bit && r.source == source)
    }
}
