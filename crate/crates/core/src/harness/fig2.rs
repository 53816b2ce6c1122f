use std::path::PathBuf;

use serde::Serialize;

use super::{create_output_dir, write_json, ExperimentSpec, OutputFormat, SchemeEnsemble};
use crate::bitsim::{BitObservables, BitSimulator};
use crate::error::Result;
use crate::schemes::{Arrangement, Scheme};
use crate::stats::{self, bin_edges, histogram, ks_two_sample, KsResult};

pub const FIG2_HEADER: [&str; 7] = ["scheme", "statistic", "bit", "bin", "lower", "upper", "count"];
pub const FIG2_SUMMARY_HEADER: [&str; 10] =
    ["scheme", "statistic", "n_lh", "n_hl", "mean_lh", "mean_hl", "rel_separation", "ks_d", "ks_p", "dropped"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    MsqU,
    MsqI,
    /// `I_w²` at `U_w` crossings.
    MsqIZc,
    /// `U_w²` at `I_w` crossings.
    MsqUZc,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::MsqU, Statistic::MsqI, Statistic::MsqIZc, Statistic::MsqUZc];

    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::MsqU => "msq_u",
            Statistic::MsqI => "msq_i",
            Statistic::MsqIZc => "msq_i_zc",
            Statistic::MsqUZc => "msq_u_zc",
        }
    }

    pub fn value(self, o: &BitObservables) -> Option<f64> {
        match self {
            Statistic::MsqU => Some(o.msq_u),
            Statistic::MsqI => Some(o.msq_i),
            Statistic::MsqIZc => o.msq_i_at_u_zc,
            Statistic::MsqUZc => o.msq_u_at_i_zc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub scheme: String,
    pub statistic: Statistic,
    pub bit: Arrangement,
    /// Shared by the LH and HL histograms of the same statistic.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub dropped: usize,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// LH-vs-HL comparison of one statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Summary {
    pub n_lh: usize,
    pub n_hl: usize,
    pub mean_lh: f64,
    pub mean_hl: f64,
    /// `(mean_HL - mean_LH) / mean of both`.
    pub rel_separation: f64,
    pub ks: KsResult,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Entry {
    pub scheme: String,
    pub statistic: Statistic,
    pub summary: Fig2Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2 {
    pub runs: usize,
    pub histograms: Vec<Histogram>,
    pub summaries: Vec<Fig2Entry>,
}

pub fn summarize(lh: &[f64], hl: &[f64], dropped: usize) -> Fig2Summary {
    let (mean_lh, mean_hl) = (stats::mean(lh), stats::mean(hl));
    let avg = 0.5 * (mean_lh + mean_hl);
    Fig2Summary {
        n_lh: lh.len(),
        n_hl: hl.len(),
        mean_lh,
        mean_hl,
        rel_separation: if avg == 0.0 { 0.0 } else { (mean_hl - mean_lh) / avg },
        ks: ks_two_sample(lh, hl),
        dropped,
    }
}

/// Histograms and summaries from an already simulated ensemble.
pub fn histograms_for(scheme: &str, ens: &SchemeEnsemble, bins: usize) -> (Vec<Histogram>, Vec<Fig2Entry>) {
    let mut hists = Vec::new();
    let mut entries = Vec::new();
    for stat in Statistic::ALL {
        let pick = |obs: &[BitObservables]| obs.iter().filter_map(|o| stat.value(o)).collect::<Vec<f64>>();
        let (lh, hl) = (pick(&ens.lh), pick(&ens.hl));
        let all = lh.iter().chain(&hl);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let edges = bin_edges(lo, hi, bins);
        for (a, values, n) in [(Arrangement::Lh, &lh, ens.lh.len()), (Arrangement::Hl, &hl, ens.hl.len())] {
            hists.push(Histogram {
                scheme: scheme.to_string(),
                statistic: stat,
                bit: a,
                counts: histogram(values, &edges),
                edges: edges.clone(),
                dropped: n - values.len(),
            });
        }
        let dropped = ens.lh.len() - lh.len() + ens.hl.len() - hl.len();
        entries.push(Fig2Entry { scheme: scheme.to_string(), statistic: stat, summary: summarize(&lh, &hl, dropped) });
    }
    (hists, entries)
}

pub fn run_fig2(spec: &ExperimentSpec) -> Result<Fig2> {
    spec.validate()?;
    let mut fig = Fig2 { runs: spec.runs, histograms: Vec::new(), summaries: Vec::new() };
    for scheme in spec.resolved_schemes()? {
        let (h, s) = scheme_histograms(&scheme, spec)?;
        fig.histograms.extend(h);
        fig.summaries.extend(s);
    }
    Ok(fig)
}

pub fn scheme_histograms(scheme: &Scheme, spec: &ExperimentSpec) -> Result<(Vec<Histogram>, Vec<Fig2Entry>)> {
    let sim = BitSimulator::new(scheme, &spec.params, spec.sampling)?;
    let ens = SchemeEnsemble::simulate(&sim, spec.runs)?;
    Ok(histograms_for(&scheme.name, &ens, spec.histogram_bins))
}

impl Fig2 {
    pub fn histograms_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(FIG2_HEADER)?;
        for h in &self.histograms {
            for (k, c) in h.counts.iter().enumerate() {
                w.write_record([
                    h.scheme.clone(),
                    h.statistic.as_str().to_string(),
                    h.bit.to_string(),
                    k.to_string(),
                    h.edges[k].to_string(),
                    h.edges[k + 1].to_string(),
                    c.to_string(),
                ])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(FIG2_SUMMARY_HEADER)?;
        for e in &self.summaries {
            let s = &e.summary;
            w.write_record([
                e.scheme.clone(),
                e.statistic.as_str().to_string(),
                s.n_lh.to_string(),
                s.n_hl.to_string(),
                s.mean_lh.to_string(),
                s.mean_hl.to_string(),
                s.rel_separation.to_string(),
                s.ks.d.to_string(),
                s.ks.p_value.to_string(),
                s.dropped.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    pub fn write(&self, spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
        let dir = create_output_dir(spec)?;
        let mut written = Vec::new();
        if spec.wants(OutputFormat::Csv) {
            for (name, body) in
                [("fig2_histograms.csv", self.histograms_csv()?), ("fig2_summary.csv", self.summary_csv()?)]
            {
                let path = dir.join(name);
                std::fs::write(&path, body)?;
                written.push(path);
            }
        }
        if spec.wants(OutputFormat::Json) {
            let path = dir.join("fig2.json");
            write_json(&path, self)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn summary(&self, scheme: &str, statistic: Statistic) -> Option<&Fig2Summary> {
        self.summaries.iter().find(|e| e.scheme == scheme && e.statistic == statistic).map(|e| &e.summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_totals_conserve_runs() {
        let spec =
            ExperimentSpec { runs: 120, histogram_bins: 12, schemes: vec!["vmg3".into()], ..ExperimentSpec::default() };
        let fig = run_fig2(&spec).unwrap();
        assert_eq!(fig.histograms.len(), 8);
        for pair in fig.histograms.chunks(2) {
            assert_eq!(pair[0].edges, pair[1].edges);
            for h in pair {
                assert_eq!(h.total() as usize + h.dropped, 120);
                assert_eq!(h.counts.len(), 12);
            }
        }
        let csv = fig.histograms_csv().unwrap();
        assert_eq!(csv.lines().count(), 1 + 8 * 12);
    }
}
