use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::slices::Phase;
use crate::data::volume::Plane;
use crate::error::{Error, Result};
use crate::eval::evaluate::{Averaging, Evaluation};

pub const METRICS_HEADER: &str = "model,plane,phase,precision,recall,f1,tp,fp,tn,fn,flags";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Architecture label, `baseline` or `plusplus`.
    pub model: String,
    pub plane: Plane,
    pub phase: Phase,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub dataset_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub threshold: f64,
    pub averaging: Averaging,
}

impl Provenance {
    pub fn new(config: &impl Serialize, dataset_id: &str, threshold: f64, averaging: Averaging) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Provenance { config_hash: config_hash(config), dataset_id: dataset_id.to_string(), timestamp, threshold, averaging }
    }
}

/// Hex SHA-256 of the JSON form of `config`.
pub fn config_hash(config: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Percent with two decimals.
pub fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn plane_order(p: Plane) -> usize {
    Plane::ALL.iter().position(|&q| q == p).unwrap()
}

fn model_order(m: &str) -> (usize, &str) {
    (if m == "baseline" { 0 } else { 1 }, m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl MetricsReport {
    pub fn new(mut rows: Vec<ReportRow>, provenance: Provenance) -> Self {
        rows.sort_by(|a, b| {
            (plane_order(a.plane), model_order(&a.model), a.phase).cmp(&(plane_order(b.plane), model_order(&b.model), b.phase))
        });
        MetricsReport { rows, provenance }
    }

    /// Deterministic CSV; ratios as percentages with six decimals.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{METRICS_HEADER}\n");
        for r in &self.rows {
            let (m, c) = (&r.evaluation.metrics, &r.evaluation.counts);
            writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{}",
                r.model,
                r.plane,
                r.phase,
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                m.flags.describe()
            )
            .unwrap();
        }
        s
    }

    /// Table with columns Plane | Model | Phase | Precision | Recall | F1.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Plane | Model | Phase | Precision | Recall | F1 |\n");
        s.push_str("|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let m = &r.evaluation.metrics;
            let flag = if m.flags.any() { " *" } else { "" };
            writeln!(
                s,
                "| {} | {} | {} | {} | {} | {}{} |",
                r.plane,
                r.model,
                r.phase,
                pct(m.precision),
                pct(m.recall),
                pct(m.f1),
                flag
            )
            .unwrap();
        }
        if self.rows.iter().any(|r| r.evaluation.metrics.flags.any()) {
            s.push_str("\n\\* a ratio had a zero denominator and is reported as 0\n");
        }
        s
    }

    /// Writes `<stem>.csv`, `<stem>.md` and the `<stem>.json` sidecar.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        fs::write(dir.join(format!("{stem}.md")), self.to_markdown())?;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    /// Merges rows of several reports; provenance comes from the first.
    pub fn merge(reports: Vec<MetricsReport>) -> Result<Self> {
        let mut it = reports.into_iter();
        let first = it.next().ok_or_else(|| Error::EmptyDataset("no reports to merge".into()))?;
        let mut rows = first.rows;
        for r in it {
            rows.extend(r.rows);
        }
        Ok(MetricsReport::new(rows, first.provenance))
    }
}
