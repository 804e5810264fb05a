//! Per-subject skin sensitivity index: OLS fit of `T = k * S + b`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsiRecord {
    #[serde(skip)]
    pub subject_id: String,
    pub k: f64,
    pub b: f64,
    pub residual_rmse: f64,
    pub n_points: usize,
}

impl SsiRecord {
    pub fn with_subject(mut self, id: impl Into<String>) -> Self {
        self.subject_id = id.into();
        self
    }
}

pub fn fit_ssi(pairs: &[(f64, f64)]) -> Result<SsiRecord> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "SSI fit",
            needed: 2,
            got: n,
        });
    }
    let s0 = pairs[0].0;
    if pairs.iter().all(|&(s, _)| s == s0) {
        return Err(Error::DegenerateDesign(format!(
            "all {n} saturations equal {s0}"
        )));
    }
    let nf = n as f64;
    let s_mean = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let t_mean = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(s, t) in pairs {
        sxx += (s - s_mean) * (s - s_mean);
        sxy += (s - s_mean) * (t - t_mean);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign("zero saturation variance".into()));
    }
    let k = sxy / sxx;
    let b = t_mean - k * s_mean;
    let sse: f64 = pairs.iter().map(|&(s, t)| (t - k * s - b).powi(2)).sum();
    Ok(SsiRecord {
        subject_id: String::new(),
        k,
        b,
        residual_rmse: (sse / nf).sqrt(),
        n_points: n,
    })
}

pub fn predict_linear(record: &SsiRecord, s: f64) -> f64 {
    record.k * s + record.b
}

/// SSI records keyed by subject id, persisted as JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SsiTable(pub BTreeMap<String, SsiRecord>);

impl SsiTable {
    pub fn insert(&mut self, record: SsiRecord) {
        self.0.insert(record.subject_id.clone(), record);
    }

    pub fn get(&self, subject: &str) -> Option<&SsiRecord> {
        self.0.get(subject)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        for (id, rec) in table.0.iter_mut() {
            rec.subject_id = id.clone();
        }
        Ok(table)
    }
}
