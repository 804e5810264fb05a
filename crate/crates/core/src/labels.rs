//! Sparse temperature traces and the dense 5 s label grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WINDOW_S: f64 = 5.0;
pub const PLAUSIBLE_C: (f64, f64) = (20.0, 45.0);
/// iButton DS192H uncertainty.
pub const IBUTTON_UNCERTAINTY_C: f64 = 0.125;

#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureTrace {
    samples: Vec<(f64, f64)>,
    pub source_uncertainty: f64,
}

impl TemperatureTrace {
    pub fn new(samples: Vec<(f64, f64)>, source_uncertainty: f64) -> Result<Self> {
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidTrace(format!(
                    "times not strictly increasing at {} s -> {} s",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(t, c)) = samples
            .iter()
            .find(|(_, c)| !(PLAUSIBLE_C.0..=PLAUSIBLE_C.1).contains(c))
        {
            return Err(Error::InvalidTrace(format!(
                "{c} degC at {t} s outside plausibility band [{}, {}]",
                PLAUSIBLE_C.0, PLAUSIBLE_C.1
            )));
        }
        Ok(Self {
            samples,
            source_uncertainty,
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
        let mut samples = Vec::new();
        for row in reader.deserialize::<CsvRow>() {
            let row = row.map_err(|e| Error::format(path, e))?;
            samples.push((row.time_s, row.temp_c));
        }
        Self::new(samples, IBUTTON_UNCERTAINTY_C)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.samples)
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    time_s: f64,
    temp_c: f64,
}

fn write_rows(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for &(time_s, temp_c) in rows {
        writer
            .serialize(CsvRow { time_s, temp_c })
            .map_err(|e| Error::format(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Temperatures on a 5 s grid anchored at the first sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLabels {
    pub grid: Vec<(f64, f64)>,
    pub window_s: f64,
    /// Time of the last source sample; queries past it are rejected.
    pub end: f64,
}

impl DenseLabels {
    pub fn start(&self) -> f64 {
        self.grid[0].0
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.grid)
    }
}

pub fn interpolate(trace: &TemperatureTrace) -> Result<DenseLabels> {
    let s = trace.samples();
    if s.len() < 2 {
        return Err(Error::InsufficientData {
            what: "interpolation",
            needed: 2,
            got: s.len(),
        });
    }
    let (t0, end) = (s[0].0, s[s.len() - 1].0);
    let mut grid = Vec::new();
    let mut seg = 0;
    for k in 0.. {
        let t = t0 + WINDOW_S * k as f64;
        if t > end {
            break;
        }
        while seg + 2 < s.len() && t >= s[seg + 1].0 {
            seg += 1;
        }
        let (ta, ya) = s[seg];
        let (tb, yb) = s[seg + 1];
        let y = if t == tb {
            yb
        } else {
            ya + (yb - ya) * (t - ta) / (tb - ta)
        };
        grid.push((t, y));
    }
    Ok(DenseLabels {
        grid,
        window_s: WINDOW_S,
        end,
    })
}

/// Grid value of the window containing `t`.
pub fn label_frame(labels: &DenseLabels, t: f64) -> Result<f64> {
    let start = labels.start();
    if !(start..=labels.end).contains(&t) {
        return Err(Error::OutOfRange {
            t,
            start,
            end: labels.end,
        });
    }
    let idx = ((t - start) / labels.window_s).floor() as usize;
    Ok(labels.grid[idx.min(labels.grid.len() - 1)].1)
}
