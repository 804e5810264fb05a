//! Absolute errors, the five-bin histogram and summary statistics.
//!
//! Quantiles use midpoint interpolation: with sorted values `x` and
//! `h = p * (n - 1)`, the quantile is `x[h]` when `h` is integral and
//! `(x[floor h] + x[ceil h]) / 2` otherwise.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower edges of the half-open bins; the last bin is `[1.0, inf)`.
pub const BIN_EDGES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

pub fn absolute_errors(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::Shape {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyData("absolute errors"));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect())
}

pub fn bin_errors(errors: &[f64]) -> Result<[f64; 5]> {
    if errors.is_empty() {
        return Err(Error::EmptyData("bin errors"));
    }
    let mut counts = [0usize; 5];
    for &e in errors {
        if !(e >= 0.0) {
            return Err(Error::Domain(format!("negative or NaN error {e}")));
        }
        let bin = BIN_EDGES.iter().rposition(|&edge| e >= edge).unwrap_or(0);
        counts[bin] += 1;
    }
    let n = errors.len() as f64;
    Ok(counts.map(|c| c as f64 / n))
}

fn midpoint_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    if lo == hi {
        sorted[lo]
    } else {
        0.5 * (sorted[lo] + sorted[hi])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// First, second and third quartile.
    pub quartiles: [f64; 3],
}

pub fn summarize(errors: &[f64]) -> Result<Summary> {
    if errors.is_empty() {
        return Err(Error::EmptyData("summary statistics"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quartiles = [0.25, 0.5, 0.75].map(|p| midpoint_quantile(&sorted, p));
    Ok(Summary {
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        median: quartiles[1],
        quartiles,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_id: String,
    pub t_pred: f64,
    pub t_true: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub model_id: String,
    pub n: usize,
    pub bins: [f64; 5],
    pub mean: f64,
    pub median: f64,
    pub quartiles: [f64; 3],
    pub per_frame_errors: Vec<f64>,
}

impl ErrorReport {
    pub fn build(model_id: &str, pred: &[f64], truth: &[f64]) -> Result<Self> {
        let errors = absolute_errors(pred, truth)?;
        let bins = bin_errors(&errors)?;
        let s = summarize(&errors)?;
        Ok(Self {
            model_id: model_id.to_string(),
            n: errors.len(),
            bins,
            mean: s.mean,
            median: s.median,
            quartiles: s.quartiles,
            per_frame_errors: errors,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

pub fn write_frame_csv(rows: &[FrameResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_frame_csv(path: &Path) -> Result<Vec<FrameResult>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn absolute_error_examples() {
        assert_eq!(absolute_errors(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let e = absolute_errors(&[34.2], &[34.0]).unwrap();
        assert!((e[0] - 0.2).abs() < 1e-12);
        assert!(matches!(
            absolute_errors(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape { left: 1, right: 2 })
        ));
    }

    #[test]
    fn absolute_errors_match_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p: Vec<f64> = (0..100).map(|_| rng.random_range(30.0..36.0)).collect();
        let t: Vec<f64> = (0..100).map(|_| rng.random_range(30.0..36.0)).collect();
        let e = absolute_errors(&p, &t).unwrap();
        for i in 0..100 {
            let d = if p[i] > t[i] { p[i] - t[i] } else { t[i] - p[i] };
            assert_eq!(e[i], d);
        }
    }

    #[test]
    fn bins_one_per_bucket_and_boundaries() {
        assert_eq!(bin_errors(&[0.1, 0.3, 0.6, 0.9, 1.5]).unwrap(), [0.2; 5]);
        assert_eq!(bin_errors(&[0.25]).unwrap(), [0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(bin_errors(&[1.0]).unwrap(), [0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(bin_errors(&[0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(bin_errors(&[0.1, -0.2]), Err(Error::Domain(_))));
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.median), (2.5, 2.5));
        assert_eq!(s.quartiles, [1.5, 2.5, 3.5]);
        let s = summarize(&[0.3]).unwrap();
        assert_eq!((s.mean, s.median), (0.3, 0.3));
        assert!(matches!(summarize(&[]), Err(Error::EmptyData(_))));
    }

    #[test]
    fn report_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let r = ErrorReport::build("dl", &[33.1, 34.7, 32.0], &[33.0, 34.0, 32.4]).unwrap();
        r.save_json(&dir.path().join("r.json")).unwrap();
        assert_eq!(ErrorReport::load_json(&dir.path().join("r.json")).unwrap(), r);
        let rows = vec![FrameResult {
            frame_id: "subject_01/frame_00003".into(),
            t_pred: 33.1 + 1e-13,
            t_true: 33.0,
            abs_error: 0.1 + 1e-13,
        }];
        write_frame_csv(&rows, &dir.path().join("r.csv")).unwrap();
        assert_eq!(read_frame_csv(&dir.path().join("r.csv")).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn fractions_sum_to_one(errors in prop::collection::vec(0.0f64..3.0, 1..200)) {
            let b = bin_errors(&errors).unwrap();
            prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn binning_is_permutation_invariant(
            pairs in prop::collection::vec((30.0f64..36.0, 30.0f64..36.0), 1..100),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (ps, ts): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
            prop_assert_eq!(
                bin_errors(&absolute_errors(&p, &t).unwrap()).unwrap(),
                bin_errors(&absolute_errors(&ps, &ts).unwrap()).unwrap()
            );
        }

        #[test]
        fn shifted_predictions_recompute_consistently(
            pairs in prop::collection::vec((30.0f64..36.0, 30.0f64..36.0), 1..50),
            c in 0.01f64..2.0,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let shifted: Vec<f64> = p.iter().map(|v| v + c).collect();
            let errs = absolute_errors(&shifted, &t).unwrap();
            let direct: Vec<f64> = shifted.iter().zip(&t).map(|(a, b)| (a - b).abs()).collect();
            prop_assert_eq!(bin_errors(&errs).unwrap(), bin_errors(&direct).unwrap());
        }

        #[test]
        fn json_round_trip(errors in prop::collection::vec(0.0f64..3.0, 1..50)) {
            let truth = vec![33.0; errors.len()];
            let pred: Vec<f64> = errors.iter().map(|e| 33.0 + e).collect();
            let r = ErrorReport::build("nisdl2", &pred, &truth).unwrap();
            let back: ErrorReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
