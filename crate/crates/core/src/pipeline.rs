//! Stage orchestration over one run directory:
//!
//! ```text
//! run/
//!   config.toml
//!   synth/subject_XX/{frames/, clip.json, trace.csv, truth.json}
//!   magnified/subject_XX/{frames/, clip.json, trace.csv}
//!   split.json  ssi.json
//!   models/<variant>/{final.ckpt, ckpt_N.ckpt, run_log.csv}
//!   reports/<model>.json  reports/<model>.csv
//! ```
//!
//! Saturation for SSI and the linear baseline is read from the captured
//! frames; the networks see the magnified ROI.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ModelKind, RunConfig};
use crate::error::{Error, Result};
use crate::evaluate::{write_frame_csv, ErrorReport, FrameResult};
use crate::imaging::{crop_roi, mean_saturation};
use crate::labels::{interpolate, label_frame, TemperatureTrace};
use crate::magnify::{denoise, magnify_clip};
use crate::manifest::{read_clip, subject_dirs, write_clip};
use crate::models::{build_model, nipst_predict, Variant};
use crate::ssi::{fit_ssi, SsiTable};
use crate::synth::{write_dataset, SubjectProfile, TRACE_FILE};
use crate::training::{
    load_checkpoint, predict, split_dataset, split_subjects, train, Sample, SubjectSplit,
    TrainJob, TrainOutcome,
};

pub const SYNTH_DIR: &str = "synth";
pub const MAGNIFIED_DIR: &str = "magnified";
pub const MODELS_DIR: &str = "models";
pub const SPLIT_FILE: &str = "split.json";
pub const SSI_FILE: &str = "ssi.json";
pub const CONFIG_FILE: &str = "config.toml";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn model_dir(run: &Path, variant: Variant) -> PathBuf {
    run.join(MODELS_DIR).join(variant.id())
}

pub fn write_config(cfg: &RunConfig, run: &Path) -> Result<()> {
    ensure_dir(run)?;
    let path = run.join(CONFIG_FILE);
    fs::write(&path, cfg.to_toml_string()).map_err(|e| Error::io(&path, e))
}

pub fn run_synth(cfg: &RunConfig, run: &Path) -> Result<Vec<SubjectProfile>> {
    write_dataset(&cfg.synth, cfg.seed, &run.join(SYNTH_DIR))
}

/// Denoise, magnify and re-emit every captured clip under `data` with its
/// trace into `out`.
pub fn run_magnify(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let dst_root = out.join(MAGNIFIED_DIR);
    for (name, src) in subject_dirs(&data.join(SYNTH_DIR))? {
        let (clip, manifest) = read_clip(&src)?;
        let magnified = magnify_clip(&denoise(&clip, cfg.magnify.denoise_radius), &cfg.magnify)?;
        let dst = dst_root.join(&name);
        ensure_dir(&dst)?;
        write_clip(&magnified, manifest.roi, &dst)?;
        let trace = src.join(TRACE_FILE);
        fs::copy(&trace, dst.join(TRACE_FILE)).map_err(|e| Error::io(&trace, e))?;
    }
    Ok(())
}

/// Labeled ROI frames of one subject in time order.
pub struct SubjectFrames {
    pub subject: String,
    pub samples: Vec<Sample>,
    /// Leading frames used for SSI calibration.
    pub n_calibration: usize,
}

impl SubjectFrames {
    pub fn calibration(&self) -> &[Sample] {
        &self.samples[..self.n_calibration]
    }

    pub fn post_calibration(&self) -> &[Sample] {
        &self.samples[self.n_calibration..]
    }

    pub fn calibration_pairs(&self) -> Vec<(f64, f64)> {
        self.calibration()
            .iter()
            .map(|s| (s.mean_saturation, s.label))
            .collect()
    }
}

fn calibration_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(2.min(n), n)
}

/// Captured saturation, dense labels and (when `with_images`) magnified ROI
/// pixels for every labeled frame. SSI fields are left at zero.
pub fn load_subject(
    cfg: &RunConfig,
    run: &Path,
    subject: &str,
    with_images: bool,
) -> Result<SubjectFrames> {
    let raw_dir = run.join(SYNTH_DIR).join(subject);
    let (raw, manifest) = read_clip(&raw_dir)?;
    let labels = interpolate(&TemperatureTrace::read_csv(&raw_dir.join(TRACE_FILE))?)?;
    let magnified = if with_images {
        let dir = run.join(MAGNIFIED_DIR).join(subject);
        let (clip, _) = read_clip(&dir)?;
        if clip.len() != raw.len() {
            return Err(Error::format(
                &dir,
                format!("{} frames, captured clip has {}", clip.len(), raw.len()),
            ));
        }
        Some(clip)
    } else {
        None
    };
    let mut samples = Vec::with_capacity(raw.len());
    for (i, frame) in raw.frames.iter().enumerate() {
        let Ok(label) = label_frame(&labels, frame.timestamp) else {
            continue;
        };
        let image = match &magnified {
            Some(clip) => crop_roi(&clip.frames[i], &manifest.roi)?.data().to_vec(),
            None => Vec::new(),
        };
        samples.push(Sample {
            subject: subject.to_string(),
            frame_id: format!("{subject}/frame_{i:05}"),
            t: frame.timestamp,
            image,
            mean_saturation: mean_saturation(&crop_roi(frame, &manifest.roi)?),
            label,
            ssi: 0.0,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyData("labeled frames"));
    }
    let n_calibration = calibration_count(samples.len(), cfg.ssi.calibration_fraction);
    Ok(SubjectFrames {
        subject: subject.to_string(),
        samples,
        n_calibration,
    })
}

fn subject_names(run: &Path) -> Result<Vec<String>> {
    Ok(subject_dirs(&run.join(SYNTH_DIR))?
        .into_iter()
        .map(|(name, _)| name)
        .collect())
}

/// Writes `split.json` and `ssi.json` into `out`. Training subjects are fit
/// on all labeled frames, test subjects on their calibration prefix only.
pub fn run_fit_ssi(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(SubjectSplit, SsiTable)> {
    let subjects = subject_names(data)?;
    let split = split_subjects(&subjects, &cfg.train, cfg.seed)?;
    ensure_dir(out)?;
    split.save(&out.join(SPLIT_FILE))?;
    let records = subjects
        .par_iter()
        .map(|s| {
            let frames = load_subject(cfg, data, s, false)?;
            let pairs = if split.test.contains(s) {
                frames.calibration_pairs()
            } else {
                frames.samples.iter().map(|f| (f.mean_saturation, f.label)).collect()
            };
            Ok(fit_ssi(&pairs)?.with_subject(s.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = SsiTable::default();
    for r in records {
        table.insert(r);
    }
    table.save(&out.join(SSI_FILE))?;
    Ok((split, table))
}

/// Every subject's frames with SSI attached, in subject order.
pub fn load_dataset(cfg: &RunConfig, run: &Path) -> Result<(SubjectSplit, Vec<SubjectFrames>)> {
    let split = SubjectSplit::load(&run.join(SPLIT_FILE))?;
    let table = SsiTable::load(&run.join(SSI_FILE))?;
    let mut subjects: Vec<&String> = split.train.iter().chain(&split.test).collect();
    subjects.sort();
    let frames = subjects
        .into_iter()
        .map(|s| {
            let k = table
                .get(s)
                .ok_or_else(|| Error::format(&run.join(SSI_FILE), format!("no record for {s}")))?
                .k;
            let mut f = load_subject(cfg, run, s, true)?;
            for sample in &mut f.samples {
                sample.ssi = k;
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((split, frames))
}

fn flatten(frames: &[SubjectFrames]) -> Vec<Sample> {
    frames.iter().flat_map(|f| f.samples.iter().cloned()).collect()
}

fn train_on(
    cfg: &RunConfig,
    out: &Path,
    variant: Variant,
    split: &SubjectSplit,
    samples: &[Sample],
) -> Result<TrainOutcome> {
    let parts = split_dataset(samples, split, &cfg.train, cfg.seed)?;
    let held_out: BTreeSet<String> = split.test.iter().cloned().collect();
    let mut model = build_model(
        variant,
        &cfg.model.backbone,
        &mut skintemp_nn::seeded_rng(cfg.seed),
    )?;
    let dir = model_dir(out, variant);
    let job = TrainJob {
        train: &parts.train,
        validation: &parts.validation,
        held_out: &held_out,
        cfg: &cfg.train,
        seed: cfg.seed,
        out_dir: Some(&dir),
    };
    train(&mut model, &job)
}

/// Trains `variants` concurrently on the shared read-only dataset under
/// `data`, writing `out/models/<variant>/`.
pub fn run_train(
    cfg: &RunConfig,
    data: &Path,
    out: &Path,
    variants: &[Variant],
) -> Result<Vec<(Variant, TrainOutcome)>> {
    let (split, frames) = load_dataset(cfg, data)?;
    let samples = flatten(&frames);
    drop(frames);
    variants
        .par_iter()
        .map(|&v| Ok((v, train_on(cfg, out, v, &split, &samples)?)))
        .collect()
}

/// Test-subject frames after each calibration prefix.
fn test_frames<'a>(split: &SubjectSplit, frames: &'a [SubjectFrames]) -> Vec<&'a SubjectFrames> {
    let test: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
    frames
        .iter()
        .filter(|f| test.contains(f.subject.as_str()))
        .collect()
}

fn report_for(
    kind: ModelKind,
    checkpoint: Option<&Path>,
    run: &Path,
    tests: &[&SubjectFrames],
    batch: usize,
) -> Result<(ErrorReport, Vec<FrameResult>)> {
    let queries: Vec<&Sample> = tests.iter().flat_map(|f| f.post_calibration()).collect();
    let pred = match kind.variant() {
        None => {
            let mut out = Vec::with_capacity(queries.len());
            for f in tests {
                let s: Vec<f64> = f.post_calibration().iter().map(|q| q.mean_saturation).collect();
                out.extend(nipst_predict(&f.calibration_pairs(), &s)?);
            }
            out
        }
        Some(variant) => {
            let default = model_dir(run, variant).join("final.ckpt");
            let path = checkpoint.unwrap_or(&default);
            let (mut model, meta) = load_checkpoint(path)?;
            if meta.variant != variant {
                return Err(Error::format(
                    path,
                    format!("checkpoint holds {}, expected {variant}", meta.variant),
                ));
            }
            predict(&mut model, &queries, &meta.normalizer, batch)?
        }
    };
    let truth: Vec<f64> = queries.iter().map(|q| q.label).collect();
    let report = ErrorReport::build(kind.id(), &pred, &truth)?;
    let rows = queries
        .iter()
        .zip(&pred)
        .zip(&report.per_frame_errors)
        .map(|((q, &p), &e)| FrameResult {
            frame_id: q.frame_id.clone(),
            t_pred: p,
            t_true: q.label,
            abs_error: e,
        })
        .collect();
    Ok((report, rows))
}

/// Evaluates each model on the test subjects and writes
/// `<report_dir>/<model>.{json,csv}`. Checkpoints default to
/// `run/models/<variant>/final.ckpt`.
pub fn run_evaluate(
    cfg: &RunConfig,
    run: &Path,
    kinds: &[ModelKind],
    checkpoint: Option<&Path>,
    report_dir: &Path,
) -> Result<Vec<ErrorReport>> {
    let (split, frames) = load_dataset(cfg, run)?;
    let tests = test_frames(&split, &frames);
    ensure_dir(report_dir)?;
    let mut reports = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let (report, rows) = report_for(kind, checkpoint, run, &tests, cfg.evaluate.batch_size)?;
        report.save_json(&report_dir.join(format!("{}.json", kind.id())))?;
        write_frame_csv(&rows, &report_dir.join(format!("{}.csv", kind.id())))?;
        reports.push(report);
    }
    Ok(reports)
}

pub fn report_dir(cfg: &RunConfig, run: &Path) -> PathBuf {
    run.join(&cfg.evaluate.report_dir)
}

/// synth, magnify, fit-ssi, train (all variants) and evaluate (all models).
pub fn run_pipeline(cfg: &RunConfig, run: &Path) -> Result<BTreeMap<ModelKind, ErrorReport>> {
    cfg.validate()?;
    write_config(cfg, run)?;
    run_synth(cfg, run)?;
    run_magnify(cfg, run, run)?;
    run_fit_ssi(cfg, run, run)?;
    run_train(cfg, run, run, &Variant::ALL)?;
    let reports = run_evaluate(cfg, run, &ModelKind::ALL, None, &report_dir(cfg, run))?;
    Ok(ModelKind::ALL.into_iter().zip(reports).collect())
}
