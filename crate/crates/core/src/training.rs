//! Dataset assembly, subject-level splitting and the SGD training loop with
//! periodic validation checkpoints.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use skintemp_nn::{mse, Checkpoint, Parameterized, Sgd, Tensor};

use crate::error::{Error, Result};
use crate::models::{build_model, BackboneConfig, FusionModel, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Train : test subject ratio.
    pub split: [usize; 2],
    pub validation_size: usize,
    pub checkpoint_threshold_c: f64,
    pub checkpoint_every_images: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 8,
            split: [12, 4],
            validation_size: 500,
            checkpoint_threshold_c: 0.46,
            checkpoint_every_images: 30_000,
            learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be positive"));
        }
        if self.split[0] == 0 || self.split[1] == 0 {
            return Err(Error::config("train.split", "both sides must be positive"));
        }
        if self.checkpoint_every_images < self.batch_size {
            return Err(Error::config(
                "train.checkpoint_every_images",
                format!(
                    "{} must be at least batch_size {}",
                    self.checkpoint_every_images, self.batch_size
                ),
            ));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if !(self.checkpoint_threshold_c > 0.0) {
            return Err(Error::config("train.checkpoint_threshold_c", "must be positive"));
        }
        Ok(())
    }
}

/// One labeled ROI frame. `subject` is the provenance tag checked before
/// every gradient step.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub subject: String,
    pub frame_id: String,
    pub t: f64,
    /// ROI pixels, `side * side * 3`, NHWC order.
    pub image: Vec<f64>,
    pub mean_saturation: f64,
    pub label: f64,
    pub ssi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SubjectSplit {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

/// Seeded shuffle, then the first `round(n * train / (train + test))`
/// subjects train. Needs at least 4 subjects.
pub fn split_subjects(subjects: &[String], cfg: &TrainConfig, seed: u64) -> Result<SubjectSplit> {
    let n = subjects.len();
    if n < 4 {
        return Err(Error::Split(format!("need at least 4 subjects, got {n}")));
    }
    let mut ids = subjects.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != n {
        return Err(Error::Split("duplicate subject ids".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    ids.shuffle(&mut rng);
    let [a, b] = cfg.split;
    let n_test = ((n * b) as f64 / (a + b) as f64).round().max(1.0) as usize;
    let mut test = ids.split_off(n - n_test);
    ids.sort();
    test.sort();
    Ok(SubjectSplit { train: ids, test })
}

pub struct DatasetSplit<'a> {
    pub train: Vec<&'a Sample>,
    pub validation: Vec<&'a Sample>,
    pub test: Vec<&'a Sample>,
}

/// Validation frames are drawn from training subjects only. `test` keeps
/// every frame of the test subjects; callers drop calibration prefixes.
pub fn split_dataset<'a>(
    samples: &'a [Sample],
    split: &SubjectSplit,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<DatasetSplit<'a>> {
    let train_ids: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
    let test_ids: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
    if let Some(both) = train_ids.intersection(&test_ids).next() {
        return Err(Error::Split(format!("{both} is in both train and test")));
    }
    let mut pool: Vec<&Sample> = samples
        .iter()
        .filter(|s| train_ids.contains(s.subject.as_str()))
        .collect();
    let test = samples
        .iter()
        .filter(|s| test_ids.contains(s.subject.as_str()))
        .collect();
    if pool.len() <= cfg.validation_size {
        return Err(Error::Split(format!(
            "{} training frames cannot supply {} validation frames",
            pool.len(),
            cfg.validation_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    let held: BTreeSet<usize> = order[..cfg.validation_size].iter().copied().collect();
    let validation = held.iter().map(|&i| pool[i]).collect();
    let mut i = 0;
    pool.retain(|_| {
        i += 1;
        !held.contains(&(i - 1))
    });
    Ok(DatasetSplit {
        train: pool,
        validation,
        test,
    })
}

/// Standardization of targets and SSI inputs, fit on training frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub target_mean: f64,
    pub target_std: f64,
    pub ssi_mean: f64,
    pub ssi_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-9 { std } else { 1.0 })
}

impl Normalizer {
    pub fn fit(samples: &[&Sample]) -> Self {
        let (target_mean, target_std) = mean_std(samples.iter().map(|s| s.label));
        let (ssi_mean, ssi_std) = mean_std(samples.iter().map(|s| s.ssi));
        Self {
            target_mean,
            target_std,
            ssi_mean,
            ssi_std,
        }
    }

    pub fn target(&self, c: f64) -> f64 {
        (c - self.target_mean) / self.target_std
    }

    pub fn celsius(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }

    pub fn ssi(&self, k: f64) -> f64 {
        (k - self.ssi_mean) / self.ssi_std
    }
}

/// Everything besides the weights needed to rebuild a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub variant: Variant,
    pub backbone: BackboneConfig,
    pub normalizer: Normalizer,
    pub seed: u64,
    pub images_seen: usize,
}

pub fn save_checkpoint(model: &FusionModel, meta: &ModelMeta, path: &Path) -> Result<()> {
    let config = serde_json::to_value(meta).map_err(|e| Error::format(path, e))?;
    let ckpt = Checkpoint {
        model: meta.variant.id().to_string(),
        config,
        params: model.snapshot(meta.seed),
    };
    ckpt.save(path).map_err(|e| match e {
        skintemp_nn::NnError::Io(io) => Error::io(path, io),
        other => Error::format(path, other),
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(FusionModel, ModelMeta)> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found"),
        ));
    }
    let ckpt = Checkpoint::load(path).map_err(|e| match e {
        skintemp_nn::NnError::Io(io) => Error::io(path, io),
        other => Error::format(path, other),
    })?;
    let meta: ModelMeta =
        serde_json::from_value(ckpt.config).map_err(|e| Error::format(path, e))?;
    let mut model = build_model(meta.variant, &meta.backbone, &mut skintemp_nn::seeded_rng(0))?;
    model.load(&ckpt.params).map_err(|e| Error::format(path, e))?;
    Ok((model, meta))
}

fn batch_inputs(batch: &[&Sample], norm: &Normalizer, side: usize) -> Result<(Tensor, Vec<f64>)> {
    let mut data = Vec::with_capacity(batch.len() * side * side * 3);
    for s in batch {
        data.extend_from_slice(&s.image);
    }
    let images = Tensor::new(vec![batch.len(), side, side, 3], data)?;
    let ssi = batch.iter().map(|s| norm.ssi(s.ssi)).collect();
    Ok((images, ssi))
}

/// Predictions in degrees C.
pub fn predict(
    model: &mut FusionModel,
    samples: &[&Sample],
    norm: &Normalizer,
    batch_size: usize,
) -> Result<Vec<f64>> {
    let side = model.config().input_side;
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let (images, ssi) = batch_inputs(chunk, norm, side)?;
        let pred = model.forward(&images, &ssi)?;
        out.extend(pred.data().iter().map(|&z| norm.celsius(z)));
    }
    model.clear();
    Ok(out)
}

fn mean_abs_error(pred: &[f64], samples: &[&Sample]) -> f64 {
    pred.iter()
        .zip(samples)
        .map(|(p, s)| (p - s.label).abs())
        .sum::<f64>()
        / pred.len().max(1) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub images_seen: usize,
    pub val_mae: f64,
    pub wall_time_s: f64,
    pub saved: bool,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: Vec<LogEntry>,
    /// Mean standardized training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub checkpoints: Vec<PathBuf>,
    pub meta: ModelMeta,
}

pub struct TrainJob<'a> {
    pub train: &'a [&'a Sample],
    pub validation: &'a [&'a Sample],
    /// Subjects that must never reach a gradient step or validation.
    pub held_out: &'a BTreeSet<String>,
    pub cfg: &'a TrainConfig,
    pub seed: u64,
    /// Checkpoints and the run log go here when set.
    pub out_dir: Option<&'a Path>,
}

fn check_provenance(samples: &[&Sample], held_out: &BTreeSet<String>, role: &str) -> Result<()> {
    match samples.iter().find(|s| held_out.contains(&s.subject)) {
        Some(s) => Err(Error::Leak(format!(
            "{role} frame {} belongs to held-out subject {}",
            s.frame_id, s.subject
        ))),
        None => Ok(()),
    }
}

pub fn train(model: &mut FusionModel, job: &TrainJob) -> Result<TrainOutcome> {
    let cfg = job.cfg;
    cfg.validate()?;
    if job.train.is_empty() {
        return Err(Error::EmptyData("training set"));
    }
    check_provenance(job.validation, job.held_out, "validation")?;
    let norm = Normalizer::fit(job.train);
    let side = model.config().input_side;
    let mut meta = ModelMeta {
        variant: model.variant(),
        backbone: model.config().clone(),
        normalizer: norm,
        seed: job.seed,
        images_seen: 0,
    };
    if let Some(dir) = job.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let sgd = Sgd::new(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    rng.set_stream(5);
    let mut order: Vec<usize> = (0..job.train.len()).collect();
    let started = Instant::now();
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut images_seen = 0;
    let mut next_check = cfg.checkpoint_every_images;
    let mut batch_index = 0;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| job.train[i]).collect();
            check_provenance(&batch, job.held_out, "training")?;
            let (images, ssi) = batch_inputs(&batch, &norm, side)?;
            let targets: Vec<f64> = batch.iter().map(|s| norm.target(s.label)).collect();
            let pred = model.forward(&images, &ssi)?;
            let (loss, grad) = mse(&pred, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { batch: batch_index });
            }
            model.backward(&grad)?;
            sgd.step(model);
            loss_sum += loss;
            n_batches += 1;
            batch_index += 1;
            images_seen += batch.len();

            while images_seen >= next_check {
                let pred = predict(model, job.validation, &norm, cfg.batch_size)?;
                let val_mae = mean_abs_error(&pred, job.validation);
                let saved = val_mae < cfg.checkpoint_threshold_c;
                if saved {
                    if let Some(dir) = job.out_dir {
                        meta.images_seen = images_seen;
                        let path = dir.join(format!("ckpt_{images_seen}.ckpt"));
                        save_checkpoint(model, &meta, &path)?;
                        checkpoints.push(path);
                    }
                }
                log.push(LogEntry {
                    images_seen,
                    val_mae,
                    wall_time_s: started.elapsed().as_secs_f64(),
                    saved,
                });
                next_check += cfg.checkpoint_every_images;
            }
        }
        epoch_losses.push(loss_sum / n_batches.max(1) as f64);
    }
    model.clear();
    meta.images_seen = images_seen;
    if let Some(dir) = job.out_dir {
        let path = dir.join("final.ckpt");
        save_checkpoint(model, &meta, &path)?;
        checkpoints.push(path);
        write_run_log(&log, &dir.join("run_log.csv"))?;
    }
    Ok(TrainOutcome {
        log,
        epoch_losses,
        checkpoints,
        meta,
    })
}

pub fn write_run_log(log: &[LogEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(["images_seen", "val_mae", "wall_time_s"])
        .map_err(|e| Error::format(path, e))?;
    for e in log {
        w.write_record([
            e.images_seen.to_string(),
            format!("{:.6}", e.val_mae),
            format!("{:.3}", e.wall_time_s),
        ])
        .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_dl, build_nisdl2};
    use rand::Rng;
    use skintemp_nn::seeded_rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("subject_{i:02}")).collect()
    }

    #[test]
    fn split_ratios() {
        let cfg = TrainConfig::default();
        for (n, test) in [(16, 4), (8, 2), (4, 1)] {
            let s = split_subjects(&ids(n), &cfg, 1).unwrap();
            assert_eq!((s.train.len(), s.test.len()), (n - test, test));
            let all: BTreeSet<_> = s.train.iter().chain(&s.test).collect();
            assert_eq!(all.len(), n);
        }
        assert!(matches!(split_subjects(&ids(3), &cfg, 1), Err(Error::Split(_))));
        assert_eq!(
            split_subjects(&ids(8), &cfg, 9).unwrap(),
            split_subjects(&ids(8), &cfg, 9).unwrap()
        );
    }

    fn tiny_cfg() -> BackboneConfig {
        BackboneConfig {
            input_side: 8,
            feature_dim: 6,
            spatial_out: 4,
            stage_channels: vec![3],
            fusion_channels: vec![4, 3],
            ssi_channels: 2,
            profile: crate::models::Profile::Desk,
        }
    }

    fn samples(subjects: usize, per: usize, seed: u64) -> Vec<Sample> {
        let mut rng = seeded_rng(seed);
        let mut out = Vec::new();
        for s in 0..subjects {
            let k = 4.0 + s as f64;
            for i in 0..per {
                let sat: f64 = rng.random_range(0.1..0.5);
                out.push(Sample {
                    subject: format!("subject_{s:02}"),
                    frame_id: format!("subject_{s:02}/frame_{i:05}"),
                    t: i as f64,
                    image: (0..8 * 8 * 3).map(|j| if j % 3 == 0 { 0.8 } else { 0.8 * (1.0 - sat) }).collect(),
                    mean_saturation: sat,
                    label: 30.0 + k * sat,
                    ssi: k,
                });
            }
        }
        out
    }

    fn cfg(every: usize) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            epochs: 3,
            validation_size: 5,
            checkpoint_every_images: every,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn validation_comes_from_training_subjects() {
        let data = samples(4, 10, 0);
        let split = split_subjects(&ids(4), &cfg(4), 3).unwrap();
        let ds = split_dataset(&data, &split, &cfg(4), 3).unwrap();
        assert_eq!(ds.validation.len(), 5);
        assert_eq!(ds.train.len() + ds.validation.len(), 30);
        assert!(ds.validation.iter().all(|s| split.train.contains(&s.subject)));
        assert!(ds.test.iter().all(|s| split.test.contains(&s.subject)));
    }

    #[test]
    fn zero_epochs_leaves_initialization() {
        let data = samples(1, 6, 0);
        let refs: Vec<&Sample> = data.iter().collect();
        let mut model = build_dl(&tiny_cfg(), &mut seeded_rng(2)).unwrap();
        let before = model.snapshot(2);
        let c = TrainConfig { epochs: 0, ..cfg(4) };
        let held = BTreeSet::new();
        let out = train(
            &mut model,
            &TrainJob { train: &refs, validation: &refs, held_out: &held, cfg: &c, seed: 2, out_dir: None },
        )
        .unwrap();
        assert!(out.log.is_empty());
        assert_eq!(model.snapshot(2), before);
    }

    #[test]
    fn checkpoint_log_length() {
        let data = samples(1, 10, 0);
        let refs: Vec<&Sample> = data.iter().collect();
        let held = BTreeSet::new();
        for every in [4, 6, 7] {
            let mut model = build_dl(&tiny_cfg(), &mut seeded_rng(2)).unwrap();
            let c = cfg(every);
            let out = train(
                &mut model,
                &TrainJob { train: &refs, validation: &refs[..3], held_out: &held, cfg: &c, seed: 2, out_dir: None },
            )
            .unwrap();
            assert_eq!(out.log.len(), c.epochs * refs.len() / every, "every {every}");
        }
    }

    #[test]
    fn held_out_subject_in_batch_is_rejected() {
        let data = samples(2, 4, 0);
        let refs: Vec<&Sample> = data.iter().collect();
        let held: BTreeSet<String> = ["subject_01".to_string()].into();
        let mut model = build_dl(&tiny_cfg(), &mut seeded_rng(2)).unwrap();
        let c = cfg(4);
        let err = train(
            &mut model,
            &TrainJob { train: &refs, validation: &refs[..2], held_out: &held, cfg: &c, seed: 2, out_dir: None },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Leak(_)), "{err}");
    }

    #[test]
    fn divergence_reports_batch() {
        let data = samples(1, 8, 0);
        let refs: Vec<&Sample> = data.iter().collect();
        let held = BTreeSet::new();
        let mut model = build_dl(&tiny_cfg(), &mut seeded_rng(2)).unwrap();
        let c = TrainConfig { learning_rate: 1e6, epochs: 50, ..cfg(400) };
        let err = train(
            &mut model,
            &TrainJob { train: &refs, validation: &refs[..2], held_out: &held, cfg: &c, seed: 2, out_dir: None },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn single_sample_is_memorized() {
        let data = samples(1, 1, 5);
        let refs: Vec<&Sample> = data.iter().collect();
        let held = BTreeSet::new();
        let mut model = build_nisdl2(&tiny_cfg(), &mut seeded_rng(3)).unwrap();
        let c = TrainConfig { epochs: 200, batch_size: 1, checkpoint_every_images: 1000, ..cfg(1000) };
        let out = train(
            &mut model,
            &TrainJob { train: &refs, validation: &refs, held_out: &held, cfg: &c, seed: 3, out_dir: None },
        )
        .unwrap();
        let pred = predict(&mut model, &refs, &out.meta.normalizer, 1).unwrap();
        assert!((pred[0] - refs[0].label).abs() < 0.05, "{} vs {}", pred[0], refs[0].label);
    }

    #[test]
    fn small_learning_rate_loss_does_not_rise() {
        let data = samples(2, 16, 7);
        let refs: Vec<&Sample> = data.iter().collect();
        let held = BTreeSet::new();
        let mut model = build_dl(&tiny_cfg(), &mut seeded_rng(4)).unwrap();
        let c = TrainConfig { epochs: 30, learning_rate: 1e-3, ..cfg(10_000) };
        let out = train(
            &mut model,
            &TrainJob { train: &refs, validation: &refs[..2], held_out: &held, cfg: &c, seed: 4, out_dir: None },
        )
        .unwrap();
        let smooth: Vec<f64> = out.epoch_losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        for w in smooth.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", out.epoch_losses);
        }
    }

    #[test]
    fn checkpoint_round_trip_reproduces_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let data = samples(2, 8, 1);
        let refs: Vec<&Sample> = data.iter().collect();
        let held = BTreeSet::new();
        let mut model = build_nisdl2(&tiny_cfg(), &mut seeded_rng(6)).unwrap();
        let c = TrainConfig { checkpoint_threshold_c: 100.0, ..cfg(8) };
        let out = train(
            &mut model,
            &TrainJob { train: &refs, validation: &refs[..3], held_out: &held, cfg: &c, seed: 6, out_dir: Some(dir.path()) },
        )
        .unwrap();
        assert!(out.log.iter().all(|e| e.saved));
        assert_eq!(out.checkpoints.len(), out.log.len() + 1);
        let (mut back, meta) = load_checkpoint(&dir.path().join("final.ckpt")).unwrap();
        assert_eq!(meta, out.meta);
        let a = predict(&mut model, &refs, &meta.normalizer, 4).unwrap();
        let b = predict(&mut back, &refs, &meta.normalizer, 4).unwrap();
        assert_eq!(a, b);
        let log = std::fs::read_to_string(dir.path().join("run_log.csv")).unwrap();
        assert!(log.starts_with("images_seen,val_mae,wall_time_s"));
    }

    #[test]
    fn missing_checkpoint_is_io_error() {
        let err = load_checkpoint(Path::new("/nonexistent/final.ckpt")).err().unwrap();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/final.ckpt"));
    }

    #[test]
    fn same_seed_same_log() {
        let data = samples(2, 12, 1);
        let refs: Vec<&Sample> = data.iter().collect();
        let held = BTreeSet::new();
        let run = || {
            let mut model = build_nisdl2(&tiny_cfg(), &mut seeded_rng(8)).unwrap();
            let c = cfg(8);
            let out = train(
                &mut model,
                &TrainJob { train: &refs, validation: &refs[..4], held_out: &held, cfg: &c, seed: 8, out_dir: None },
            )
            .unwrap();
            (out.log.iter().map(|e| (e.images_seen, e.val_mae)).collect::<Vec<_>>(), model.snapshot(8))
        };
        assert_eq!(run(), run());
    }
}
