//! Simulated stimulus-recovery experiment.
//!
//! Each subject recovers from a warm-water stimulus along
//! `T(t) = t_base + delta_t * exp(-t / tau_s)`. Skin saturation follows the
//! inverse of `T = k * S + b`, frames are value-noise skin patches whose mean
//! saturation hits `S(t)` analytically, and a simulated logger samples `T`
//! once per label period with uniform error.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Frame, RoiSpec};
use crate::labels::{TemperatureTrace, IBUTTON_UNCERTAINTY_C};
use crate::magnify::VideoClip;
use crate::manifest::write_clip;

pub const SATURATION_RANGE: (f64, f64) = (0.02, 0.98);
pub const T_BASE_RANGE: (f64, f64) = (32.0, 34.0);
pub const DELTA_T_RANGE: (f64, f64) = (2.0, 4.0);
pub const TAU_RANGE: (f64, f64) = (400.0, 1200.0);
pub const K_RANGE: (f64, f64) = (4.0, 12.0);
pub const B_RANGE: (f64, f64) = (29.5, 30.5);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub k_true: f64,
    pub b_true: f64,
    pub t_base: f64,
    pub delta_t: f64,
    pub tau_s: f64,
    pub texture_seed: u64,
}

impl SubjectProfile {
    pub fn saturation_at(&self, t: f64) -> f64 {
        (temperature_curve(self, t) - self.b_true) / self.k_true
    }

    fn fits(&self, duration_s: f64) -> bool {
        let range = SATURATION_RANGE.0..=SATURATION_RANGE.1;
        range.contains(&self.saturation_at(0.0)) && range.contains(&self.saturation_at(duration_s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDatasetSpec {
    pub n_subjects: usize,
    pub duration_s: f64,
    pub frame_rate_hz: f64,
    pub frame_side: usize,
    pub roi_side: usize,
    pub saturation_noise_sigma: f64,
    pub label_period_s: f64,
}

impl Default for SynthDatasetSpec {
    /// 16 subjects x 50 min x 30 fps = 1.44M frames.
    fn default() -> Self {
        Self {
            n_subjects: 16,
            duration_s: 3000.0,
            frame_rate_hz: 30.0,
            frame_side: 160,
            roi_side: RoiSpec::DEFAULT_SIDE,
            saturation_noise_sigma: 0.002,
            label_period_s: 60.0,
        }
    }
}

impl SynthDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::config("synth.n_subjects", "need at least 2 subjects"));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::config("synth.duration_s", "must be positive"));
        }
        if !(self.frame_rate_hz > 0.0) {
            return Err(Error::config("synth.frame_rate_hz", "must be positive"));
        }
        if self.roi_side == 0 || self.roi_side > self.frame_side {
            return Err(Error::config(
                "synth.roi_side",
                format!("{} must be in 1..={}", self.roi_side, self.frame_side),
            ));
        }
        if !(self.saturation_noise_sigma >= 0.0) {
            return Err(Error::config("synth.saturation_noise_sigma", "must be >= 0"));
        }
        if !(self.label_period_s > 0.0) || self.label_period_s > self.duration_s {
            return Err(Error::config(
                "synth.label_period_s",
                "must be positive and no longer than duration_s",
            ));
        }
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.frame_rate_hz).round() as usize
    }

    /// Centered ROI.
    pub fn roi(&self) -> RoiSpec {
        let o = (self.frame_side - self.roi_side) / 2;
        RoiSpec::new(o, o, self.roi_side)
    }
}

pub fn temperature_curve(profile: &SubjectProfile, t: f64) -> f64 {
    profile.t_base + profile.delta_t * (-t / profile.tau_s).exp()
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..hi)
}

/// Draws profiles until the saturation trajectory stays inside
/// [`SATURATION_RANGE`] for the whole recording.
pub fn sample_profile(subject_id: &str, duration_s: f64, rng: &mut impl Rng) -> SubjectProfile {
    loop {
        let p = SubjectProfile {
            subject_id: subject_id.to_string(),
            t_base: uniform(rng, T_BASE_RANGE),
            delta_t: uniform(rng, DELTA_T_RANGE),
            tau_s: uniform(rng, TAU_RANGE),
            k_true: uniform(rng, K_RANGE),
            b_true: uniform(rng, B_RANGE),
            texture_seed: rng.random(),
        };
        if p.fits(duration_s) {
            return p;
        }
    }
}

pub fn sample_profiles(spec: &SynthDatasetSpec, seed: u64) -> Vec<SubjectProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.n_subjects)
        .map(|i| sample_profile(&subject_name(i), spec.duration_s, &mut rng))
        .collect()
}

pub fn subject_name(index: usize) -> String {
    format!("subject_{index:02}")
}

/// Smooth value noise in [-1, 1] on a lattice with the given cell size.
fn value_noise(side: usize, cell: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = side / cell + 2;
    let lattice: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        let (gy, fy) = (y / cell, smooth((y % cell) as f64 / cell as f64));
        for x in 0..side {
            let (gx, fx) = (x / cell, smooth((x % cell) as f64 / cell as f64));
            let top = lattice[gy * n + gx] * (1.0 - fx) + lattice[gy * n + gx + 1] * fx;
            let bot = lattice[(gy + 1) * n + gx] * (1.0 - fx) + lattice[(gy + 1) * n + gx + 1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// Static per-subject texture. `modulation` has zero mean over the ROI and
/// over the surrounding ring separately, and `max |modulation| = 1`.
#[derive(Clone, Debug)]
pub struct SkinTexture {
    side: usize,
    value: Vec<f64>,
    hue_mix: Vec<f64>,
    modulation: Vec<f64>,
}

impl SkinTexture {
    pub fn new(side: usize, roi: &RoiSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = (side / 5).max(2);
        let value = value_noise(side, cell, &mut rng)
            .into_iter()
            .map(|v| 0.75 + 0.15 * v)
            .collect();
        let hue_mix = value_noise(side, cell, &mut rng)
            .into_iter()
            .map(|v| 0.5 + 0.2 * v)
            .collect();
        let mut modulation = value_noise(side, (cell / 2).max(2), &mut rng);
        let inside = |i: usize| {
            let (y, x) = (i / side, i % side);
            (roi.origin_y..roi.origin_y + roi.side).contains(&y)
                && (roi.origin_x..roi.origin_x + roi.side).contains(&x)
        };
        for region in [true, false] {
            let idx: Vec<usize> = (0..side * side).filter(|&i| inside(i) == region).collect();
            if idx.is_empty() {
                continue;
            }
            let mean = idx.iter().map(|&i| modulation[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().for_each(|&i| modulation[i] -= mean);
        }
        let peak = modulation.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            modulation.iter_mut().for_each(|v| *v /= peak);
        }
        Self {
            side,
            value,
            hue_mix,
            modulation,
        }
    }

    /// Pixel `(v, v(1 - s h), v(1 - s))` has HSV saturation exactly `s`, so
    /// the mean saturation equals `target`.
    pub fn render(&self, target: f64, timestamp: f64) -> Frame {
        let amp = 0.3 * target.min(1.0 - target);
        Frame::from_fn(self.side, self.side, timestamp, |y, x| {
            let i = y * self.side + x;
            let s = target + amp * self.modulation[i];
            let v = self.value[i];
            [v, v * (1.0 - s * self.hue_mix[i]), v * (1.0 - s)]
        })
    }
}

#[derive(Debug)]
pub struct RenderedSubject {
    pub clip: VideoClip,
    pub trace: TemperatureTrace,
    /// Noise-free `T(t)` at each frame time.
    pub dense_truth: Vec<(f64, f64)>,
}

pub fn render_clip(profile: &SubjectProfile, spec: &SynthDatasetSpec) -> Result<RenderedSubject> {
    spec.validate()?;
    let n = spec.n_frames();
    let times: Vec<f64> = (0..n).map(|i| i as f64 / spec.frame_rate_hz).collect();
    let range = SATURATION_RANGE.0..=SATURATION_RANGE.1;
    for &t in times.iter().chain([spec.duration_s].iter()) {
        let s = profile.saturation_at(t);
        if !range.contains(&s) {
            return Err(Error::Profile {
                subject: profile.subject_id.clone(),
                time: t,
                saturation: s,
            });
        }
    }

    let texture = SkinTexture::new(spec.frame_side, &spec.roi(), profile.texture_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(profile.texture_seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, spec.saturation_noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config("synth.saturation_noise_sigma", e.to_string()))?;
    let targets: Vec<f64> = times
        .iter()
        .map(|&t| {
            let eps = if spec.saturation_noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            (profile.saturation_at(t) + eps).clamp(0.0, 1.0)
        })
        .collect();
    let frames = times
        .par_iter()
        .zip(&targets)
        .map(|(&t, &s)| texture.render(s, t))
        .collect();
    let clip = VideoClip::new(frames, spec.frame_rate_hz)?;

    let n_samples = (spec.duration_s / spec.label_period_s + 1e-9).floor() as usize + 1;
    let samples = (0..n_samples)
        .map(|j| {
            let t = j as f64 * spec.label_period_s;
            let err = rng.random_range(-IBUTTON_UNCERTAINTY_C..=IBUTTON_UNCERTAINTY_C);
            (t, temperature_curve(profile, t) + err)
        })
        .collect();
    let trace = TemperatureTrace::new(samples, IBUTTON_UNCERTAINTY_C)?;
    let dense_truth = times.iter().map(|&t| (t, temperature_curve(profile, t))).collect();
    Ok(RenderedSubject {
        clip,
        trace,
        dense_truth,
    })
}

/// Ground-truth sidecar, read only by tests and diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub profile: SubjectProfile,
    pub dense: Vec<(f64, f64)>,
}

pub const TRUTH_FILE: &str = "truth.json";
pub const TRACE_FILE: &str = "trace.csv";

/// Writes `root/subject_XX/{frames/, clip.json, trace.csv, truth.json}`.
pub fn write_dataset(spec: &SynthDatasetSpec, seed: u64, root: &Path) -> Result<Vec<SubjectProfile>> {
    spec.validate()?;
    let profiles = sample_profiles(spec, seed);
    profiles.par_iter().try_for_each(|p| -> Result<()> {
        let dir = root.join(&p.subject_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let rendered = render_clip(p, spec)?;
        write_clip(&rendered.clip, spec.roi(), &dir)?;
        rendered.trace.write_csv(&dir.join(TRACE_FILE))?;
        let sidecar = TruthSidecar {
            profile: p.clone(),
            dense: rendered.dense_truth,
        };
        let path = dir.join(TRUTH_FILE);
        let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::format(&path, e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    })?;
    Ok(profiles)
}
