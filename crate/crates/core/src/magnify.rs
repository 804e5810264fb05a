//! Eulerian intensity magnification.
//!
//! Each frame is split into a Laplacian pyramid per RGB channel. Every
//! pyramid coefficient is filtered through time by the difference of two
//! first-order IIR lowpasses, and `xi` times the band is added back before
//! the pyramid is collapsed.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Frame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnifyConfig {
    pub xi: f64,
    pub pyramid_levels: usize,
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    pub frame_rate_hz: f64,
    pub denoise_radius: f64,
}

impl Default for MagnifyConfig {
    fn default() -> Self {
        Self {
            xi: 10.0,
            pyramid_levels: 3,
            low_cut_hz: 0.05,
            high_cut_hz: 1.0,
            frame_rate_hz: 30.0,
            denoise_radius: 1.0,
        }
    }
}

impl MagnifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) {
            return Err(Error::config("magnify.xi", format!("{} must be >= 0", self.xi)));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::config("magnify.pyramid_levels", "must be >= 1"));
        }
        if !(self.denoise_radius >= 0.0) {
            return Err(Error::config("magnify.denoise_radius", "must be >= 0"));
        }
        if !(self.frame_rate_hz > 0.0) {
            return Err(Error::config("magnify.frame_rate_hz", "must be positive"));
        }
        if !(self.low_cut_hz > 0.0) {
            return Err(Error::config("magnify.low_cut_hz", "must be positive"));
        }
        if !(self.low_cut_hz < self.high_cut_hz) {
            return Err(Error::config(
                "magnify.high_cut_hz",
                format!("{} must exceed low_cut_hz {}", self.high_cut_hz, self.low_cut_hz),
            ));
        }
        let nyquist = self.frame_rate_hz / 2.0;
        if !(self.high_cut_hz < nyquist) {
            return Err(Error::config(
                "magnify.high_cut_hz",
                format!("{} must be below Nyquist {nyquist}", self.high_cut_hz),
            ));
        }
        Ok(())
    }

    fn alphas(&self) -> (f64, f64) {
        let a = |fc: f64| 1.0 - (-2.0 * PI * fc / self.frame_rate_hz).exp();
        (a(self.high_cut_hz), a(self.low_cut_hz))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    pub frames: Vec<Frame>,
    pub frame_rate_hz: f64,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>, frame_rate_hz: f64) -> Result<Self> {
        if !(frame_rate_hz > 0.0) {
            return Err(Error::config("frame_rate_hz", "must be positive"));
        }
        let dt = 1.0 / frame_rate_hz;
        for (i, w) in frames.windows(2).enumerate() {
            let step = w[1].timestamp - w[0].timestamp;
            if step <= 0.0 || (step - dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::InvalidFrame(format!(
                    "frame {}: spacing {step} s, expected {dt} s",
                    i + 1
                )));
            }
            if (w[1].height(), w[1].width()) != (w[0].height(), w[0].width()) {
                return Err(Error::InvalidFrame(format!("frame {}: size changed", i + 1)));
            }
        }
        Ok(Self {
            frames,
            frame_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Single-channel raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Plane {
    fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.w + x]
    }
}

/// Normalized Gaussian taps over `-ceil(3 sigma)..=ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable correlation with replicated borders.
fn convolve_separable(p: &Plane, kernel: &[f64]) -> Plane {
    let half = (kernel.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; p.data.len()];
    for y in 0..p.h {
        for x in 0..p.w {
            tmp[y * p.w + x] = kernel
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * p.at(y, clamp(x as isize + j as isize - half, p.w)))
                .sum();
        }
    }
    let mut out = vec![0.0; p.data.len()];
    for y in 0..p.h {
        for x in 0..p.w {
            out[y * p.w + x] = kernel
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[clamp(y as isize + j as isize - half, p.h) * p.w + x])
                .sum();
        }
    }
    Plane {
        h: p.h,
        w: p.w,
        data: out,
    }
}

pub fn denoise_frame(frame: &Frame, radius: f64) -> Frame {
    if radius <= 0.0 {
        return frame.clone();
    }
    let kernel = gaussian_kernel(radius);
    let (h, w) = (frame.height(), frame.width());
    let planes = frame.planes().map(|data| convolve_separable(&Plane { h, w, data }, &kernel).data);
    Frame::from_planes(h, w, &planes, frame.timestamp)
}

/// Per-frame Gaussian blur with `sigma = radius`; radius 0 is the identity.
pub fn denoise(clip: &VideoClip, radius: f64) -> VideoClip {
    VideoClip {
        frames: clip.frames.par_iter().map(|f| denoise_frame(f, radius)).collect(),
        frame_rate_hz: clip.frame_rate_hz,
    }
}

const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn reduce(p: &Plane) -> Plane {
    let blurred = convolve_separable(p, &BINOMIAL5);
    let (h, w) = (p.h.div_ceil(2), p.w.div_ceil(2));
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            data.push(blurred.at(2 * y, 2 * x));
        }
    }
    Plane { h, w, data }
}

/// Linear upsampling of a reduced plane back to `h x w`.
fn expand(p: &Plane, h: usize, w: usize) -> Plane {
    let sample = |i: usize, n: usize| -> (usize, usize) {
        let lo = (i / 2).min(n - 1);
        let hi = if i % 2 == 1 { (i / 2 + 1).min(n - 1) } else { lo };
        (lo, hi)
    };
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        let (y0, y1) = sample(y, p.h);
        for x in 0..w {
            let (x0, x1) = sample(x, p.w);
            data.push(0.25 * (p.at(y0, x0) + p.at(y0, x1) + p.at(y1, x0) + p.at(y1, x1)));
        }
    }
    Plane { h, w, data }
}

/// Laplacian bands, finest first; the last entry is the lowpass residual.
pub fn build_pyramid(p: &Plane, levels: usize) -> Vec<Plane> {
    let mut bands = Vec::with_capacity(levels);
    let mut cur = p.clone();
    for _ in 1..levels {
        if cur.h < 2 && cur.w < 2 {
            break;
        }
        let down = reduce(&cur);
        let up = expand(&down, cur.h, cur.w);
        let lap = cur.data.iter().zip(&up.data).map(|(a, b)| a - b).collect();
        bands.push(Plane {
            h: cur.h,
            w: cur.w,
            data: lap,
        });
        cur = down;
    }
    bands.push(cur);
    bands
}

pub fn collapse_pyramid(bands: &[Plane]) -> Plane {
    let mut cur = bands[bands.len() - 1].clone();
    for band in bands[..bands.len() - 1].iter().rev() {
        let up = expand(&cur, band.h, band.w);
        cur = Plane {
            h: band.h,
            w: band.w,
            data: band.data.iter().zip(&up.data).map(|(a, b)| a + b).collect(),
        };
    }
    cur
}

/// Streaming state of the two lowpasses for one coefficient vector.
struct Bandpass {
    alpha_high: f64,
    alpha_low: f64,
    high: Vec<f64>,
    low: Vec<f64>,
}

impl Bandpass {
    fn new(cfg: &MagnifyConfig) -> Self {
        let (alpha_high, alpha_low) = cfg.alphas();
        Self {
            alpha_high,
            alpha_low,
            high: Vec::new(),
            low: Vec::new(),
        }
    }

    /// Filters `x` in place, replacing it with the band component.
    fn step(&mut self, x: &mut [f64]) {
        if self.high.is_empty() {
            self.high = x.to_vec();
            self.low = x.to_vec();
        }
        for ((v, h), l) in x.iter_mut().zip(&mut self.high).zip(&mut self.low) {
            *h += self.alpha_high * (*v - *h);
            *l += self.alpha_low * (*v - *l);
            *v = *h - *l;
        }
    }
}

/// Band component of a scalar series. Filter state starts at `signal[0]`.
pub fn temporal_bandpass(signal: &[f64], cfg: &MagnifyConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if signal.len() < 2 {
        return Err(Error::InsufficientData {
            what: "temporal bandpass",
            needed: 2,
            got: signal.len(),
        });
    }
    let mut bp = Bandpass::new(cfg);
    Ok(signal
        .iter()
        .map(|&v| {
            let mut x = [v];
            bp.step(&mut x);
            x[0]
        })
        .collect())
}

/// Magnified RGB planes before clamping, one entry per frame.
pub fn magnify_unclamped(clip: &VideoClip, cfg: &MagnifyConfig) -> Result<Vec<[Plane; 3]>> {
    cfg.validate()?;
    if clip.len() < 2 {
        return Err(Error::InsufficientData {
            what: "magnification",
            needed: 2,
            got: clip.len(),
        });
    }
    if (clip.frame_rate_hz - cfg.frame_rate_hz).abs() > 1e-9 {
        return Err(Error::config(
            "magnify.frame_rate_hz",
            format!(
                "{} Hz does not match clip rate {} Hz",
                cfg.frame_rate_hz, clip.frame_rate_hz
            ),
        ));
    }
    let (h, w) = (clip.frames[0].height(), clip.frames[0].width());
    let mut filters: Vec<Vec<Bandpass>> = (0..3)
        .map(|_| (0..cfg.pyramid_levels).map(|_| Bandpass::new(cfg)).collect())
        .collect();
    let mut out = Vec::with_capacity(clip.len());
    for frame in &clip.frames {
        let planes = frame.planes();
        let magnified: Vec<Plane> = planes
            .into_par_iter()
            .zip(filters.par_iter_mut())
            .map(|(data, chan_filters)| {
                let mut bands = build_pyramid(&Plane { h, w, data }, cfg.pyramid_levels);
                for (band, filter) in bands.iter_mut().zip(chan_filters.iter_mut()) {
                    let mut passed = band.data.clone();
                    filter.step(&mut passed);
                    for (v, p) in band.data.iter_mut().zip(&passed) {
                        *v += cfg.xi * p;
                    }
                }
                collapse_pyramid(&bands)
            })
            .collect();
        let [r, g, b]: [Plane; 3] = magnified.try_into().expect("three channels");
        out.push([r, g, b]);
    }
    Ok(out)
}

pub fn magnify_clip(clip: &VideoClip, cfg: &MagnifyConfig) -> Result<VideoClip> {
    let raw = magnify_unclamped(clip, cfg)?;
    let frames = raw
        .into_iter()
        .zip(&clip.frames)
        .map(|([r, g, b], src)| {
            Frame::from_planes(src.height(), src.width(), &[r.data, g.data, b.data], src.timestamp)
        })
        .collect();
    Ok(VideoClip {
        frames,
        frame_rate_hz: clip.frame_rate_hz,
    })
}
