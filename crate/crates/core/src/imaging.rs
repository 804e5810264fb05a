//! Frames, ROI cropping and HSV saturation statistics.
//!
//! Pixels are stored as interleaved RGB `f64` in `[0, 1]`; 8-bit sources are
//! divided by 255 on ingestion.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f64>,
    /// Seconds from clip start.
    pub timestamp: f64,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f64>, timestamp: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidFrame("zero dimension".into()));
        }
        if data.len() != height * width * CHANNELS {
            return Err(Error::InvalidFrame(format!(
                "{} values for a {height}x{width} RGB frame",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidFrame(format!(
                "value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            timestamp,
        })
    }

    /// Builds a frame from a per-pixel function; values are clamped to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        timestamp: f64,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(y, x).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self {
            height,
            width,
            data,
            timestamp,
        }
    }

    pub fn uniform(height: usize, width: usize, rgb: [f64; 3], timestamp: f64) -> Self {
        Self::from_fn(height, width, timestamp, |_, _| rgb)
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8], timestamp: f64) -> Result<Self> {
        Self::new(
            height,
            width,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
            timestamp,
        )
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let at = (y * self.width + x) * CHANNELS;
        [self.data[at], self.data[at + 1], self.data[at + 2]]
    }

    /// Splits into one plane per channel.
    pub fn planes(&self) -> [Vec<f64>; 3] {
        let n = self.height * self.width;
        let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, px) in self.data.chunks_exact(CHANNELS).enumerate() {
            for c in 0..CHANNELS {
                planes[c][i] = px[c];
            }
        }
        planes
    }

    /// Inverse of [`Frame::planes`], clamping to `[0, 1]`.
    pub fn from_planes(
        height: usize,
        width: usize,
        planes: &[Vec<f64>; 3],
        timestamp: f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for i in 0..height * width {
            for plane in planes {
                data.push(plane[i].clamp(0.0, 1.0));
            }
        }
        Self {
            height,
            width,
            data,
            timestamp,
        }
    }
}

/// Square, axis-aligned region of interest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub origin_x: usize,
    pub origin_y: usize,
    pub side: usize,
}

impl RoiSpec {
    pub const DEFAULT_SIDE: usize = 150;

    pub fn new(origin_x: usize, origin_y: usize, side: usize) -> Self {
        Self {
            origin_x,
            origin_y,
            side,
        }
    }

    pub fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        if self.origin_x + self.side > width {
            return Err(Error::Bounds {
                coordinate: "origin_x + side",
                value: self.origin_x + self.side,
                limit: width,
            });
        }
        if self.origin_y + self.side > height {
            return Err(Error::Bounds {
                coordinate: "origin_y + side",
                value: self.origin_y + self.side,
                limit: height,
            });
        }
        Ok(())
    }
}

impl Default for RoiSpec {
    fn default() -> Self {
        Self::new(0, 0, Self::DEFAULT_SIDE)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaturationMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

/// HSV saturation: `(max - min) / max`, zero for black.
#[inline]
pub fn saturation(rgb: [f64; 3]) -> f64 {
    let max = rgb[0].max(rgb[1]).max(rgb[2]);
    if max <= 0.0 {
        return 0.0;
    }
    let min = rgb[0].min(rgb[1]).min(rgb[2]);
    (max - min) / max
}

pub fn rgb_to_hsv_saturation(frame: &Frame) -> SaturationMap {
    SaturationMap {
        height: frame.height,
        width: frame.width,
        values: frame
            .data
            .chunks_exact(CHANNELS)
            .map(|px| saturation([px[0], px[1], px[2]]))
            .collect(),
    }
}

pub fn crop_roi(frame: &Frame, roi: &RoiSpec) -> Result<Frame> {
    roi.check_fits(frame.height, frame.width)?;
    let row_len = roi.side * CHANNELS;
    let mut data = Vec::with_capacity(roi.side * row_len);
    for y in roi.origin_y..roi.origin_y + roi.side {
        let start = (y * frame.width + roi.origin_x) * CHANNELS;
        data.extend_from_slice(&frame.data[start..start + row_len]);
    }
    Ok(Frame {
        height: roi.side,
        width: roi.side,
        data,
        timestamp: frame.timestamp,
    })
}

pub fn mean_saturation(frame: &Frame) -> f64 {
    let map = rgb_to_hsv_saturation(frame);
    map.values.iter().sum::<f64>() / map.values.len() as f64
}

pub fn load_png(path: &Path, timestamp: f64) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let px = &buf[..info.buffer_size()];
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => px.to_vec(),
        png::ColorType::Rgba => px
            .chunks_exact(4)
            .flat_map(|c| [c[0], c[1], c[2]])
            .collect(),
        png::ColorType::Grayscale => px.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => {
            px.chunks_exact(2).flat_map(|c| [c[0], c[0], c[0]]).collect()
        }
        png::ColorType::Indexed => return Err(Error::format(path, "unexpanded palette image")),
    };
    Frame::from_rgb8(h, w, &rgb, timestamp)
}

pub fn save_png(frame: &Frame, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, frame.width as u32, frame.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::format(path, e))?;
        writer
            .write_image_data(&frame.to_rgb8())
            .map_err(|e| Error::format(path, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn saturation_examples() {
        assert_eq!(saturation([1.0, 0.0, 0.0]), 1.0);
        assert_eq!(saturation([0.5, 0.5, 0.5]), 0.0);
        assert!((saturation([0.8, 0.4, 0.4]) - 0.5).abs() < 1e-15);
        assert_eq!(saturation([0.0, 0.0, 0.0]), 0.0);
    }

    fn corners_frame() -> Frame {
        Frame::from_fn(4, 4, 0.0, |y, x| [(y * 4 + x) as f64 / 15.0, 0.0, 0.0])
    }

    #[test]
    fn full_crop_is_identity() {
        let f = corners_frame();
        assert_eq!(crop_roi(&f, &RoiSpec::new(0, 0, 4)).unwrap(), f);
    }

    #[test]
    fn crop_takes_bottom_right_block() {
        let f = corners_frame();
        let c = crop_roi(&f, &RoiSpec::new(2, 2, 2)).unwrap();
        assert_eq!(c.pixel(0, 0), f.pixel(2, 2));
        assert_eq!(c.pixel(1, 1), f.pixel(3, 3));
        assert_eq!(c.pixel(0, 1), f.pixel(2, 3));
    }

    #[test]
    fn oversized_roi_names_coordinate() {
        let f = Frame::uniform(100, 100, [0.5; 3], 0.0);
        let err = crop_roi(&f, &RoiSpec::default()).unwrap_err();
        match err {
            Error::Bounds { coordinate, .. } => assert!(coordinate.starts_with("origin_x")),
            other => panic!("{other:?}"),
        }
        let tall = Frame::uniform(10, 20, [0.5; 3], 0.0);
        let err = crop_roi(&tall, &RoiSpec::new(0, 5, 8)).unwrap_err();
        assert!(err.to_string().contains("origin_y"));
    }

    #[test]
    fn mean_saturation_constant_and_half() {
        let f = Frame::uniform(3, 5, [0.8, 0.4, 0.4], 0.0);
        assert!((mean_saturation(&f) - 0.5).abs() < 1e-15);
        let half = Frame::from_fn(2, 2, 0.0, |y, _| {
            if y == 0 {
                [1.0, 0.0, 0.0]
            } else {
                [0.3, 0.3, 0.3]
            }
        });
        assert_eq!(mean_saturation(&half), 0.5);
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(Frame::new(1, 1, vec![0.5, 1.2, 0.0], 0.0).is_err());
        assert!(Frame::new(1, 1, vec![0.5, 0.2], 0.0).is_err());
    }

    #[test]
    fn png_round_trip_quantizes_to_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        let f = Frame::from_fn(3, 4, 1.5, |y, x| [y as f64 / 3.0, x as f64 / 4.0, 0.25]);
        save_png(&f, &path).unwrap();
        let back = load_png(&path, 1.5).unwrap();
        assert_eq!(back.height(), 3);
        assert_eq!(back.width(), 4);
        for (a, b) in back.data().iter().zip(f.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    fn arb_rgb() -> impl Strategy<Value = [f64; 3]> {
        [0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0]
    }

    proptest! {
        #[test]
        fn saturation_in_unit_interval(rgb in arb_rgb()) {
            let s = saturation(rgb);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn saturation_scale_invariant(rgb in arb_rgb(), c in 0.001f64..=1.0) {
            let scaled = [rgb[0] * c, rgb[1] * c, rgb[2] * c];
            prop_assert!((saturation(rgb) - saturation(scaled)).abs() < 1e-12);
        }

        #[test]
        fn full_frame_crop_preserves_mean(seed in any::<u64>(), h in 1usize..8, w in 1usize..8) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let side = h.min(w);
            let f = Frame::from_fn(side, side, 0.0, |_, _| [rng.random(), rng.random(), rng.random()]);
            let c = crop_roi(&f, &RoiSpec::new(0, 0, side)).unwrap();
            prop_assert_eq!(mean_saturation(&c), mean_saturation(&f));
        }
    }
}
