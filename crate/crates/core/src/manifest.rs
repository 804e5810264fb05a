//! Clip manifests: ordered frame paths with timestamps, stored as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{load_png, save_png, RoiSpec};
use crate::magnify::VideoClip;

pub const MANIFEST_FILE: &str = "clip.json";
pub const FRAMES_DIR: &str = "frames";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipManifest {
    pub frame_rate_hz: f64,
    pub roi: RoiSpec,
    pub frames: Vec<FrameEntry>,
}

impl ClipManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("{FRAMES_DIR}/frame_{index:05}.png")
}

/// Writes frames as PNG under `dir/frames` plus `dir/clip.json`.
pub fn write_clip(clip: &VideoClip, roi: RoiSpec, dir: &Path) -> Result<ClipManifest> {
    let frames_dir = dir.join(FRAMES_DIR);
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let entries: Vec<FrameEntry> = clip
        .frames
        .par_iter()
        .enumerate()
        .map(|(i, frame)| {
            let rel = frame_file_name(i);
            save_png(frame, &dir.join(&rel))?;
            Ok(FrameEntry {
                path: rel,
                t: frame.timestamp,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = ClipManifest {
        frame_rate_hz: clip.frame_rate_hz,
        roi,
        frames: entries,
    };
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Loads the clip described by `dir/clip.json`.
pub fn read_clip(dir: &Path) -> Result<(VideoClip, ClipManifest)> {
    let manifest = ClipManifest::load(&dir.join(MANIFEST_FILE))?;
    let frames = manifest
        .frames
        .par_iter()
        .map(|e| load_png(&dir.join(&e.path), e.t))
        .collect::<Result<Vec<_>>>()?;
    let clip = VideoClip::new(frames, manifest.frame_rate_hz)?;
    Ok((clip, manifest))
}

/// Subject directories (`subject_*`) under `root`, sorted by name.
pub fn subject_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("subject_") && entry.path().is_dir() {
            dirs.push((name, entry.path()));
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no subject_* directories"),
        ));
    }
    Ok(dirs)
}
