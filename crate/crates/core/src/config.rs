//! The run configuration document.
//!
//! Resolution order: built-in defaults for the selected profile, then the
//! TOML file, then command-line flags. The profile itself comes from the
//! `--profile` flag, else `model.profile` in the file, else `paper`.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::magnify::MagnifyConfig;
use crate::models::{BackboneConfig, Profile, Variant};
use crate::synth::SynthDatasetSpec;
use crate::training::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nisdl1,
    Nisdl2,
    Dl,
    Nipst,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Nisdl1,
        ModelKind::Nisdl2,
        ModelKind::Dl,
        ModelKind::Nipst,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Nisdl1 => "nisdl1",
            ModelKind::Nisdl2 => "nisdl2",
            ModelKind::Dl => "dl",
            ModelKind::Nipst => "nipst",
        }
    }

    /// The trainable architecture, `None` for the linear baseline.
    pub fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::Nisdl1 => Some(Variant::Nisdl1),
            ModelKind::Nisdl2 => Some(Variant::Nisdl2),
            ModelKind::Dl => Some(Variant::Dl),
            ModelKind::Nipst => None,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::config("model.variant", format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsiSettings {
    /// Leading share of each subject's labeled frames used to fit its SSI.
    pub calibration_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    pub variant: ModelKind,
    pub profile: Profile,
    pub backbone: BackboneConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSettings {
    /// Relative to the output directory.
    pub report_dir: String,
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthDatasetSpec,
    pub magnify: MagnifyConfig,
    pub ssi: SsiSettings,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub evaluate: EvaluateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl RunConfig {
    /// Published values wherever they exist.
    pub fn paper() -> Self {
        Self {
            seed: 1,
            synth: SynthDatasetSpec::default(),
            magnify: MagnifyConfig::default(),
            ssi: SsiSettings {
                calibration_fraction: 0.2,
            },
            model: ModelSettings {
                variant: ModelKind::Nisdl2,
                profile: Profile::Paper,
                backbone: BackboneConfig::paper(),
            },
            train: TrainConfig::default(),
            evaluate: EvaluateSettings {
                report_dir: "reports".into(),
                batch_size: 64,
            },
        }
    }

    /// Paper defaults with the desk-scale overrides marked below.
    pub fn desk() -> Self {
        let mut cfg = Self::paper();
        // desk override: 8 subjects x 600 s x 2 fps on 40 px frames, 32 px ROI
        cfg.synth.n_subjects = 8;
        cfg.synth.duration_s = 600.0;
        cfg.synth.frame_rate_hz = 2.0;
        cfg.synth.frame_side = 40;
        cfg.synth.roi_side = 32;
        // desk override: band edge must stay below the 1 Hz Nyquist limit
        cfg.magnify.frame_rate_hz = 2.0;
        cfg.magnify.high_cut_hz = 0.8;
        // desk override: compact backbone, F = 192
        cfg.model.profile = Profile::Desk;
        cfg.model.backbone = BackboneConfig::desk();
        // desk override: checkpoint cadence and step size
        cfg.train.checkpoint_every_images = 3000;
        cfg.train.learning_rate = 0.01;
        cfg
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(),
            Profile::Desk => Self::desk(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.magnify.validate()?;
        self.model.backbone.validate()?;
        self.train.validate()?;
        let f = self.ssi.calibration_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::config(
                "ssi.calibration_fraction",
                format!("{f} must lie in (0, 1)"),
            ));
        }
        if (self.magnify.frame_rate_hz - self.synth.frame_rate_hz).abs() > 1e-9 {
            return Err(Error::config(
                "magnify.frame_rate_hz",
                format!(
                    "{} differs from synth.frame_rate_hz {}",
                    self.magnify.frame_rate_hz, self.synth.frame_rate_hz
                ),
            ));
        }
        if self.synth.roi_side != self.model.backbone.input_side {
            return Err(Error::config(
                "synth.roi_side",
                format!(
                    "{} differs from model.backbone.input_side {}",
                    self.synth.roi_side, self.model.backbone.input_side
                ),
            ));
        }
        if self.model.backbone.profile != self.model.profile {
            return Err(Error::config(
                "model.backbone.profile",
                format!(
                    "`{}` differs from model.profile `{}`",
                    self.model.backbone.profile, self.model.profile
                ),
            ));
        }
        if self.evaluate.batch_size == 0 {
            return Err(Error::config("evaluate.batch_size", "must be positive"));
        }
        Ok(())
    }

    /// Profile defaults overlaid with `text`. Unknown keys and type
    /// mismatches are reported with their dotted path.
    pub fn from_toml_str(text: &str, profile_flag: Option<Profile>) -> Result<Self> {
        let file: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        let profile = match profile_flag {
            Some(p) => p,
            None => match file.get("model").and_then(|m| m.get("profile")) {
                Some(Value::String(s)) => s.parse()?,
                Some(_) => return Err(Error::config("model.profile", "expected a string")),
                None => Profile::Paper,
            },
        };
        let base = Self::for_profile(profile);
        let mut merged = Table::try_from(&base).expect("config serializes");
        overlay(&mut merged, &file, "")?;
        if profile_flag.is_some() {
            if let Some(Value::Table(model)) = merged.get_mut("model") {
                model.insert("profile".into(), Value::String(profile.to_string()));
            }
        }
        let cfg: Self = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, profile_flag: Option<Profile>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml_str(&text, profile_flag)
            }
            None => {
                let cfg = Self::for_profile(profile_flag.unwrap_or(Profile::Paper));
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn overlay(base: &mut Table, file: &Table, prefix: &str) -> Result<()> {
    for (key, value) in file {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let Some(slot) = base.get_mut(key) else {
            return Err(Error::config(path, "unknown key"));
        };
        match (slot, value) {
            (Value::Table(b), Value::Table(f)) => overlay(b, f, &path)?,
            (slot @ Value::Float(_), Value::Integer(i)) => *slot = Value::Float(*i as f64),
            (slot, value) if type_name(slot) == type_name(value) => *slot = value.clone(),
            (slot, value) => {
                return Err(Error::config(
                    path,
                    format!("expected {}, found {}", type_name(slot), type_name(value)),
                ))
            }
        }
    }
    Ok(())
}
