//! NISDL-I (SSI as a fourth input channel), NISDL-II (separate SSI branch
//! joined before the dense head), the SSI-free DL ablation and the NIPST
//! linear baseline.
//!
//! The backbone is a compact conv stack standing in for DenseNet201: stages
//! of 3x3 conv + ReLU + 2x2 average pooling until the side reaches
//! `spatial_out`, then a 1x1 conv to `feature_dim` channels.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use skintemp_nn::{
    concat_last, split_last, AvgPool1d, AvgPool2d, Conv1d, Conv2d, Dense, Flatten, Layer, Param,
    Parameterized, Relu, Sequential, Tensor,
};

use crate::error::{Error, Result};
use crate::ssi::{fit_ssi, predict_linear};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::config("model.profile", format!("unknown profile `{other}`"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        })
    }
}

/// Trainable architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Nisdl1,
    Nisdl2,
    Dl,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Nisdl1, Variant::Nisdl2, Variant::Dl];

    pub fn id(self) -> &'static str {
        match self {
            Variant::Nisdl1 => "nisdl1",
            Variant::Nisdl2 => "nisdl2",
            Variant::Dl => "dl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub input_side: usize,
    pub feature_dim: usize,
    pub spatial_out: usize,
    /// Output channels of each 3x3 conv stage.
    pub stage_channels: Vec<usize>,
    /// NISDL-I 1x1 reduction convs after the 4-channel input; must end in 3.
    pub fusion_channels: Vec<usize>,
    /// Channels of the first 1-D conv in the NISDL-II SSI branch.
    pub ssi_channels: usize,
    pub profile: Profile,
}

impl BackboneConfig {
    pub fn paper() -> Self {
        Self {
            input_side: 150,
            feature_dim: 1920,
            spatial_out: 4,
            stage_channels: vec![16, 32, 64, 128, 256],
            fusion_channels: vec![16, 16, 8, 3],
            ssi_channels: 4,
            profile: Profile::Paper,
        }
    }

    pub fn desk() -> Self {
        Self {
            input_side: 32,
            feature_dim: 192,
            spatial_out: 4,
            stage_channels: vec![8, 16, 24],
            fusion_channels: vec![16, 16, 8, 3],
            ssi_channels: 4,
            profile: Profile::Desk,
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(),
            Profile::Desk => Self::desk(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.feature_dim % 3 != 0 {
            return Err(Error::config(
                "model.backbone.feature_dim",
                format!("{} must be a positive multiple of 3", self.feature_dim),
            ));
        }
        let mut side = self.input_side;
        let mut stages = 0;
        while side > self.spatial_out {
            side /= 2;
            stages += 1;
        }
        if side != self.spatial_out || self.spatial_out == 0 {
            return Err(Error::config(
                "model.backbone.spatial_out",
                format!(
                    "halving {} never lands on {}",
                    self.input_side, self.spatial_out
                ),
            ));
        }
        if self.stage_channels.len() != stages || self.stage_channels.contains(&0) {
            return Err(Error::config(
                "model.backbone.stage_channels",
                format!(
                    "need {stages} nonzero entries to reduce {} to {}, got {:?}",
                    self.input_side, self.spatial_out, self.stage_channels
                ),
            ));
        }
        if self.fusion_channels.last() != Some(&3) || self.fusion_channels.contains(&0) {
            return Err(Error::config(
                "model.backbone.fusion_channels",
                "must be nonzero and end with 3",
            ));
        }
        if self.ssi_channels == 0 {
            return Err(Error::config("model.backbone.ssi_channels", "must be nonzero"));
        }
        Ok(())
    }

    pub fn ssi_width(&self) -> usize {
        self.feature_dim / 3
    }

    /// Hidden widths of the dense head: 0.4 and 0.2 of the fused width.
    pub fn head_widths(&self) -> (usize, usize) {
        let fused = (self.feature_dim + self.ssi_width()) as f64;
        let h1 = (0.4 * fused).round() as usize;
        (h1, (h1 as f64 / 2.0).round() as usize)
    }
}

pub struct FusionModel {
    variant: Variant,
    cfg: BackboneConfig,
    fusion: Sequential,
    backbone: Sequential,
    pool: Sequential,
    ssi_branch: Sequential,
    head: Sequential,
}

fn backbone<R: Rng + ?Sized>(cfg: &BackboneConfig, rng: &mut R) -> Sequential {
    let mut seq = Sequential::new();
    let mut cin = 3;
    for &cout in &cfg.stage_channels {
        seq.push(Conv2d::new(3, cin, cout, rng));
        seq.push(Relu::new());
        seq.push(AvgPool2d::square(2));
        cin = cout;
    }
    seq.push(Conv2d::new(1, cin, cfg.feature_dim, rng));
    seq.push(Relu::new());
    seq
}

fn pool(cfg: &BackboneConfig) -> Sequential {
    Sequential::new()
        .with(AvgPool2d::square(cfg.spatial_out))
        .with(Flatten::new())
}

fn mlp_head<R: Rng + ?Sized>(inputs: usize, cfg: &BackboneConfig, rng: &mut R) -> Sequential {
    let (h1, h2) = cfg.head_widths();
    Sequential::new()
        .with(Dense::new(inputs, h1, rng))
        .with(Relu::new())
        .with(Dense::new(h1, h2, rng))
        .with(Relu::new())
        .with(Dense::new(h2, 1, rng))
}

pub fn build_nisdl1<R: Rng + ?Sized>(cfg: &BackboneConfig, rng: &mut R) -> Result<FusionModel> {
    cfg.validate()?;
    let mut fusion = Sequential::new();
    let mut cin = 4;
    for &cout in &cfg.fusion_channels {
        fusion.push(Conv2d::new(1, cin, cout, rng));
        fusion.push(Relu::new());
        cin = cout;
    }
    let backbone = backbone(cfg, rng);
    let head = Sequential::new().with(Dense::new(cfg.feature_dim, 1, rng));
    Ok(FusionModel {
        variant: Variant::Nisdl1,
        cfg: cfg.clone(),
        fusion,
        backbone,
        pool: pool(cfg),
        ssi_branch: Sequential::new(),
        head,
    })
}

pub fn build_nisdl2<R: Rng + ?Sized>(cfg: &BackboneConfig, rng: &mut R) -> Result<FusionModel> {
    cfg.validate()?;
    let backbone = backbone(cfg, rng);
    // The last conv has no ReLU so the branch cannot be switched off at init.
    let ssi_branch = Sequential::new()
        .with(Conv1d::new(3, 1, cfg.ssi_channels, rng))
        .with(Relu::new())
        .with(AvgPool1d::new(3))
        .with(Conv1d::new(3, cfg.ssi_channels, 1, rng))
        .with(Flatten::new());
    let head = mlp_head(cfg.feature_dim + cfg.ssi_width(), cfg, rng);
    Ok(FusionModel {
        variant: Variant::Nisdl2,
        cfg: cfg.clone(),
        fusion: Sequential::new(),
        backbone,
        pool: pool(cfg),
        ssi_branch,
        head,
    })
}

pub fn build_dl<R: Rng + ?Sized>(cfg: &BackboneConfig, rng: &mut R) -> Result<FusionModel> {
    cfg.validate()?;
    let backbone = backbone(cfg, rng);
    let head = mlp_head(cfg.feature_dim, cfg, rng);
    Ok(FusionModel {
        variant: Variant::Dl,
        cfg: cfg.clone(),
        fusion: Sequential::new(),
        backbone,
        pool: pool(cfg),
        ssi_branch: Sequential::new(),
        head,
    })
}

pub fn build_model<R: Rng + ?Sized>(
    variant: Variant,
    cfg: &BackboneConfig,
    rng: &mut R,
) -> Result<FusionModel> {
    match variant {
        Variant::Nisdl1 => build_nisdl1(cfg, rng),
        Variant::Nisdl2 => build_nisdl2(cfg, rng),
        Variant::Dl => build_dl(cfg, rng),
    }
}

/// Per-stage activation shapes, in forward order.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeTrace(pub Vec<(String, Vec<usize>)>);

impl ShapeTrace {
    pub fn get(&self, name: &str) -> Option<&[usize]> {
        self.0
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
    }

    fn extend(&mut self, prefix: &str, steps: Vec<(&'static str, Vec<usize>)>) {
        for (i, (kind, shape)) in steps.into_iter().skip(1).enumerate() {
            self.0.push((format!("{prefix}.{i}.{kind}"), shape));
        }
    }

    fn push(&mut self, name: &str, shape: Vec<usize>) {
        self.0.push((name.to_string(), shape));
    }
}

fn ssi_plane(images: &Tensor, ssi: &[f64]) -> Result<Tensor> {
    let &[n, h, w, c] = images.shape() else {
        unreachable!("checked by caller")
    };
    let mut data = Vec::with_capacity(n * h * w * (c + 1));
    for (b, &s) in ssi.iter().enumerate() {
        let img = &images.data()[b * h * w * c..(b + 1) * h * w * c];
        for px in img.chunks_exact(c) {
            data.extend_from_slice(px);
            data.push(s);
        }
    }
    Ok(Tensor::new(vec![n, h, w, c + 1], data)?)
}

impl FusionModel {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.cfg
    }

    pub fn uses_ssi(&self) -> bool {
        self.variant != Variant::Dl
    }

    fn check_inputs(&self, images: &[usize], n_ssi: usize) -> Result<()> {
        let side = self.cfg.input_side;
        if images.len() != 4 || images[1..] != [side, side, 3] {
            return Err(Error::Nn(skintemp_nn::NnError::Shape {
                context: format!("{} image input", self.variant),
                expected: vec![images.first().copied().unwrap_or(0), side, side, 3],
                actual: images.to_vec(),
            }));
        }
        if images[0] != n_ssi {
            return Err(Error::Shape {
                left: images[0],
                right: n_ssi,
            });
        }
        Ok(())
    }

    /// Shapes of every stage for a batch of `n`, without computing anything.
    pub fn trace_shapes(&self, n: usize) -> Result<ShapeTrace> {
        let side = self.cfg.input_side;
        let mut trace = ShapeTrace(Vec::new());
        let image = vec![n, side, side, 3];
        trace.push("input", image.clone());
        let mut cur = image;
        if self.variant == Variant::Nisdl1 {
            cur = vec![n, side, side, 4];
            trace.push("fused_input", cur.clone());
            let steps = self.fusion.trace_shapes(&cur)?;
            cur = steps.last().map(|s| s.1.clone()).unwrap_or(cur);
            trace.extend("fusion", steps);
        }
        let steps = self.backbone.trace_shapes(&cur)?;
        cur = steps.last().map(|s| s.1.clone()).unwrap_or(cur);
        trace.extend("backbone", steps);
        trace.push("backbone_out", cur.clone());
        cur = self.pool.output_shape(&cur)?;
        trace.push("image_features", cur.clone());
        if self.variant == Variant::Nisdl2 {
            let ssi_in = vec![n, self.cfg.feature_dim, 1];
            trace.push("ssi_input", ssi_in.clone());
            let steps = self.ssi_branch.trace_shapes(&ssi_in)?;
            let ssi_out = steps.last().map(|s| s.1.clone()).unwrap_or(ssi_in);
            trace.extend("ssi", steps);
            trace.push("ssi_features", ssi_out.clone());
            cur = vec![n, cur[1] + ssi_out[1]];
        }
        trace.push("head_input", cur.clone());
        let steps = self.head.trace_shapes(&cur)?;
        cur = steps.last().map(|s| s.1.clone()).unwrap_or(cur);
        trace.extend("head", steps);
        trace.push("output", cur);
        Ok(trace)
    }

    /// Predicts one value per image; `ssi` holds one scalar per image.
    pub fn forward(&mut self, images: &Tensor, ssi: &[f64]) -> Result<Tensor> {
        self.check_inputs(images.shape(), ssi.len())?;
        let n = ssi.len();
        let features = match self.variant {
            Variant::Nisdl1 => {
                let x = self.fusion.forward(&ssi_plane(images, ssi)?)?;
                let x = self.backbone.forward(&x)?;
                self.pool.forward(&x)?
            }
            Variant::Dl => {
                let x = self.backbone.forward(images)?;
                self.pool.forward(&x)?
            }
            Variant::Nisdl2 => {
                let x = self.backbone.forward(images)?;
                let img = self.pool.forward(&x)?;
                let f = self.cfg.feature_dim;
                let expanded: Vec<f64> = ssi.iter().flat_map(|&s| std::iter::repeat_n(s, f)).collect();
                let s = self
                    .ssi_branch
                    .forward(&Tensor::new(vec![n, f, 1], expanded)?)?;
                concat_last(&[&img, &s])?
            }
        };
        Ok(self.head.forward(&features)?)
    }

    /// Backpropagates `d loss / d output` into parameter gradients and
    /// returns `d loss / d ssi` per image (zeros for DL).
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Vec<f64>> {
        let n = grad_out.batch();
        let g = self.head.backward(grad_out)?;
        match self.variant {
            Variant::Nisdl1 => {
                let g = self.pool.backward(&g)?;
                let g = self.backbone.backward(&g)?;
                let g = self.fusion.backward(&g)?;
                let per_image = g.len() / n;
                Ok(g.data()
                    .chunks_exact(per_image)
                    .map(|img| img.iter().skip(3).step_by(4).sum())
                    .collect())
            }
            Variant::Dl => {
                let g = self.pool.backward(&g)?;
                self.backbone.backward(&g)?;
                Ok(vec![0.0; n])
            }
            Variant::Nisdl2 => {
                let parts = split_last(&g, &[self.cfg.feature_dim, self.cfg.ssi_width()])?;
                let gi = self.pool.backward(&parts[0])?;
                self.backbone.backward(&gi)?;
                let gs = self.ssi_branch.backward(&parts[1])?;
                let f = self.cfg.feature_dim;
                Ok(gs.data().chunks_exact(f).map(|c| c.iter().sum()).collect())
            }
        }
    }

    /// Drops cached activations.
    pub fn clear(&mut self) {
        for seq in [
            &mut self.fusion,
            &mut self.backbone,
            &mut self.pool,
            &mut self.ssi_branch,
            &mut self.head,
        ] {
            seq.clear();
        }
    }

    /// Mutable access to the NISDL-I fusion weights of the SSI input channel.
    pub fn ssi_channel_weights_mut(&mut self) -> Option<Vec<&mut f64>> {
        if self.variant != Variant::Nisdl1 {
            return None;
        }
        let first = self.fusion.layers_mut().first_mut()?;
        let weight = &mut first.params_mut().into_iter().next()?.value;
        let cout = weight.shape()[3];
        Some(
            weight.data_mut()[3 * cout..4 * cout]
                .iter_mut()
                .collect(),
        )
    }
}

impl Parameterized for FusionModel {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = self.fusion.named_params("fusion");
        out.extend(self.backbone.named_params("backbone"));
        out.extend(self.ssi_branch.named_params("ssi"));
        out.extend(self.head.named_params("head"));
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = self.fusion.named_params_mut("fusion");
        out.extend(self.backbone.named_params_mut("backbone"));
        out.extend(self.ssi_branch.named_params_mut("ssi"));
        out.extend(self.head.named_params_mut("head"));
        out
    }
}

/// Calibration-prefix OLS applied to each query saturation.
pub fn nipst_predict(calibration: &[(f64, f64)], query_s: &[f64]) -> Result<Vec<f64>> {
    let record = fit_ssi(calibration)?;
    Ok(query_s.iter().map(|&s| predict_linear(&record, s)).collect())
}
