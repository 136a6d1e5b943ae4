//! Hand-crafted descriptors: uniform LBP histogram, HOG, and per-channel
//! colour histograms, concatenated after a resize to a fixed extent.

mod color_hist;
mod hog;
mod io;
mod lbp;
mod resize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{ColorSpace, ImageBuffer, PipelineError};

pub use color_hist::color_histograms;
pub use hog::{hog_descriptor, hog_len, hog_plane};
pub use io::{parse_feature_csv, write_feature_csv, FeatureSidecar, FeatureTable};
pub use lbp::{lbp_code, lbp_histogram, uniform_bin, LBP_BINS};
pub use resize::resize_patch;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image {width}×{height} is smaller than the {min}×{min} minimum")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("invalid feature configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LbpMapping {
    Uniform59,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpConfig {
    pub radius: usize,
    pub neighbors: usize,
    pub mapping: LbpMapping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HogConfig {
    /// Cell side in pixels.
    pub cell: usize,
    /// Block side in cells.
    pub block: usize,
    /// Block stride in cells.
    pub stride: usize,
    /// Unsigned orientation bins over 0–180°.
    pub bins: usize,
    /// L2-Hys clip.
    pub clip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorConfig {
    pub bins: usize,
    pub spaces: Vec<ColorSpace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub lbp: LbpConfig,
    pub hog: HogConfig,
    pub color: ColorConfig,
    /// Resize target `[width, height]`.
    pub resize: [usize; 2],
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            lbp: LbpConfig {
                radius: 1,
                neighbors: 8,
                mapping: LbpMapping::Uniform59,
            },
            hog: HogConfig {
                cell: 8,
                block: 2,
                stride: 1,
                bins: 9,
                clip: 0.2,
            },
            color: ColorConfig {
                bins: 32,
                spaces: vec![ColorSpace::Rgb, ColorSpace::Hsv, ColorSpace::Luv],
            },
            resize: [256, 256],
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::Config(m.into()));
        if self.lbp.radius != 1 || self.lbp.neighbors != 8 {
            return bad("only radius-1, 8-neighbour LBP is implemented");
        }
        let h = &self.hog;
        if h.cell == 0 || h.block == 0 || h.stride == 0 || h.bins == 0 || h.clip.is_nan() || h.clip <= 0.0 {
            return bad("HOG cell, block, stride, bins and clip must be positive");
        }
        if self.color.bins == 0 || self.color.bins > 256 || self.color.spaces.is_empty() {
            return bad("colour histograms need 1–256 bins and at least one space");
        }
        if self.color.spaces.iter().any(|s| s.channels() != 3) {
            return bad("colour histogram spaces must have 3 channels");
        }
        if self.resize[0] < 3 || self.resize[1] < 3 {
            return bad("resize target must be at least 3×3");
        }
        Ok(())
    }

    pub fn color_len(&self) -> usize {
        self.color.spaces.len() * 3 * self.color.bins
    }
}

/// Descriptor selection, always concatenated as lbp ‖ hog ‖ color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    #[serde(rename = "lbp")]
    Lbp,
    #[serde(rename = "lbp+hog")]
    LbpHog,
    #[serde(rename = "lbp+hog+color")]
    LbpHogColor,
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::Lbp => "lbp",
            Which::LbpHog => "lbp+hog",
            Which::LbpHogColor => "lbp+hog+color",
        })
    }
}

impl FromStr for Which {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lbp" => Ok(Which::Lbp),
            "lbp+hog" => Ok(Which::LbpHog),
            "lbp+hog+color" => Ok(Which::LbpHogColor),
            _ => Err(FeatureError::Config(format!("unknown descriptor set {s:?}"))),
        }
    }
}

/// A named contiguous slice of a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Vec<Segment>,
}

/// Segment layout for `which` under `cfg`.
pub fn feature_layout(which: Which, cfg: &FeatureConfig) -> Vec<Segment> {
    let mut parts = vec![("lbp".to_string(), LBP_BINS)];
    if which != Which::Lbp {
        parts.push(("hog".to_string(), hog_len(cfg.resize[0], cfg.resize[1], &cfg.hog)));
    }
    if which == Which::LbpHogColor {
        for space in &cfg.color.spaces {
            let name = serde_json::to_value(space)
                .expect("enum")
                .as_str()
                .expect("string")
                .to_string();
            parts.push((format!("color:{name}"), 3 * cfg.color.bins));
        }
    }
    let mut offset = 0;
    parts
        .into_iter()
        .map(|(name, len)| {
            let s = Segment { name, offset, len };
            offset += len;
            s
        })
        .collect()
}

pub fn extract_features(img: &ImageBuffer, which: Which, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    cfg.validate()?;
    let allowed: &[ColorSpace] = if which == Which::LbpHogColor {
        &[ColorSpace::Rgb]
    } else {
        &[ColorSpace::Rgb, ColorSpace::Gray]
    };
    if !allowed.contains(&img.space()) {
        return Err(
            PipelineError::UnsupportedInput(format!("feature extraction does not accept {:?}", img.space())).into(),
        );
    }
    let resized = resize_patch(img, cfg.resize[0], cfg.resize[1])?;
    let gray = crate::pipeline::to_gray(&resized)?;
    let mut values = lbp_histogram(&gray)?;
    if which != Which::Lbp {
        values.extend(hog_descriptor(&gray, &cfg.hog)?);
    }
    if which == Which::LbpHogColor {
        values.extend(color_histograms(&resized, &cfg.color)?);
    }
    let layout = feature_layout(which, cfg);
    debug_assert_eq!(layout.iter().map(|s| s.len).sum::<usize>(), values.len());
    Ok(FeatureVector { values, layout })
}
