use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{contrast_enhance, convert_colorspace, ColorSpace, ContrastMode, ImageBuffer, PipelineError};

/// Number of variants produced per patch.
pub const AUGMENT_FACTOR: usize = 15;
/// Crop side as a fraction of the patch side.
pub const CROP_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentKind {
    Rot90,
    Rot180,
    Rot270,
    FlipH,
    FlipV,
    FlipHV,
    Ycbcr,
    Yiq,
    Hsv,
    Lab,
    Adjust,
    HistEq,
    Clahe,
    Crop1,
    Crop2,
}

impl AugmentKind {
    /// All variants in emission order.
    pub const ALL: [AugmentKind; AUGMENT_FACTOR] = [
        AugmentKind::Rot90,
        AugmentKind::Rot180,
        AugmentKind::Rot270,
        AugmentKind::FlipH,
        AugmentKind::FlipV,
        AugmentKind::FlipHV,
        AugmentKind::Ycbcr,
        AugmentKind::Yiq,
        AugmentKind::Hsv,
        AugmentKind::Lab,
        AugmentKind::Adjust,
        AugmentKind::HistEq,
        AugmentKind::Clahe,
        AugmentKind::Crop1,
        AugmentKind::Crop2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentKind::Rot90 => "rot90",
            AugmentKind::Rot180 => "rot180",
            AugmentKind::Rot270 => "rot270",
            AugmentKind::FlipH => "flip-h",
            AugmentKind::FlipV => "flip-v",
            AugmentKind::FlipHV => "flip-hv",
            AugmentKind::Ycbcr => "ycbcr",
            AugmentKind::Yiq => "yiq",
            AugmentKind::Hsv => "hsv",
            AugmentKind::Lab => "lab",
            AugmentKind::Adjust => "adjust",
            AugmentKind::HistEq => "histeq",
            AugmentKind::Clahe => "clahe",
            AugmentKind::Crop1 => "crop1",
            AugmentKind::Crop2 => "crop2",
        }
    }
}

/// Whether a patch is an original or which augmentation produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Original,
    Augmented(AugmentKind),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original => f.write_str("original"),
            Provenance::Augmented(k) => write!(f, "augmented:{}", k.name()),
        }
    }
}

impl FromStr for Provenance {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "original" {
            return Ok(Provenance::Original);
        }
        s.strip_prefix("augmented:")
            .and_then(|k| AugmentKind::ALL.into_iter().find(|a| a.name() == k))
            .map(Provenance::Augmented)
            .ok_or_else(|| PipelineError::Format(format!("unknown provenance {s:?}")))
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub image: ImageBuffer,
    pub label: usize,
    pub source_id: String,
    pub provenance: Provenance,
}

impl PatchRecord {
    pub fn original(image: ImageBuffer, label: usize, source_id: impl Into<String>) -> Self {
        PatchRecord {
            image,
            label,
            source_id: source_id.into(),
            provenance: Provenance::Original,
        }
    }
}

fn remap(img: &ImageBuffer, out_w: usize, out_h: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> ImageBuffer {
    let c = img.channels();
    let mut data = Vec::with_capacity(out_w * out_h * c);
    for y in 0..out_h {
        for x in 0..out_w {
            let (sx, sy) = src(x, y);
            data.extend_from_slice(img.pixel(sx, sy));
        }
    }
    ImageBuffer::new(out_w, out_h, img.space(), data).expect("remap preserves sample count")
}

/// Quarter turn clockwise: `[[a,b],[c,d]] → [[c,a],[d,b]]`.
pub fn rotate90(img: &ImageBuffer) -> ImageBuffer {
    let h = img.height();
    remap(img, h, img.width(), |x, y| (y, h - 1 - x))
}

pub fn rotate180(img: &ImageBuffer) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    remap(img, w, h, |x, y| (w - 1 - x, h - 1 - y))
}

pub fn rotate270(img: &ImageBuffer) -> ImageBuffer {
    let w = img.width();
    remap(img, img.height(), w, |x, y| (w - 1 - y, x))
}

/// Mirror left-right.
pub fn flip_horizontal(img: &ImageBuffer) -> ImageBuffer {
    let w = img.width();
    remap(img, w, img.height(), |x, y| (w - 1 - x, y))
}

/// Mirror top-bottom.
pub fn flip_vertical(img: &ImageBuffer) -> ImageBuffer {
    let h = img.height();
    remap(img, img.width(), h, |x, y| (x, h - 1 - y))
}

/// Reflects a coordinate into `[0, n-1]` (mirror about the edge samples).
fn reflect(p: f64, n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let period = 2.0 * (n - 1) as f64;
    let m = p.rem_euclid(period);
    if m > (n - 1) as f64 {
        period - m
    } else {
        m
    }
}

fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64, out: &mut Vec<u8>) {
    let (x, y) = (reflect(x, img.width()), reflect(y, img.height()));
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    for ch in 0..img.channels() {
        let v = |xx, yy| img.pixel(xx, yy)[ch] as f64;
        let top = v(x0, y0) * (1.0 - fx) + v(x1, y0) * fx;
        let bottom = v(x0, y1) * (1.0 - fx) + v(x1, y1) * fx;
        out.push((top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8);
    }
}

/// Crop window placement and rotation for one random crop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropParams {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    /// Rotation about the crop centre, radians.
    pub angle: f64,
}

impl CropParams {
    pub fn random(img: &ImageBuffer, rng: &mut impl Rng) -> Self {
        let width = ((img.width() as f64 * CROP_FRACTION).round() as usize).max(1);
        let height = ((img.height() as f64 * CROP_FRACTION).round() as usize).max(1);
        CropParams {
            x: rng.gen_range(0..=img.width() - width),
            y: rng.gen_range(0..=img.height() - height),
            width,
            height,
            angle: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }
}

/// Rotated crop rescaled to the source size; bilinear, reflect-padded.
pub fn rotated_crop(img: &ImageBuffer, p: &CropParams) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let (sin, cos) = p.angle.sin_cos();
    let (cx, cy) = (
        p.x as f64 + (p.width as f64 - 1.0) / 2.0,
        p.y as f64 + (p.height as f64 - 1.0) / 2.0,
    );
    let mut data = Vec::with_capacity(img.data().len());
    for y in 0..h {
        for x in 0..w {
            let du = (x as f64 + 0.5) * p.width as f64 / w as f64 - 0.5 - (p.width as f64 - 1.0) / 2.0;
            let dv = (y as f64 + 0.5) * p.height as f64 / h as f64 - 0.5 - (p.height as f64 - 1.0) / 2.0;
            sample_bilinear(img, cx + cos * du - sin * dv, cy + sin * du + cos * dv, &mut data);
        }
    }
    ImageBuffer::new(w, h, img.space(), data).expect("same shape")
}

/// Crop generator for one patch: keyed by the run seed, the source id and the
/// pixel content so sibling patches of one photograph get different crops.
fn crop_rng(patch: &PatchRecord, seed: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((patch.source_id.len() as u64).to_le_bytes());
    h.update(patch.source_id.as_bytes());
    h.update((patch.image.width() as u64).to_le_bytes());
    h.update((patch.image.height() as u64).to_le_bytes());
    h.update(patch.image.data());
    let digest = h.finalize();
    ChaCha8Rng::from_seed(digest.into())
}

/// The 15 augmented variants of an RGB patch, in [`AugmentKind::ALL`] order.
pub fn augment_patch(patch: &PatchRecord, seed: u64) -> Result<Vec<PatchRecord>, PipelineError> {
    let img = &patch.image;
    img.expect_space(&[ColorSpace::Rgb], "augmentation")?;
    let mut rng = crop_rng(patch, seed);
    let crops = [CropParams::random(img, &mut rng), CropParams::random(img, &mut rng)];
    AugmentKind::ALL
        .into_iter()
        .map(|kind| {
            let image = match kind {
                AugmentKind::Rot90 => rotate90(img),
                AugmentKind::Rot180 => rotate180(img),
                AugmentKind::Rot270 => rotate270(img),
                AugmentKind::FlipH => flip_horizontal(img),
                AugmentKind::FlipV => flip_vertical(img),
                AugmentKind::FlipHV => flip_vertical(&flip_horizontal(img)),
                AugmentKind::Ycbcr => convert_colorspace(img, ColorSpace::Ycbcr)?,
                AugmentKind::Yiq => convert_colorspace(img, ColorSpace::Yiq)?,
                AugmentKind::Hsv => convert_colorspace(img, ColorSpace::Hsv)?,
                AugmentKind::Lab => convert_colorspace(img, ColorSpace::Lab)?,
                AugmentKind::Adjust => contrast_enhance(img, ContrastMode::IntensityAdjust)?,
                AugmentKind::HistEq => contrast_enhance(img, ContrastMode::HistEq)?,
                AugmentKind::Clahe => contrast_enhance(img, ContrastMode::Clahe)?,
                AugmentKind::Crop1 => rotated_crop(img, &crops[0]),
                AugmentKind::Crop2 => rotated_crop(img, &crops[1]),
            };
            Ok(PatchRecord {
                image,
                label: patch.label,
                source_id: patch.source_id.clone(),
                provenance: Provenance::Augmented(kind),
            })
        })
        .collect()
}

/// Number of augmented patches produced from `originals` inputs.
pub fn augmented_count(originals: usize) -> usize {
    originals * AUGMENT_FACTOR
}
