use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::Tensor;

/// Colour space tag of an [`ImageBuffer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Gray,
    Hsv,
    Ycbcr,
    Yiq,
    Lab,
    Luv,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }
}

/// 8-bit image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    space: ColorSpace,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, space: ColorSpace, data: Vec<u8>) -> Result<Self, PipelineError> {
        if width == 0 || height == 0 {
            return Err(PipelineError::Format(format!("degenerate image {width}×{height}")));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(space.channels()))
            .ok_or_else(|| PipelineError::Format(format!("image {width}×{height} too large")))?;
        if data.len() != expected {
            return Err(PipelineError::Format(format!(
                "{width}×{height} {space:?} needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            space,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, space: ColorSpace, value: &[u8]) -> Result<Self, PipelineError> {
        if value.len() != space.channels() {
            return Err(PipelineError::Format(format!(
                "fill value has {} channels",
                value.len()
            )));
        }
        let data = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * value.len())
            .collect();
        Self::new(width, height, space, data)
    }

    /// Builds an image from a per-pixel function returning `channels` samples.
    pub fn from_fn(width: usize, height: usize, space: ColorSpace, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let c = space.channels();
        let mut data = Vec::with_capacity(width * height * c);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y)[..c]);
            }
        }
        Self::new(width, height, space, data).expect("dimensions consistent by construction")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.space.channels()
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = self.channels();
        let i = (y * self.width + x) * c;
        &self.data[i..i + c]
    }

    /// Same samples under another tag with the same channel count.
    pub fn retag(self, space: ColorSpace) -> Result<Self, PipelineError> {
        if space.channels() != self.channels() {
            return Err(PipelineError::Format(format!(
                "cannot retag {:?} as {space:?}",
                self.space
            )));
        }
        Ok(ImageBuffer { space, ..self })
    }

    pub(crate) fn expect_space(&self, allowed: &[ColorSpace], op: &str) -> Result<(), PipelineError> {
        if allowed.contains(&self.space) {
            Ok(())
        } else {
            Err(PipelineError::UnsupportedInput(format!(
                "{op} does not accept {:?} images",
                self.space
            )))
        }
    }

    /// `C×H×W` tensor of the raw sample values (0–255).
    pub fn to_tensor(&self) -> Tensor {
        let (c, plane) = (self.channels(), self.width * self.height);
        let mut out = vec![0.0; c * plane];
        for (i, px) in self.data.chunks_exact(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                out[ch * plane + i] = v as f64;
            }
        }
        Tensor::new(&[c, self.height, self.width], out).expect("sizes match")
    }
}

/// Parses a binary P6 PPM with maxval 255. Header comments (`#` to end of
/// line) and any whitespace between tokens are accepted.
pub fn read_ppm(bytes: &[u8]) -> Result<ImageBuffer, PipelineError> {
    let fmt = |m: &str| PipelineError::Format(format!("PPM: {m}"));
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(fmt("missing P6 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(fmt("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos || pos - start > 9 {
            return Err(fmt("expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .expect("≤ 9 digits");
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(fmt("missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(fmt(&format!("maxval {maxval} (only 255 is supported)")));
    }
    if width == 0 || height == 0 {
        return Err(fmt("zero dimension"));
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| fmt("dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(fmt(&format!("truncated payload: {} of {need} bytes", payload.len())));
    }
    ImageBuffer::new(width, height, ColorSpace::Rgb, payload[..need].to_vec())
}

/// Encodes any 3-channel buffer as P6. Colour-converted images are written
/// with their raw channel samples; the tag is not recorded.
pub fn write_ppm(img: &ImageBuffer) -> Result<Vec<u8>, PipelineError> {
    if img.channels() != 3 {
        return Err(PipelineError::UnsupportedInput(format!(
            "PPM needs 3 channels, image is {:?}",
            img.space
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}
