//! Per-pixel colour transforms from 8-bit RGB, requantized to 8-bit channels.
//!
//! Channel scalings:
//! - HSV: hue `h/360·255`, saturation and value `·255`.
//! - YCbCr: full-range BT.601, chroma offset 128.
//! - YIQ: luma as is; I and Q mapped linearly from their symmetric ranges onto 0–255.
//! - L\*a\*b\* / L\*u\*v\*: D65, sRGB-linearized; `L·255/100`, a/b `+128`,
//!   u `(u+134)·255/354`, v `(v+140)·255/262`.

use super::{ColorSpace, ImageBuffer, PipelineError};

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];
const I_MAX: f64 = 0.595_716 * 255.0;
const Q_MAX: f64 = 0.522_591 * 255.0;

fn q8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 luma of 8-bit RGB samples.
pub fn luminance(px: &[u8]) -> f64 {
    LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64
}

/// Hexcone HSV of RGB in [0,1]: hue in degrees [0,360), s and v in [0,1].
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let h = if c == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / c + 2.0)
    } else {
        60.0 * ((r - g) / c + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { c / max };
    [h, s, max]
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn linearize(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn rgb_to_xyz(px: &[u8]) -> [f64; 3] {
    let [r, g, b] = [0, 1, 2].map(|i| linearize(px[i] as f64 / 255.0));
    [
        0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b,
        0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b,
        0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b,
    ]
}

fn lab_f(t: f64) -> f64 {
    const D: f64 = 6.0 / 29.0;
    if t > D * D * D {
        t.cbrt()
    } else {
        t / (3.0 * D * D) + 4.0 / 29.0
    }
}

/// CIE L\*a\*b\* (D65) of an 8-bit sRGB pixel.
pub fn rgb_to_lab(px: &[u8]) -> [f64; 3] {
    let [x, y, z] = rgb_to_xyz(px);
    let (fx, fy, fz) = (lab_f(x / WHITE[0]), lab_f(y / WHITE[1]), lab_f(z / WHITE[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// CIE L\*u\*v\* (D65) of an 8-bit sRGB pixel.
pub fn rgb_to_luv(px: &[u8]) -> [f64; 3] {
    let [x, y, z] = rgb_to_xyz(px);
    let l = 116.0 * lab_f(y / WHITE[1]) - 16.0;
    let denom = x + 15.0 * y + 3.0 * z;
    if denom == 0.0 {
        return [l, 0.0, 0.0];
    }
    let wd = WHITE[0] + 15.0 * WHITE[1] + 3.0 * WHITE[2];
    let (un, vn) = (4.0 * WHITE[0] / wd, 9.0 * WHITE[1] / wd);
    let (u, v) = (4.0 * x / denom, 9.0 * y / denom);
    [l, 13.0 * l * (u - un), 13.0 * l * (v - vn)]
}

fn convert_pixel(px: &[u8], target: ColorSpace) -> [u8; 3] {
    let [r, g, b] = [px[0] as f64, px[1] as f64, px[2] as f64];
    match target {
        ColorSpace::Rgb => [px[0], px[1], px[2]],
        ColorSpace::Gray => [q8(luminance(px)), 0, 0],
        ColorSpace::Hsv => {
            let [h, s, v] = rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0);
            [q8(h / 360.0 * 255.0), q8(s * 255.0), q8(v * 255.0)]
        }
        ColorSpace::Ycbcr => [
            q8(luminance(px)),
            q8(128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b),
            q8(128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b),
        ],
        ColorSpace::Yiq => {
            let i = 0.595_716 * r - 0.274_453 * g - 0.321_263 * b;
            let q = 0.211_456 * r - 0.522_591 * g + 0.311_135 * b;
            [
                q8(luminance(px)),
                q8(127.5 + 127.5 * i / I_MAX),
                q8(127.5 + 127.5 * q / Q_MAX),
            ]
        }
        ColorSpace::Lab => {
            let [l, a, b] = rgb_to_lab(px);
            [q8(l * 255.0 / 100.0), q8(a + 128.0), q8(b + 128.0)]
        }
        ColorSpace::Luv => {
            let [l, u, v] = rgb_to_luv(px);
            [
                q8(l * 255.0 / 100.0),
                q8((u + 134.0) * 255.0 / 354.0),
                q8((v + 140.0) * 255.0 / 262.0),
            ]
        }
    }
}

pub fn convert_colorspace(img: &ImageBuffer, target: ColorSpace) -> Result<ImageBuffer, PipelineError> {
    img.expect_space(&[ColorSpace::Rgb], "colour conversion")?;
    let c = target.channels();
    let mut data = Vec::with_capacity(img.width() * img.height() * c);
    for px in img.data().chunks_exact(3) {
        data.extend_from_slice(&convert_pixel(px, target)[..c]);
    }
    ImageBuffer::new(img.width(), img.height(), target, data)
}

/// Inverse of the 8-bit HSV encoding.
pub fn hsv_image_to_rgb(img: &ImageBuffer) -> Result<ImageBuffer, PipelineError> {
    img.expect_space(&[ColorSpace::Hsv], "HSV decoding")?;
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        let rgb = hsv_to_rgb(px[0] as f64 / 255.0 * 360.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0);
        data.extend(rgb.map(|v| q8(v * 255.0)));
    }
    ImageBuffer::new(img.width(), img.height(), ColorSpace::Rgb, data)
}

/// Luminance image of an RGB (or already gray) buffer.
pub fn to_gray(img: &ImageBuffer) -> Result<ImageBuffer, PipelineError> {
    match img.space() {
        ColorSpace::Gray => Ok(img.clone()),
        _ => convert_colorspace(img, ColorSpace::Gray),
    }
}
