use serde::{Deserialize, Serialize};

use super::color::luminance;
use super::{ColorSpace, ImageBuffer, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContrastMode {
    /// Per-channel linear stretch of the 1st–99th percentile range onto 0–255.
    IntensityAdjust,
    /// Global histogram equalization of the luminance.
    HistEq,
    /// Contrast-limited adaptive equalization of the luminance.
    Clahe,
}

pub const CLAHE_TILES: usize = 8;
pub const CLAHE_CLIP: f64 = 0.01;

pub fn contrast_enhance(img: &ImageBuffer, mode: ContrastMode) -> Result<ImageBuffer, PipelineError> {
    img.expect_space(&[ColorSpace::Rgb, ColorSpace::Gray], "contrast enhancement")?;
    match mode {
        ContrastMode::IntensityAdjust => Ok(intensity_adjust(img)),
        ContrastMode::HistEq => Ok(on_luminance(img, |plane, _, _| {
            let map = equalize_map(&histogram(plane));
            plane.iter().map(|&v| map[v as usize]).collect()
        })),
        ContrastMode::Clahe => Ok(on_luminance(img, clahe)),
    }
}

fn histogram(values: &[u8]) -> [usize; 256] {
    let mut h = [0usize; 256];
    for &v in values {
        h[v as usize] += 1;
    }
    h
}

/// Percentile limits: lowest level whose CDF exceeds 1%, lowest level whose CDF reaches 99%.
fn stretch_limits(hist: &[usize; 256], n: usize) -> (usize, usize) {
    let (lo_t, hi_t) = (0.01 * n as f64, 0.99 * n as f64);
    let mut cdf = 0usize;
    let (mut lo, mut hi) = (None, None);
    for (v, &c) in hist.iter().enumerate() {
        cdf += c;
        if lo.is_none() && cdf as f64 > lo_t {
            lo = Some(v);
        }
        if hi.is_none() && cdf as f64 >= hi_t {
            hi = Some(v);
        }
    }
    (lo.unwrap_or(0), hi.unwrap_or(255))
}

fn intensity_adjust(img: &ImageBuffer) -> ImageBuffer {
    let c = img.channels();
    let n = img.width() * img.height();
    let mut out = img.data().to_vec();
    for ch in 0..c {
        let plane: Vec<u8> = img.data().iter().skip(ch).step_by(c).copied().collect();
        let (lo, hi) = stretch_limits(&histogram(&plane), n);
        if hi <= lo {
            continue;
        }
        let scale = 255.0 / (hi - lo) as f64;
        for v in out.iter_mut().skip(ch).step_by(c) {
            *v = ((*v as f64 - lo as f64) * scale).round().clamp(0.0, 255.0) as u8;
        }
    }
    ImageBuffer::new(img.width(), img.height(), img.space(), out).expect("same shape")
}

/// `v ↦ round(255·(cdf(v) − cdf_min)/(n − cdf_min))`; identity when only one level is present.
fn equalize_map(hist: &[usize; 256]) -> [u8; 256] {
    let n: usize = hist.iter().sum();
    let cdf_min = hist.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let mut map = [0u8; 256];
    if n == cdf_min {
        for (v, m) in map.iter_mut().enumerate() {
            *m = v as u8;
        }
        return map;
    }
    let mut cdf = 0;
    for (v, &c) in hist.iter().enumerate() {
        cdf += c;
        map[v] = (255.0 * cdf.saturating_sub(cdf_min) as f64 / (n - cdf_min) as f64).round() as u8;
    }
    map
}

/// Applies a luminance-plane transform. For RGB the luminance change is
/// added to every channel (clamped), preserving chroma differences.
fn on_luminance(img: &ImageBuffer, f: impl Fn(&[u8], usize, usize) -> Vec<u8>) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    match img.space() {
        ColorSpace::Gray => ImageBuffer::new(w, h, ColorSpace::Gray, f(img.data(), w, h)).expect("same shape"),
        _ => {
            let luma: Vec<u8> = img
                .data()
                .chunks_exact(3)
                .map(|px| luminance(px).round() as u8)
                .collect();
            let mapped = f(&luma, w, h);
            let mut out = img.data().to_vec();
            for (i, px) in out.chunks_exact_mut(3).enumerate() {
                let delta = mapped[i] as i32 - luma[i] as i32;
                for v in px {
                    *v = (*v as i32 + delta).clamp(0, 255) as u8;
                }
            }
            ImageBuffer::new(w, h, img.space(), out).expect("same shape")
        }
    }
}

/// Tile boundaries along one axis: `n` extents split into `min(tiles, n)` near-equal parts.
fn tile_bounds(extent: usize, tiles: usize) -> Vec<usize> {
    let t = tiles.min(extent);
    (0..=t).map(|i| i * extent / t).collect()
}

fn clahe_map(values: impl Iterator<Item = u8>) -> [f64; 256] {
    let mut hist = [0f64; 256];
    let mut n = 0usize;
    for v in values {
        hist[v as usize] += 1.0;
        n += 1;
    }
    let occupied = hist.iter().filter(|&&c| c > 0.0).count();
    let mut map = [0f64; 256];
    if occupied <= 1 {
        for (v, m) in map.iter_mut().enumerate() {
            *m = v as f64;
        }
        return map;
    }
    let limit = CLAHE_CLIP * n as f64;
    let mut excess = 0.0;
    for c in hist.iter_mut() {
        if *c > limit {
            excess += *c - limit;
            *c = limit;
        }
    }
    let share = excess / 256.0;
    let mut cdf = 0.0;
    for (v, c) in hist.iter().enumerate() {
        cdf += c + share;
        map[v] = 255.0 * cdf / n as f64;
    }
    map
}

/// Tiled equalization on a `CLAHE_TILES × CLAHE_TILES` grid, blended
/// bilinearly between the mappings of the four nearest tile centres.
fn clahe(plane: &[u8], w: usize, h: usize) -> Vec<u8> {
    let xs = tile_bounds(w, CLAHE_TILES);
    let ys = tile_bounds(h, CLAHE_TILES);
    let (tx, ty) = (xs.len() - 1, ys.len() - 1);
    let mut maps = Vec::with_capacity(tx * ty);
    for j in 0..ty {
        for i in 0..tx {
            let values = (ys[j]..ys[j + 1]).flat_map(|y| (xs[i]..xs[i + 1]).map(move |x| plane[y * w + x]));
            maps.push(clahe_map(values));
        }
    }
    let centre = |b: &[usize], k: usize| (b[k] + b[k + 1]) as f64 / 2.0 - 0.5;
    // index of the tile centre at or before `p`, and the blend weight toward the next one
    let locate = |b: &[usize], n: usize, p: f64| -> (usize, usize, f64) {
        if p <= centre(b, 0) {
            return (0, 0, 0.0);
        }
        for k in 0..n - 1 {
            let (c0, c1) = (centre(b, k), centre(b, k + 1));
            if p <= c1 {
                return (k, k + 1, (p - c0) / (c1 - c0));
            }
        }
        (n - 1, n - 1, 0.0)
    };
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let (j0, j1, fy) = locate(&ys, ty, y as f64);
        for x in 0..w {
            let (i0, i1, fx) = locate(&xs, tx, x as f64);
            let v = plane[y * w + x] as usize;
            let top = (1.0 - fx) * maps[j0 * tx + i0][v] + fx * maps[j0 * tx + i1][v];
            let bottom = (1.0 - fx) * maps[j1 * tx + i0][v] + fx * maps[j1 * tx + i1][v];
            out[y * w + x] = ((1.0 - fy) * top + fy * bottom).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}
