use super::{FeatureError, HogConfig};
use crate::pipeline::{to_gray, ImageBuffer};

const EPSILON: f64 = 1e-10;

fn block_grid(width: usize, height: usize, cfg: &HogConfig) -> Option<(usize, usize)> {
    let (cx, cy) = (width / cfg.cell, height / cfg.cell);
    (cx >= cfg.block && cy >= cfg.block).then(|| ((cx - cfg.block) / cfg.stride + 1, (cy - cfg.block) / cfg.stride + 1))
}

/// Descriptor length for a `width × height` image.
pub fn hog_len(width: usize, height: usize, cfg: &HogConfig) -> usize {
    block_grid(width, height, cfg).map_or(0, |(bx, by)| bx * by * cfg.block * cfg.block * cfg.bins)
}

/// Per-cell orientation histograms, row-major over cells. Gradients are
/// central differences (one-sided at the border); unsigned orientation is
/// split linearly between the two nearest bin centres, which sit at
/// multiples of `180/bins` degrees.
pub(crate) fn cell_histograms(plane: &[f64], width: usize, height: usize, cfg: &HogConfig) -> Vec<f64> {
    let (cx, cy) = (width / cfg.cell, height / cfg.cell);
    let mut cells = vec![0.0; cx * cy * cfg.bins];
    let bin_width = 180.0 / cfg.bins as f64;
    let at = |x: usize, y: usize| plane[y * width + x];
    for y in 0..cy * cfg.cell {
        for x in 0..cx * cfg.cell {
            let gx = at((x + 1).min(width - 1), y) - at(x.saturating_sub(1), y);
            let gy = at(x, (y + 1).min(height - 1)) - at(x, y.saturating_sub(1));
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = theta / bin_width;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = lower as usize % cfg.bins;
            let b1 = (b0 + 1) % cfg.bins;
            let cell = ((y / cfg.cell) * cx + x / cfg.cell) * cfg.bins;
            cells[cell + b0] += (1.0 - frac) * mag;
            cells[cell + b1] += frac * mag;
        }
    }
    cells
}

fn l2_hys(v: &mut [f64], clip: f64) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + EPSILON * EPSILON).sqrt();
    v.iter_mut().for_each(|x| *x = (*x / norm).min(clip));
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + EPSILON * EPSILON).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// HOG of a row-major intensity plane.
pub fn hog_plane(plane: &[f64], width: usize, height: usize, cfg: &HogConfig) -> Result<Vec<f64>, FeatureError> {
    assert_eq!(plane.len(), width * height, "plane size");
    let min = cfg.cell * cfg.block;
    let (bx, by) = block_grid(width, height, cfg).ok_or(FeatureError::TooSmall { width, height, min })?;
    let cells = cell_histograms(plane, width, height, cfg);
    let cx = width / cfg.cell;
    let mut out = Vec::with_capacity(hog_len(width, height, cfg));
    let mut block = Vec::with_capacity(cfg.block * cfg.block * cfg.bins);
    for j in 0..by {
        for i in 0..bx {
            block.clear();
            for dy in 0..cfg.block {
                for dx in 0..cfg.block {
                    let c = ((j * cfg.stride + dy) * cx + i * cfg.stride + dx) * cfg.bins;
                    block.extend_from_slice(&cells[c..c + cfg.bins]);
                }
            }
            l2_hys(&mut block, cfg.clip);
            out.extend_from_slice(&block);
        }
    }
    Ok(out)
}

/// HOG of the luminance of `img`.
pub fn hog_descriptor(img: &ImageBuffer, cfg: &HogConfig) -> Result<Vec<f64>, FeatureError> {
    let gray = to_gray(img)?;
    let plane: Vec<f64> = gray.data().iter().map(|&v| v as f64).collect();
    hog_plane(&plane, gray.width(), gray.height(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;
    use crate::pipeline::ColorSpace;
    use proptest::prelude::*;

    fn cfg() -> HogConfig {
        FeatureConfig::default().hog
    }

    #[test]
    fn length_at_256() {
        // (256/8 − 1)² blocks × 4 cells × 9 bins
        assert_eq!(hog_len(256, 256, &cfg()), 31 * 31 * 4 * 9);
        assert_eq!(hog_len(256, 256, &cfg()), 34_596);
        let img = ImageBuffer::filled(256, 256, ColorSpace::Gray, &[9]).unwrap();
        assert_eq!(hog_descriptor(&img, &cfg()).unwrap().len(), 34_596);
    }

    #[test]
    fn constant_image_gives_zeros() {
        let img = ImageBuffer::filled(32, 24, ColorSpace::Gray, &[200]).unwrap();
        assert!(hog_descriptor(&img, &cfg()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_votes_horizontal_gradient_bin() {
        let (w, h) = (32, 32);
        let plane: Vec<f64> = (0..w * h).map(|i| if i % w < 13 { 0.0 } else { 255.0 }).collect();
        let cells = cell_histograms(&plane, w, h, &cfg());
        for (c, hist) in cells.chunks(9).enumerate() {
            assert!(hist[1..].iter().all(|&v| v == 0.0), "cell {c}: {hist:?}");
        }
        // the edge (columns 12 and 13) falls in cell column 1, two pixels per row, |gx| = 255
        assert_eq!(cells[9], 8.0 * 2.0 * 255.0);
        let d = hog_plane(&plane, w, h, &cfg()).unwrap();
        for (k, &v) in d.iter().enumerate() {
            if k % 9 != 0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn diagonal_gradient_splits_between_bins() {
        // intensity x + y: gradient (2, 2) at 45°, between the 40° and 60° centres
        let (w, h) = (24, 24);
        let plane: Vec<f64> = (0..w * h).map(|i| ((i % w) + (i / w)) as f64).collect();
        let cells = cell_histograms(&plane, w, h, &cfg());
        // centre cell (index 4) has no border pixels; 45/20 = 2.25 → 0.75 to bin 2, 0.25 to bin 3
        let mass = 8f64.sqrt() * 64.0;
        assert!((cells[36 + 2] - 0.75 * mass).abs() < 1e-9);
        assert!((cells[36 + 3] - 0.25 * mass).abs() < 1e-9);
    }

    #[test]
    fn too_small() {
        let img = ImageBuffer::filled(15, 64, ColorSpace::Gray, &[0]).unwrap();
        assert!(matches!(
            hog_descriptor(&img, &cfg()),
            Err(FeatureError::TooSmall { .. })
        ));
    }

    proptest! {
        #[test]
        fn intensity_scale_invariant(data in prop::collection::vec(0.0f64..255.0, 24 * 24), c in 0.5f64..2.0) {
            let a = hog_plane(&data, 24, 24, &cfg()).unwrap();
            let scaled: Vec<f64> = data.iter().map(|v| v * c).collect();
            let b = hog_plane(&scaled, 24, 24, &cfg()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
