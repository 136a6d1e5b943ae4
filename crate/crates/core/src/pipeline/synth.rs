//! Synthetic two-class patches: smooth skin-tone noise (label 0) and the
//! same background carrying textured reddish blobs (label 1).

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    write_ppm, ColorSpace, DatasetManifest, ImageBuffer, ManifestEntry, PatchRecord, PipelineError, DEFAULT_CLASSES,
};

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

pub fn synthetic_patch(label: usize, size: usize, rng: &mut impl Rng) -> ImageBuffer {
    let r: f64 = rng.gen_range(185.0..235.0);
    let base = [r, r - rng.gen_range(40.0..55.0), r - rng.gen_range(70.0..90.0)];
    let waves: Vec<Wave> = (0..3)
        .map(|_| Wave {
            fx: rng.gen_range(0.5..2.0) / size as f64,
            fy: rng.gen_range(0.5..2.0) / size as f64,
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            amp: rng.gen_range(2.0..6.0),
        })
        .collect();
    let blobs: Vec<[f64; 4]> = if label == 1 {
        (0..rng.gen_range(1..=3))
            .map(|_| {
                let r = size as f64 * rng.gen_range(0.15..0.3);
                [
                    rng.gen_range(r..size as f64 - r),
                    rng.gen_range(r..size as f64 - r),
                    r,
                    r * rng.gen_range(0.7..1.3),
                ]
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut noise = || rng.gen_range(-3.0..3.0);
    ImageBuffer::from_fn(size, size, ColorSpace::Rgb, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let shade: f64 = waves
            .iter()
            .map(|w| w.amp * (std::f64::consts::TAU * (w.fx * xf + w.fy * yf) + w.phase).sin())
            .sum();
        let mut px = base.map(|c| c + shade + noise());
        for &[cx, cy, rx, ry] in &blobs {
            let d = ((xf - cx) / rx).powi(2) + ((yf - cy) / ry).powi(2);
            if d < 1.0 {
                // speckled wound bed: red with yellow slough on a pixel lattice
                let speckle = if (x * 7 + y * 13) % 5 == 0 {
                    [60.0, 70.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0]
                };
                let tex = 25.0 * ((xf * 1.7).sin() * (yf * 2.3).cos());
                px = [
                    165.0 + tex + speckle[0] + noise() * 5.0,
                    55.0 + tex * 0.5 + speckle[1] + noise() * 5.0,
                    50.0 + noise() * 5.0,
                ];
            }
        }
        px.map(|v| v.round().clamp(0.0, 255.0) as u8)
    })
}

/// `n` patches with alternating labels and one source per patch.
pub fn synthetic_patches(n: usize, size: usize, seed: u64) -> Vec<PatchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 2;
            PatchRecord::original(synthetic_patch(label, size, &mut rng), label, format!("synth{i:04}"))
        })
        .collect()
}

/// Writes synthetic patches in the dataset layout under `root` and returns their manifest.
pub fn write_synthetic_dataset(
    root: &Path,
    n: usize,
    size: usize,
    seed: u64,
) -> Result<DatasetManifest, PipelineError> {
    let classes: Vec<String> = DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect();
    for c in &classes {
        let dir = root.join(c);
        fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    }
    let mut entries = Vec::with_capacity(n);
    for p in synthetic_patches(n, size, seed) {
        let path = root.join(&classes[p.label]).join(format!("{}__0.ppm", p.source_id));
        fs::write(&path, write_ppm(&p.image)?).map_err(|e| PipelineError::io(&path, e))?;
        entries.push(ManifestEntry {
            path,
            label: p.label,
            source_id: p.source_id,
        });
    }
    DatasetManifest::new(entries, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_differ_in_redness() {
        let patches = synthetic_patches(20, 32, 1);
        let red_fraction = |img: &ImageBuffer| {
            img.data().chunks(3).filter(|p| p[0] as i32 - p[1] as i32 > 70).count() as f64 / (32.0 * 32.0)
        };
        for p in &patches {
            let f = red_fraction(&p.image);
            if p.label == 1 {
                assert!(f > 0.05, "{f}");
            } else {
                assert!(f < 0.01, "{f}");
            }
        }
        assert_eq!(patches, synthetic_patches(20, 32, 1));
    }

    #[test]
    fn writes_layout() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_synthetic_dataset(dir.path(), 4, 8, 0).unwrap();
        assert_eq!(m.len(), 4);
        assert!(dir.path().join("abnormal/synth0001__0.ppm").exists());
    }
}
