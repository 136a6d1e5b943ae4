use std::sync::OnceLock;

use super::FeatureError;
use crate::pipeline::{to_gray, ImageBuffer};

/// 58 uniform patterns plus one bin for all others.
pub const LBP_BINS: usize = 59;

/// Neighbour offsets, clockwise from the top-left; the first is the most significant bit.
const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// 8-bit code with a bit set for every neighbour `>=` the centre.
pub fn lbp_code(center: u8, neighbors: [u8; 8]) -> u8 {
    neighbors
        .iter()
        .fold(0u8, |code, &n| (code << 1) | u8::from(n >= center))
}

fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_left(1)).count_ones()
}

/// Histogram bin of a code: uniform codes (≤ 2 circular transitions) in
/// ascending code order take bins 0–57, everything else bin 58.
pub fn uniform_bin(code: u8) -> usize {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [(LBP_BINS - 1) as u8; 256];
        let mut next = 0u8;
        for c in 0..=255u8 {
            if transitions(c) <= 2 {
                t[c as usize] = next;
                next += 1;
            }
        }
        t
    });
    table[code as usize] as usize
}

/// Normalized 59-bin uniform LBP histogram over interior pixels.
pub fn lbp_histogram(img: &ImageBuffer) -> Result<Vec<f64>, FeatureError> {
    let gray = to_gray(img)?;
    let (w, h) = (gray.width(), gray.height());
    if w < 3 || h < 3 {
        return Err(FeatureError::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let px = gray.data();
    let mut hist = vec![0.0; LBP_BINS];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let nb = NEIGHBORS.map(|(dx, dy)| px[(y as isize + dy) as usize * w + (x as isize + dx) as usize]);
            hist[uniform_bin(lbp_code(px[y * w + x], nb))] += 1.0;
        }
    }
    let n = ((w - 2) * (h - 2)) as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ColorSpace;
    use proptest::prelude::*;

    #[test]
    fn alternating_neighbours() {
        // centre 5, clockwise neighbours 6,2,7,3,8,4,9,1
        let code = lbp_code(5, [6, 2, 7, 3, 8, 4, 9, 1]);
        assert_eq!(code, 0b1010_1010);
        assert_eq!(code, 170);
        assert_eq!(transitions(code), 8);
        assert_eq!(uniform_bin(code), 58);
    }

    #[test]
    fn fifty_eight_uniform_codes() {
        let uniform: Vec<u8> = (0..=255u8).filter(|&c| transitions(c) <= 2).collect();
        assert_eq!(uniform.len(), 58);
        for (i, &c) in uniform.iter().enumerate() {
            assert_eq!(uniform_bin(c), i);
        }
        assert_eq!(uniform_bin(0), 0);
        assert_eq!(uniform_bin(255), 57);
    }

    #[test]
    fn constant_image_is_all_ones_code() {
        let img = ImageBuffer::filled(6, 5, ColorSpace::Gray, &[77]).unwrap();
        let h = lbp_histogram(&img).unwrap();
        assert_eq!(h[uniform_bin(0xFF)], 1.0);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn too_small() {
        let img = ImageBuffer::filled(2, 9, ColorSpace::Gray, &[1]).unwrap();
        assert!(matches!(lbp_histogram(&img), Err(FeatureError::TooSmall { .. })));
    }

    proptest! {
        #[test]
        fn sums_to_one(w in 3usize..12, h in 3usize..12, data in prop::collection::vec(any::<u8>(), 144)) {
            let img = ImageBuffer::new(w, h, ColorSpace::Gray, data[..w * h].to_vec()).unwrap();
            let hist = lbp_histogram(&img).unwrap();
            prop_assert!(hist.iter().all(|&v| v >= 0.0));
            prop_assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn invariant_under_monotone_transform(
            data in prop::collection::vec(0u8..64, 81),
            steps in prop::collection::vec(1u8..=3, 64),
        ) {
            // random strictly increasing lookup table on 0..64
            let lut: Vec<u8> = steps.iter().scan(0u8, |acc, &s| { *acc += s; Some(*acc) }).collect();
            let img = ImageBuffer::new(9, 9, ColorSpace::Gray, data.clone()).unwrap();
            let mapped = ImageBuffer::new(9, 9, ColorSpace::Gray, data.iter().map(|&v| lut[v as usize]).collect()).unwrap();
            prop_assert_eq!(lbp_histogram(&img).unwrap(), lbp_histogram(&mapped).unwrap());
        }
    }
}
