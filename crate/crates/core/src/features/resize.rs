use super::FeatureError;
use crate::pipeline::ImageBuffer;

/// Corner-aligned source coordinate of target index `i` out of `n`.
fn source_coord(i: usize, n: usize, src: usize) -> f64 {
    if n == 1 {
        (src - 1) as f64 / 2.0
    } else {
        i as f64 * (src - 1) as f64 / (n - 1) as f64
    }
}

/// Bilinear resize with corner-aligned sampling: the corner pixels of source
/// and target coincide.
pub fn resize_patch(img: &ImageBuffer, width: usize, height: usize) -> Result<ImageBuffer, FeatureError> {
    if width == 0 || height == 0 {
        return Err(FeatureError::Config(format!("resize target {width}×{height}")));
    }
    if (width, height) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    let c = img.channels();
    let mut data = Vec::with_capacity(width * height * c);
    for y in 0..height {
        let sy = source_coord(y, height, img.height());
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height() - 1);
        let fy = sy - y0 as f64;
        for x in 0..width {
            let sx = source_coord(x, width, img.width());
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(img.width() - 1);
            let fx = sx - x0 as f64;
            for ch in 0..c {
                let v = |xx: usize, yy: usize| img.pixel(xx, yy)[ch] as f64;
                let top = v(x0, y0) * (1.0 - fx) + v(x1, y0) * fx;
                let bottom = v(x0, y1) * (1.0 - fx) + v(x1, y1) * fx;
                data.push((top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(ImageBuffer::new(width, height, img.space(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ColorSpace;

    #[test]
    fn one_by_two_to_one_by_four() {
        let img = ImageBuffer::new(2, 1, ColorSpace::Gray, vec![0, 255]).unwrap();
        assert_eq!(resize_patch(&img, 4, 1).unwrap().data(), &[0, 85, 170, 255]);
    }

    #[test]
    fn same_size_is_identity() {
        let img = ImageBuffer::from_fn(5, 3, ColorSpace::Rgb, |x, y| [(x * 40) as u8, (y * 90) as u8, 1]);
        assert_eq!(resize_patch(&img, 5, 3).unwrap(), img);
    }

    #[test]
    fn checkerboard_interior_is_convex_mix() {
        let img = ImageBuffer::new(2, 2, ColorSpace::Gray, vec![0, 255, 255, 0]).unwrap();
        let out = resize_patch(&img, 4, 4).unwrap();
        for y in 1..3 {
            for x in 1..3 {
                let v = out.pixel(x, y)[0];
                assert!(v > 0 && v < 255, "({x},{y}) = {v}");
            }
        }
        assert_eq!(out.pixel(0, 0)[0], 0);
        assert_eq!(out.pixel(3, 0)[0], 255);
    }

    #[test]
    fn rejects_zero_target() {
        let img = ImageBuffer::filled(2, 2, ColorSpace::Gray, &[1]).unwrap();
        assert!(resize_patch(&img, 0, 3).is_err());
    }
}
