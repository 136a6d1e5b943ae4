use super::{ColorConfig, FeatureError};
use crate::pipeline::{convert_colorspace, ImageBuffer};

/// One normalized histogram per channel per space, concatenated spaces-major.
pub fn color_histograms(img: &ImageBuffer, cfg: &ColorConfig) -> Result<Vec<f64>, FeatureError> {
    let n = (img.width() * img.height()) as f64;
    let mut out = Vec::with_capacity(cfg.spaces.len() * 3 * cfg.bins);
    for &space in &cfg.spaces {
        let converted = convert_colorspace(img, space)?;
        let mut hist = vec![0.0; 3 * cfg.bins];
        for px in converted.data().chunks_exact(3) {
            for (ch, &v) in px.iter().enumerate() {
                hist[ch * cfg.bins + v as usize * cfg.bins / 256] += 1.0;
            }
        }
        out.extend(hist.into_iter().map(|c| c / n));
    }
    Ok(out)
}
