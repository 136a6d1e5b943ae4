//! Patch images: PPM I/O, colour spaces, contrast enhancement, the 15×
//! augmentation, zero-centring, manifests and fold plans.

mod augment;
pub mod color;
mod contrast;
mod dataset;
mod folds;
mod image;
mod normalize;
mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use augment::{
    augment_patch, augmented_count, flip_horizontal, flip_vertical, rotate180, rotate270, rotate90, rotated_crop,
    AugmentKind, CropParams, PatchRecord, Provenance, AUGMENT_FACTOR, CROP_FRACTION,
};
pub use color::{convert_colorspace, to_gray};
pub use contrast::{contrast_enhance, ContrastMode, CLAHE_CLIP, CLAHE_TILES};
pub use dataset::{
    load_patch, parse_manifest, read_manifest, scan_dataset, source_id_from_name, write_manifest, DatasetManifest,
    ManifestEntry, DEFAULT_CLASSES,
};
pub use folds::{
    largest_remainder, make_folds, make_folds_with, Fold, FoldOptions, FoldOutcome, FoldPlan, Holdout, Partition,
    SPLIT_FRACTIONS, VALIDATION_FRACTION,
};
pub use image::{read_ppm, write_ppm, ColorSpace, ImageBuffer};
pub use normalize::{apply_normalizer, fit_normalizer, Normalizer, NORMALIZER_EPSILON};
pub use synth::{synthetic_patch, synthetic_patches, write_synthetic_dataset};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported input: {0}")]
    UnsupportedInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("need at least {needed} distinct sources, found {found}")]
    TooFewSources { needed: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
